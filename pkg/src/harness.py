# harness.py

import csv
import itertools
import json
import logging
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
import tomli
from joblib import Parallel, delayed
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from scipy.stats import linregress

from src.dynamics import IntegrationError, IntegratorConfig, Trajectory, evolve, evolve_closed
from src.hilbert import LinearAlgebraError, hermiticity_error, pure_density
from src.models import (
    LOCAL_STATES,
    U1_PRESETS,
    Z2_PRESETS,
    GeneratorSource,
    JumpSelection,
    ModelBundle,
    SequenceKind,
    U1Params,
    Z2Params,
    build_initial_state,
    build_model,
    build_zeno_hamiltonian,
    make_sequence,
    maximal_mixing_violation,
    sector_projectors,
    z2_local_eigenvalue_table,
)
from src.noise import CompositeSpectrum, PowerLawSpectrum, RtnSpectrum, Spectrum, SpectrumError
from src.observables import standard_observers, time_average
from src.redfield import GeneratorError, RedfieldGenerator, assemble_generator, decompose_eigenoperators
from src.settings import (
    CSV_FLOAT_FORMAT,
    DEFAULT_ETAS,
    DEFAULT_H_VIOLATION,
    DEFAULT_MU,
    DEFAULT_OMEGA_CUTOFF,
    DEFAULT_OUTPUT_ROOT,
    DEFAULT_WORKERS,
    ENV_OUTPUT_ROOT,
    ENV_WORKERS,
    FIT_MIN_RUNS,
    FIT_PLATEAU_FRACTION,
    FIT_WINDOW_END,
    FIT_WINDOW_START,
    HERMITICITY_TOL,
    INDEX_FILE_NAME,
    NEGATIVE_EIGENVALUE_TOL,
    TRACE_TOL,
    VALIDITY_THRESHOLD,
)

logger = logging.getLogger(__name__)

INDEX_COLUMNS = [
    "name", "status", "model", "L", "preset", "protection", "sequence", "source", "noise",
    "gamma", "V", "beta", "lam", "csv", "metadata", "validity_passed", "max_ratio",
    "violation_max_mixing", "early_step_time",
]
# Columns that must agree across the runs of one scaling fit.
FIT_FIXED_COLUMNS = ("model", "L", "preset", "protection", "sequence", "source", "noise", "lam", "beta")


class ConfigError(ValueError):
    """Raised for unreadable or invalid experiment configs and fit inputs."""


class InvariantBreach(RuntimeError):
    """Raised when a finished run violates the numerical hygiene tolerances."""


# Failures of a single run; a sweep records them and moves on.
RUN_ERRORS = (IntegrationError, InvariantBreach, LinearAlgebraError, GeneratorError, SpectrumError)


def _as_grid(value):
    if isinstance(value, (int, float)):
        return [float(value)]
    return value


class ModelSection(BaseModel):
    kind: Literal["u1", "z2"] = "u1"
    L: int = Field(default=4, ge=2)
    boundary: Literal["periodic", "open"] = "periodic"
    J: float = Field(default=1.0, gt=0)
    mu: float = DEFAULT_MU
    h: float = DEFAULT_H_VIOLATION
    etas: Tuple[float, float, float, float] = DEFAULT_ETAS

    def params(self) -> Union[U1Params, Z2Params]:
        if self.kind == "u1":
            return U1Params(J=self.J, mu=self.mu, L=self.L, boundary=self.boundary)
        return Z2Params(J=self.J, h=self.h, L=self.L, boundary=self.boundary, etas=self.etas)


class ProtectionSection(BaseModel):
    kind: Literal["none", "linear", "quadratic"] = "none"
    source: GeneratorSource = "full"
    sequence: SequenceKind = "compliant_L4"
    coefficients: Optional[List[Union[float, str]]] = None
    V: List[float] = Field(default_factory=lambda: [0.0])

    @field_validator("V", mode="before")
    @classmethod
    def scalar_strength(cls, value):
        return _as_grid(value)

    @field_validator("V")
    @classmethod
    def check_strengths(cls, values):
        if not values:
            raise ValueError("V grid must not be empty")
        if any(v < 0 for v in values):
            raise ValueError(f"V must be non-negative, got {values}")
        return values


class NoiseSection(BaseModel):
    kind: Literal["power_law", "rtn", "composite"] = "power_law"
    gamma: List[float] = Field(default_factory=lambda: [0.1])
    beta: List[float] = Field(default_factory=lambda: [1.0])
    omega_cutoff: float = Field(default=DEFAULT_OMEGA_CUTOFF, gt=0)
    r: float = Field(default=1.0, gt=0)
    r1: float = Field(default=1e-2, gt=0)
    r2: float = Field(default=1e2, gt=0)
    drop_zero_frequency: bool = False
    validity_threshold: float = Field(default=VALIDITY_THRESHOLD, gt=0)

    @field_validator("gamma", "beta", mode="before")
    @classmethod
    def scalar_grids(cls, value):
        return _as_grid(value)

    @field_validator("gamma")
    @classmethod
    def check_gamma(cls, values):
        if not values:
            raise ValueError("gamma grid must not be empty")
        if any(g < 0 for g in values):
            raise ValueError(f"gamma must be non-negative, got {values}")
        return values

    @field_validator("beta")
    @classmethod
    def check_beta(cls, values):
        if not values:
            raise ValueError("beta grid must not be empty")
        if any(not 0 < b < 2 for b in values):
            raise ValueError(f"beta must lie in (0, 2), got {values}")
        return values

    def spectrum(self, gamma: float, beta: float) -> Spectrum:
        if self.kind == "power_law":
            return PowerLawSpectrum(gamma=gamma, beta=beta, omega_cutoff=self.omega_cutoff)
        if self.kind == "rtn":
            return RtnSpectrum(r=self.r, scale=gamma)
        return CompositeSpectrum(r1=self.r1, r2=self.r2, alpha=beta, scale=gamma)


class OutputSection(BaseModel):
    root: Optional[str] = None


class ExperimentConfig(BaseModel):
    """One experiment: a model, an initial state, and grids over γ, V and β."""

    model: ModelSection = Field(default_factory=ModelSection)
    preset: str = "u1_vacuum"
    protection: ProtectionSection = Field(default_factory=ProtectionSection)
    noise: NoiseSection = Field(default_factory=NoiseSection)
    integrator: IntegratorConfig = Field(default_factory=IntegratorConfig)
    output: OutputSection = Field(default_factory=OutputSection)
    jumps: JumpSelection = "both"
    lam: float = 0.0
    reference: Literal["none", "ideal", "zeno"] = "none"
    seed: int = 0
    workers: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def check_combination(self):
        model = self.model
        if model.kind == "u1" and model.boundary == "periodic" and model.L % 2:
            raise ValueError(f"model.L: U(1) on a ring needs even L, got {model.L}")

        n_subsystems = 2 * model.L if model.boundary == "periodic" else 2 * model.L - 1
        if self.preset in U1_PRESETS or self.preset in Z2_PRESETS:
            if not self.preset.startswith(model.kind + "_"):
                raise ValueError(f"preset: {self.preset!r} does not exist for model {model.kind!r}")
            if model.boundary != "periodic" or model.L % 2:
                raise ValueError(f"preset: {self.preset!r} needs even L with periodic boundary")
        elif len(self.preset) != n_subsystems or set(self.preset) - set(LOCAL_STATES):
            raise ValueError(
                f"preset: {self.preset!r} is neither a named preset nor a {n_subsystems}-character "
                f"state string over {sorted(LOCAL_STATES)}"
            )

        protection = self.protection
        if protection.kind == "none" and any(v != 0 for v in protection.V):
            raise ValueError("protection.V: nonzero strengths need protection.kind linear or quadratic")
        if protection.kind == "linear":
            if protection.sequence == "compliant_L4" and model.L != 4:
                raise ValueError("protection.sequence: compliant_L4 needs L=4")
            if protection.sequence == "custom" and len(protection.coefficients or []) != model.L:
                raise ValueError(f"protection.coefficients: custom sequence needs {model.L} values")
        if protection.source == "pseudo" and model.kind != "z2":
            raise ValueError("protection.source: pseudogenerators exist for the z2 model only")
        if self.noise.kind == "rtn" and len(self.noise.beta) > 1:
            raise ValueError("noise.beta: the rtn spectrum has no exponent to sweep")
        return self


@dataclass(frozen=True)
class RunPoint:
    gamma: float
    V: float
    beta: float


@dataclass
class RunResult:
    name: str
    csv_path: Path
    metadata_path: Path
    row: Dict[str, object]


@dataclass
class ScalingFit:
    """Early-time slopes of ε(t) and their dependence on the swept parameter."""

    varied: str
    values: List[float]
    slopes: List[float]
    windows: List[Tuple[float, float]]
    exponent: float
    stderr: float
    r_squared: float
    beta_hat: Optional[float] = None
    linearity_deviation: Optional[float] = None
    ratios: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "varied": self.varied,
            "values": self.values,
            "slopes": self.slopes,
            "windows": [list(w) for w in self.windows],
            "exponent": self.exponent,
            "stderr": self.stderr,
            "r_squared": self.r_squared,
            "beta_hat": self.beta_hat,
            "linearity_deviation": self.linearity_deviation,
            "ratios": self.ratios,
        }


def _format_validation(e: ValidationError) -> str:
    return "; ".join(f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors())


def parse_config(data: dict) -> ExperimentConfig:
    if "config" in data and isinstance(data["config"], dict):
        data = data["config"]
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(_format_validation(e)) from e


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read a TOML config, or a JSON config / run metadata echo."""
    path = Path(path)
    try:
        if path.suffix.lower() == ".json":
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        else:
            with open(path, "rb") as f:
                data = tomli.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except tomli.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno}, column {e.colno}: {e.msg}") from e
    config = parse_config(data)
    logger.info(f"Loaded config {path}")
    return config


def resolve_workers(config: ExperimentConfig) -> int:
    value = os.getenv(ENV_WORKERS)
    if value:
        try:
            workers = int(value)
        except ValueError as e:
            raise ConfigError(f"{ENV_WORKERS} must be an integer, got {value!r}") from e
        if workers < 1:
            raise ConfigError(f"{ENV_WORKERS} must be positive, got {workers}")
        return workers
    return config.workers or DEFAULT_WORKERS


def resolve_output_root(config: ExperimentConfig) -> Path:
    return Path(os.getenv(ENV_OUTPUT_ROOT) or config.output.root or DEFAULT_OUTPUT_ROOT)


def expand_grid(config: ExperimentConfig) -> List[RunPoint]:
    return [
        RunPoint(gamma=g, V=v, beta=b)
        for g, v, b in itertools.product(config.noise.gamma, config.protection.V, config.noise.beta)
    ]


def run_name(config: ExperimentConfig, point: RunPoint) -> str:
    name = f"{config.model.kind}_L{config.model.L}_{config.preset}_g{point.gamma:.6g}_V{point.V:.6g}_b{point.beta:.6g}"
    if config.protection.kind == "quadratic":
        name += "_quad"
    if config.lam:
        name += f"_lam{config.lam:.6g}"
    if config.noise.kind != "power_law":
        name += f"_{config.noise.kind}"
    return name


def point_config(config: ExperimentConfig, point: RunPoint) -> ExperimentConfig:
    """The config restricted to a single grid point, suitable for re-running."""
    return config.model_copy(
        update={
            "noise": config.noise.model_copy(update={"gamma": [point.gamma], "beta": [point.beta]}),
            "protection": config.protection.model_copy(update={"V": [point.V]}),
        }
    )


def build_bundle(config: ExperimentConfig) -> ModelBundle:
    protection = config.protection
    sequence = None
    if protection.kind == "linear":
        sequence = make_sequence(protection.sequence, config.model.L, protection.coefficients)
    return build_model(config.model.params(), jumps=config.jumps, sequence=sequence, source=protection.source)


def coherent_hamiltonian(bundle: ModelBundle, config: ExperimentConfig, V: float):
    H = bundle.h0
    if config.protection.kind == "linear" and V:
        H = H + bundle.protection_linear * V
    elif config.protection.kind == "quadratic" and V:
        H = H + bundle.protection_quadratic * V
    if config.lam:
        H = H + bundle.error_h1 * config.lam
    return H.as_hermitian()


def _reference_trajectory(bundle, config, psi0, observers) -> Trajectory:
    if config.reference == "zeno":
        H = build_zeno_hamiltonian(bundle, config.lam, config.protection.source)
    else:
        H = bundle.h0
    return evolve_closed(H, psi0, config.integrator, observers)


def _check_hygiene(name: str, traj: Trajectory):
    problems = []
    if np.max(traj.trace_error) > TRACE_TOL:
        problems.append(f"trace error {np.max(traj.trace_error):.3e}")
    if np.max(traj.hermiticity_error) > HERMITICITY_TOL:
        problems.append(f"hermiticity error {np.max(traj.hermiticity_error):.3e}")
    if np.min(traj.min_eig) < -NEGATIVE_EIGENVALUE_TOL:
        problems.append(f"min eigenvalue {np.min(traj.min_eig):.3e}")
    if problems:
        logger.error(f"Run {name} breached numerical hygiene: {', '.join(problems)}")
        raise InvariantBreach(f"run {name}: {', '.join(problems)}")


def generator_self_check(gen: RedfieldGenerator, seed: int) -> Dict[str, float]:
    """Apply the generator to a seeded random density matrix; L(ρ) must be traceless and Hermitian."""
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(gen.dim, gen.dim)) + 1j * rng.normal(size=(gen.dim, gen.dim))
    rho = a @ a.conj().T
    rho /= np.trace(rho).real
    out = gen.apply(rho)
    scale = max(float(np.max(np.abs(out))), 1.0)
    return {
        "seed": seed,
        "trace_residual": abs(complex(np.trace(out))) / scale,
        "hermiticity_residual": hermiticity_error(out) / scale,
    }


def _format(value: float) -> str:
    return CSV_FLOAT_FORMAT.format(float(value))


def write_csv(path: Path, columns: Dict[str, np.ndarray]):
    names = list(columns)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(names)
        for row in zip(*(columns[n] for n in names)):
            writer.writerow([_format(v) for v in row])


def read_csv(path: Path) -> Dict[str, np.ndarray]:
    with open(path, "r", newline="", encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        return {}
    return {key: np.array([float(r[key]) for r in rows]) for key in rows[0]}


def execute_run(config: ExperimentConfig, point: RunPoint, output_dir: Union[str, Path]) -> RunResult:
    """Build, evolve and serialize one grid point."""
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    name = run_name(config, point)
    logger.info(f"Starting run {name}")

    bundle = build_bundle(config)
    psi0 = build_initial_state(bundle, config.preset)
    H = coherent_hamiltonian(bundle, config, point.V)
    spectrum = config.noise.spectrum(point.gamma, point.beta)

    eset = decompose_eigenoperators(
        H, [j.operator for j in bundle.jump_ops], labels=[j.label for j in bundle.jump_ops]
    )
    gen = assemble_generator(
        eset,
        spectrum,
        drop_zero_frequency=config.noise.drop_zero_frequency,
        validity_threshold=config.noise.validity_threshold,
    )
    self_check = generator_self_check(gen, config.seed)
    if max(self_check["trace_residual"], self_check["hermiticity_residual"]) > TRACE_TOL:
        raise InvariantBreach(f"run {name}: generator self-check failed {self_check}")
    observers = standard_observers(bundle, psi0)
    traj = evolve(gen, pure_density(psi0), config.integrator, observers)
    _check_hygiene(name, traj)

    columns = {"time": traj.times, "violation": traj.observables["violation"]}
    tracked = "condensate" if bundle.model == "u1" else "imbalance"
    columns[tracked] = traj.observables[tracked]
    columns["imbalance_avg"] = time_average(traj.times, traj.observables["imbalance"])
    columns["fidelity"] = traj.observables["fidelity"]
    columns["entropy_midchain"] = traj.observables["entropy_midchain"]
    columns["trace_error"] = traj.trace_error
    columns["min_eig"] = traj.min_eig

    if config.reference != "none":
        reference_observers = {key: observers[key] for key in (tracked, "fidelity")}
        reference = _reference_trajectory(bundle, config, psi0, reference_observers)
        for key in (tracked, "fidelity"):
            columns[f"{key}_ideal"] = reference.observables[key]
            columns[f"{key}_deviation"] = np.abs(traj.observables[key] - reference.observables[key])

    csv_path = output_dir / f"{name}.csv"
    metadata_path = output_dir / f"{name}.json"
    write_csv(csv_path, columns)

    validity = gen.validity.to_dict() if gen.validity is not None else None
    eps_mm = maximal_mixing_violation(bundle)
    metadata = {
        "name": name,
        "config": point_config(config, point).model_dump(mode="json"),
        "point": {"gamma": point.gamma, "V": point.V, "beta": point.beta},
        "omega_cutoff": config.noise.omega_cutoff if config.noise.kind == "power_law" else None,
        "validity": validity,
        "violation_max_mixing": eps_mm,
        "early_step_time": traj.early_step_time if np.isfinite(traj.early_step_time) else None,
        "accepted_steps": traj.accepted_steps,
        "rejected_steps": traj.rejected_steps,
        "bin_tol": eset.bin_tol,
        "channels": gen.channels,
        "generator_check": self_check,
        "dissipator_nnz": int(gen.dissipator.nnz),
        "columns": list(columns),
    }
    with open(metadata_path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(metadata, f, indent=2, sort_keys=True)
        f.write("\n")

    row = {
        "name": name,
        "status": "ok",
        "model": config.model.kind,
        "L": config.model.L,
        "preset": config.preset,
        "protection": config.protection.kind,
        "sequence": config.protection.sequence if config.protection.kind == "linear" else "",
        "source": config.protection.source,
        "noise": config.noise.kind,
        "gamma": point.gamma,
        "V": point.V,
        "beta": point.beta,
        "lam": config.lam,
        "csv": csv_path.name,
        "metadata": metadata_path.name,
        "validity_passed": validity["passed"] if validity else "",
        "max_ratio": validity["max_ratio"] if validity else "",
        "violation_max_mixing": eps_mm,
        "early_step_time": traj.early_step_time,
    }
    logger.info(f"Wrote {csv_path} ({traj.times.size} samples)")
    return RunResult(name, csv_path, metadata_path, row)


def write_index(output_dir: Path, rows: List[Dict[str, object]]) -> Path:
    path = Path(output_dir) / INDEX_FILE_NAME
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=INDEX_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _format(v) if isinstance(v, float) else v for key, v in row.items()})
    logger.info(f"Wrote index {path} ({len(rows)} runs)")
    return path


def _failed_row(config: ExperimentConfig, point: RunPoint, error: Exception) -> Dict[str, object]:
    row = {key: "" for key in INDEX_COLUMNS}
    row.update(
        name=run_name(config, point),
        status=f"failed: {type(error).__name__}",
        model=config.model.kind,
        L=config.model.L,
        preset=config.preset,
        gamma=point.gamma,
        V=point.V,
        beta=point.beta,
    )
    return row


def _run_or_fail(config: ExperimentConfig, point: RunPoint, output_dir: Path):
    try:
        return execute_run(config, point, output_dir)
    except RUN_ERRORS as e:
        logger.warning(f"Skipping sweep entry {run_name(config, point)}: {e}")
        return _failed_row(config, point, e)


def run_sweep(config: ExperimentConfig, output_dir: Optional[Union[str, Path]] = None) -> Tuple[List[RunResult], Path]:
    """Run the Cartesian product of the γ, V and β grids and write the index."""
    output_dir = Path(output_dir) if output_dir is not None else resolve_output_root(config)
    points = expand_grid(config)
    workers = resolve_workers(config)
    logger.info(f"Sweep of {len(points)} runs on {workers} worker(s) into {output_dir}")

    outcomes = Parallel(n_jobs=workers)(delayed(_run_or_fail)(config, point, output_dir) for point in points)
    results = [o for o in outcomes if isinstance(o, RunResult)]
    rows = [o.row if isinstance(o, RunResult) else o for o in outcomes]
    output_dir.mkdir(parents=True, exist_ok=True)
    index = write_index(output_dir, rows)

    failed = [row["name"] for row in rows if row["status"] != "ok"]
    if failed:
        raise InvariantBreach(f"{len(failed)} sweep run(s) failed: {', '.join(failed)}")
    return results, index


def run_single(config: ExperimentConfig, output_dir: Optional[Union[str, Path]] = None) -> Tuple[List[RunResult], Path]:
    """Run every grid point sequentially (a single point for scalar configs)."""
    output_dir = Path(output_dir) if output_dir is not None else resolve_output_root(config)
    results = [execute_run(config, point, output_dir) for point in expand_grid(config)]
    index = write_index(output_dir, [r.row for r in results])
    return results, index


def fit_window(times: np.ndarray, violation: np.ndarray, eps_mm: float, early_step_time: float) -> Tuple[float, float]:
    start = FIT_WINDOW_START
    if np.isfinite(early_step_time):
        start = max(start, early_step_time)
    end = FIT_WINDOW_END
    crossed = np.flatnonzero(violation >= FIT_PLATEAU_FRACTION * eps_mm)
    if crossed.size:
        end = min(end, float(times[crossed[0]]))
    return start, end


def early_slope(times: np.ndarray, violation: np.ndarray, window: Tuple[float, float], name: str = "") -> float:
    mask = (times >= window[0]) & (times <= window[1])
    if np.count_nonzero(mask) < 3:
        raise ConfigError(f"run {name} has fewer than 3 samples in its fit window {window}")
    slope, _ = np.polyfit(times[mask], violation[mask], 1)
    return float(slope)


def _read_index(index_path: Path) -> List[Dict[str, str]]:
    try:
        with open(index_path, "r", newline="", encoding="utf-8") as f:
            return list(csv.DictReader(f))
    except FileNotFoundError as e:
        raise ConfigError(f"index file not found: {index_path}") from e


def fit_scaling(index_path: Union[str, Path]) -> ScalingFit:
    """Fit early-time violation slopes against γ (linearity) or V (power law, β̂)."""
    index_path = Path(index_path)
    rows = [r for r in _read_index(index_path) if r.get("status", "ok") == "ok"]
    if len(rows) < FIT_MIN_RUNS:
        raise ConfigError(f"scaling fit needs at least {FIT_MIN_RUNS} runs, index has {len(rows)}")

    for key in FIT_FIXED_COLUMNS:
        if len({r[key] for r in rows}) > 1:
            raise ConfigError(f"runs differ in {key!r}; a scaling fit varies only gamma or V")
    gammas = {float(r["gamma"]) for r in rows}
    strengths = {float(r["V"]) for r in rows}
    if len(gammas) > 1 and len(strengths) > 1:
        raise ConfigError("runs vary both gamma and V; the fit is confounded")
    if len(gammas) == 1 and len(strengths) == 1:
        raise ConfigError("runs vary neither gamma nor V")
    varied = "gamma" if len(gammas) > 1 else "V"

    if varied == "V":
        dropped = [r["name"] for r in rows if float(r["V"]) <= 0]
        if dropped:
            logger.warning(f"Excluding unprotected runs from the power-law fit: {dropped}")
        rows = [r for r in rows if float(r["V"]) > 0]
        if len(rows) < FIT_MIN_RUNS:
            raise ConfigError(f"power-law fit needs at least {FIT_MIN_RUNS} runs with V > 0")

    rows.sort(key=lambda r: float(r[varied]))
    values, slopes, windows = [], [], []
    for row in rows:
        data = read_csv(index_path.parent / row["csv"])
        eps_mm = float(row["violation_max_mixing"])
        early = float(row["early_step_time"]) if row["early_step_time"] else float("nan")
        window = fit_window(data["time"], data["violation"], eps_mm, early)
        slope = early_slope(data["time"], data["violation"], window, row["name"])
        if slope <= 0:
            raise ConfigError(f"run {row['name']} has non-positive early slope {slope:.3e}")
        values.append(float(row[varied]))
        slopes.append(slope)
        windows.append(window)

    regression = linregress(np.log(values), np.log(slopes))
    fit = ScalingFit(
        varied=varied,
        values=values,
        slopes=slopes,
        windows=windows,
        exponent=float(regression.slope),
        stderr=float(regression.stderr),
        r_squared=float(regression.rvalue**2),
    )
    if varied == "V":
        fit.beta_hat = -fit.exponent
        logger.info(f"Power-law fit over V: beta_hat = {fit.beta_hat:.4f} +- {fit.stderr:.4f}")
    else:
        normalized = np.array(slopes) / np.array(values)
        fit.linearity_deviation = float(np.max(np.abs(normalized / normalized.mean() - 1)))
        for (g1, s1), (g2, s2) in zip(zip(values, slopes), list(zip(values, slopes))[1:]):
            fit.ratios[f"{g2:.6g}/{g1:.6g}"] = (s2 / s1) / (g2 / g1)
        logger.info(f"Linearity over gamma: max deviation {fit.linearity_deviation:.3%}")
    return fit


def sector_weight_table(bundle: ModelBundle, preset: str) -> List[Tuple[Tuple[int, ...], float]]:
    """Nonzero Tr{ρ₀ P_g}, largest first."""
    psi0 = build_initial_state(bundle, preset)
    weights = []
    for sector in sector_projectors(bundle):
        weight = sector.projector.expectation(psi0).real
        if weight > 1e-12:
            weights.append((sector.sector, weight))
    return sorted(weights, key=lambda item: (-round(item[1], 12), item[0]))


def tables_report() -> str:
    """Local eigenvalue table and initial-state sector weights at L=4."""
    lines = ["Z2 local generator and pseudogenerator eigenvalues", "n  tau_l  tau_r   g   w(g_tar=+1)  w(g_tar=-1)"]
    for row in z2_local_eigenvalue_table():
        lines.append(
            f"{row['n']}  {row['tau_left']:+d}     {row['tau_right']:+d}     {row['g']:+d}   "
            f"{row['w_tar+1']:+d}           {row['w_tar-1']:+d}"
        )
    u1 = build_model(U1Params(L=4))
    z2 = build_model(Z2Params(L=4))
    for bundle, preset in ((u1, "u1_vacuum"), (u1, "u1_domainwall_x"), (z2, "z2_domainwall_x"), (z2, "z2_domainwall_z")):
        lines.append("")
        lines.append(f"Sector weights of {preset}")
        for sector, weight in sector_weight_table(bundle, preset):
            lines.append(f"g = ({', '.join(f'{g:+d}' for g in sector)})  {Fraction(weight).limit_denominator(4096)}  {weight:.12g}")
    return "\n".join(lines)
