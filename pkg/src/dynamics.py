# dynamics.py

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Literal, Optional

import numpy as np
import scipy.linalg
from pydantic import BaseModel, Field, model_validator

from src.hilbert import (
    LinearAlgebraError,
    OperatorMatrix,
    hermitian_eig,
    hermiticity_error,
    pure_density,
    validate_density_matrix,
    validate_state,
)
from src.redfield import RedfieldGenerator
from src.settings import (
    BREACH_FACTOR,
    DEFAULT_ABS_TOL,
    DEFAULT_GRID_POINTS,
    DEFAULT_GRID_T_MAX,
    DEFAULT_GRID_T_MIN,
    DEFAULT_MAX_STEP,
    DEFAULT_REL_TOL,
    FIT_MIN_STEPS,
    HERMITICITY_TOL,
    MAX_SNAPSHOTS,
    MIN_STEP,
    NEGATIVE_EIGENVALUE_TOL,
    TRACE_TOL,
)

logger = logging.getLogger(__name__)

Observer = Callable[[np.ndarray], float]

# Dormand-Prince 5(4) tableau; the last row of A equals the 5th-order weights (FSAL).
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

# PI step-size control
SAFETY = 0.9
PI_ALPHA = 0.7 / 5
PI_BETA = 0.4 / 5
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


class IntegrationError(RuntimeError):
    """Step-size underflow or an invariant breach; carries the integrator diagnostics."""

    def __init__(self, message: str, diagnostics: Optional[dict] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class IntegratorConfig(BaseModel):
    """Tolerances and output grid for one trajectory.

    In the interaction frame only the dissipator is integrated, so
    `max_step` caps steps in the lab frame and for stepped closed evolution.
    """

    model_config = {"frozen": True}

    rel_tol: float = Field(default=DEFAULT_REL_TOL, gt=0)
    abs_tol: float = Field(default=DEFAULT_ABS_TOL, gt=0)
    max_step: float = Field(default=DEFAULT_MAX_STEP, gt=0)
    grid: Literal["log", "uniform", "explicit"] = "log"
    t_min: float = Field(default=DEFAULT_GRID_T_MIN, gt=0)
    t_max: float = Field(default=DEFAULT_GRID_T_MAX, gt=0)
    n_samples: int = Field(default=DEFAULT_GRID_POINTS, ge=2)
    times: Optional[List[float]] = None
    renormalize_trace: bool = True
    frame: Literal["interaction", "lab"] = "interaction"
    closed_method: Literal["spectral", "stepped"] = "spectral"
    max_snapshots: int = Field(default=MAX_SNAPSHOTS, ge=1)

    @model_validator(mode="after")
    def check_grid(self):
        if self.grid == "explicit":
            if not self.times:
                raise ValueError("explicit grid needs a non-empty list of times")
            times = np.asarray(self.times, dtype=float)
            if times[0] != 0.0 or np.any(np.diff(times) <= 0):
                raise ValueError("explicit times must start at 0 and increase strictly")
        elif self.grid == "log" and self.t_min >= self.t_max:
            raise ValueError(f"log grid needs t_min < t_max, got {self.t_min} >= {self.t_max}")
        return self

    def sample_times(self) -> np.ndarray:
        if self.grid == "explicit":
            return np.asarray(self.times, dtype=float)
        if self.grid == "uniform":
            return np.linspace(0.0, self.t_max, self.n_samples)
        return np.concatenate([[0.0], np.logspace(np.log10(self.t_min), np.log10(self.t_max), self.n_samples)])


@dataclass
class Trajectory:
    """Sampled evolution plus integrator diagnostics.

    `snapshots` holds computational-basis density matrices, or state
    vectors when `pure` is set, at `times[snapshot_indices]`.
    """

    times: np.ndarray
    snapshots: np.ndarray
    snapshot_indices: np.ndarray
    observables: Dict[str, np.ndarray]
    trace_error: np.ndarray
    hermiticity_error: np.ndarray
    min_eig: np.ndarray
    accepted_steps: int = 0
    rejected_steps: int = 0
    early_step_time: float = float("nan")
    pure: bool = False
    frame: str = "lab"
    metadata: dict = field(default_factory=dict)

    @property
    def snapshot_times(self) -> np.ndarray:
        return self.times[self.snapshot_indices]

    @property
    def complete(self) -> bool:
        return self.snapshot_indices.size == self.times.size

    def density(self, i: int) -> np.ndarray:
        """Density matrix of snapshot i."""
        if self.pure:
            return pure_density(self.snapshots[i])
        return self.snapshots[i]

    def densities(self):
        for i in range(self.snapshot_indices.size):
            yield self.density(i)


def snapshot_indices(n_samples: int, max_snapshots: int) -> np.ndarray:
    if n_samples <= max_snapshots:
        return np.arange(n_samples)
    return np.unique(np.rint(np.linspace(0, n_samples - 1, max_snapshots)).astype(int))


def _error_norm(err: np.ndarray, y: np.ndarray, y_new: np.ndarray, rel_tol: float, abs_tol: float) -> float:
    scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.max(np.abs(err) / scale))


def _dopri_step(rhs, y: np.ndarray, k1: np.ndarray, h: float):
    ks = [k1]
    for stage in range(1, 7):
        increment = sum(a * k for a, k in zip(_A[stage], ks) if a != 0.0)
        ks.append(rhs(y + h * increment))
    y_new = y + h * sum(b * k for b, k in zip(_B5, ks) if b != 0.0)
    err = h * sum(e * k for e, k in zip(_E, ks) if e != 0.0)
    return y_new, err, ks[6]


class _Stepper:
    """Adaptive embedded Runge-Kutta 5(4) integration between sample times."""

    def __init__(self, rhs, y0: np.ndarray, cfg: IntegratorConfig, cap: Optional[float], correct: Callable):
        self.rhs = rhs
        self.y = y0
        self.cfg = cfg
        self.cap = cap if cap is not None else np.inf
        self.correct = correct
        self.t = 0.0
        self.k1 = rhs(y0)
        self.h = min(self.cap, 1e-2)
        self.previous_error = 1e-4
        self.accepted = 0
        self.rejected = 0
        self.early_step_time = float("nan")
        self.max_herm = 0.0
        self.max_drift = 0.0

    def diagnostics(self) -> dict:
        return {"t": self.t, "h": self.h, "accepted_steps": self.accepted, "rejected_steps": self.rejected}

    def advance_to(self, t_target: float):
        rejected_last = False
        while self.t < t_target:
            remaining = t_target - self.t
            h = min(self.h, remaining)
            if h < MIN_STEP:
                if remaining < MIN_STEP:
                    self.t = t_target
                    break
                raise IntegrationError(
                    f"step size underflow at t={self.t:.6g} (h={h:.3e}); the generator is too stiff",
                    self.diagnostics(),
                )
            y_new, err, k7 = _dopri_step(self.rhs, self.y, self.k1, h)
            error = _error_norm(err, self.y, y_new, self.cfg.rel_tol, self.cfg.abs_tol)

            if error <= 1.0 and np.isfinite(error):
                lands = h >= remaining * (1 - 1e-12)
                self.t = t_target if lands else self.t + h
                self.y, herm, drift = self.correct(y_new)
                self.max_herm = max(self.max_herm, herm)
                self.max_drift = max(self.max_drift, drift)
                self.k1 = k7
                self.accepted += 1
                if self.accepted == FIT_MIN_STEPS:
                    self.early_step_time = self.t
                factor = SAFETY * max(error, 1e-10) ** (-PI_ALPHA) * self.previous_error**PI_BETA
                factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
                if rejected_last:
                    factor = min(factor, 1.0)
                self.previous_error = max(error, 1e-4)
                rejected_last = False
                # A step shortened to land on a sample does not shrink the next proposal.
                self.h = min(self.cap, max(self.h, h * factor) if lands else h * factor)
            else:
                self.rejected += 1
                rejected_last = True
                factor = MIN_FACTOR if not np.isfinite(error) else max(MIN_FACTOR, SAFETY * error ** (-0.2))
                self.h = h * factor


def _check_breach(name: str, value: float, tolerance: float, diagnostics: dict):
    if value > BREACH_FACTOR * tolerance:
        logger.error(f"Invariant breach: {name} = {value:.3e} exceeds {BREACH_FACTOR:g} x {tolerance:.1e}")
        raise IntegrationError(f"{name} {value:.3e} exceeds {BREACH_FACTOR:g}x tolerance {tolerance:.1e}", diagnostics)


def evolve(
    gen: RedfieldGenerator,
    rho0: np.ndarray,
    cfg: Optional[IntegratorConfig] = None,
    observers: Optional[Dict[str, Observer]] = None,
) -> Trajectory:
    """Integrate dρ/dt = L(ρ) and sample ρ on the configured grid."""
    cfg = cfg or IntegratorConfig()
    observers = observers or {}
    rho0 = validate_density_matrix(rho0)
    if rho0.shape[0] != gen.dim:
        raise LinearAlgebraError(f"initial state has dimension {rho0.shape[0]}, generator has {gen.dim}")

    times = cfg.sample_times()
    d = gen.dim
    interaction = cfg.frame == "interaction"
    phases = gen.coherent.reshape(d, d)

    if interaction:
        rhs = gen.apply_dissipator
        cap = None
    else:
        rhs = gen.apply
        cap = cfg.max_step

    def correct(y):
        raw_herm = hermiticity_error(y)
        y = (y + y.conj().T) / 2
        trace = np.trace(y).real
        drift = abs(trace - 1.0)
        if cfg.renormalize_trace:
            y = y / trace
        return y, raw_herm, drift

    def to_computational(y, t):
        rho_eig = y * np.exp(phases * t) if interaction else y
        return gen.to_computational(rho_eig)

    stepper = _Stepper(rhs, gen.to_eigenbasis(rho0), cfg, cap, correct)
    keep = set(snapshot_indices(times.size, cfg.max_snapshots).tolist())
    snapshots = []
    values = {name: np.empty(times.size) for name in observers}
    trace_error = np.empty(times.size)
    herm_error = np.empty(times.size)
    min_eig = np.empty(times.size)

    for i, t in enumerate(times):
        stepper.advance_to(t)
        y = stepper.y
        trace_error[i] = abs(np.trace(y).real - 1.0)
        herm_error[i] = max(stepper.max_herm, hermiticity_error(y))
        drift = stepper.max_drift
        stepper.max_herm = stepper.max_drift = 0.0
        min_eig[i] = scipy.linalg.eigvalsh(y)[0]
        diagnostics = dict(stepper.diagnostics(), sample=i)
        _check_breach("hermiticity error", herm_error[i], HERMITICITY_TOL, diagnostics)
        _check_breach("trace error", max(trace_error[i], drift), TRACE_TOL, diagnostics)
        _check_breach("negative eigenvalue", -min_eig[i], NEGATIVE_EIGENVALUE_TOL, diagnostics)

        if observers or i in keep:
            rho = to_computational(y, t)
            for name, observer in observers.items():
                values[name][i] = observer(rho)
            if i in keep:
                snapshots.append(rho)

    logger.info(
        f"Evolved to t={times[-1]:.6g}: {stepper.accepted} steps accepted, {stepper.rejected} rejected ({cfg.frame} frame)"
    )
    return Trajectory(
        times=times,
        snapshots=np.array(snapshots),
        snapshot_indices=np.array(sorted(keep)),
        observables=values,
        trace_error=trace_error,
        hermiticity_error=herm_error,
        min_eig=min_eig,
        accepted_steps=stepper.accepted,
        rejected_steps=stepper.rejected,
        early_step_time=stepper.early_step_time,
        pure=False,
        frame=cfg.frame,
    )


def evolve_closed(
    H: OperatorMatrix,
    psi0: np.ndarray,
    cfg: Optional[IntegratorConfig] = None,
    observers: Optional[Dict[str, Observer]] = None,
) -> Trajectory:
    """Pure-state evolution under H, spectral (exp(−iHt)) or stepped."""
    cfg = cfg or IntegratorConfig()
    observers = observers or {}
    psi0 = validate_state(psi0)
    if psi0.size != H.dim:
        raise LinearAlgebraError(f"state has dimension {psi0.size}, Hamiltonian has {H.dim}")

    times = cfg.sample_times()
    vectors = np.empty((times.size, H.dim), dtype=complex)
    accepted = rejected = 0
    early_step_time = float("nan")

    if cfg.closed_method == "spectral":
        eig = hermitian_eig(H)
        amplitudes = eig.eigenvectors.conj().T @ psi0
        phases = np.exp(-1j * np.outer(times, eig.eigenvalues))
        vectors[:] = (phases * amplitudes) @ eig.eigenvectors.T
    else:
        entries = H.entries

        # The state is left unnormalized; its norm drift is the integration error we report.
        def correct(y):
            return y, 0.0, abs(np.linalg.norm(y) - 1.0)

        stepper = _Stepper(lambda y: -1j * (entries @ y), psi0.copy(), cfg, cfg.max_step, correct)
        for i, t in enumerate(times):
            stepper.advance_to(t)
            vectors[i] = stepper.y
        accepted, rejected, early_step_time = stepper.accepted, stepper.rejected, stepper.early_step_time

    norm_error = np.abs(np.linalg.norm(vectors, axis=1) - 1.0)
    if np.max(norm_error) > TRACE_TOL:
        logger.warning(f"Closed evolution norm drifted by {np.max(norm_error):.3e} ({cfg.closed_method})")
    values = {name: np.empty(times.size) for name in observers}
    if observers:
        for i, psi in enumerate(vectors):
            rho = pure_density(psi)
            for name, observer in observers.items():
                values[name][i] = observer(rho)

    logger.info(f"Closed evolution to t={times[-1]:.6g} ({cfg.closed_method})")
    return Trajectory(
        times=times,
        snapshots=vectors,
        snapshot_indices=np.arange(times.size),
        observables=values,
        trace_error=norm_error,
        hermiticity_error=np.zeros(times.size),
        min_eig=np.zeros(times.size),
        accepted_steps=accepted,
        rejected_steps=rejected,
        early_step_time=early_step_time,
        pure=True,
        frame="lab",
    )
