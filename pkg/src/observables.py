# observables.py

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from src.dynamics import Trajectory
from src.hilbert import LatticeSpec, partial_trace, von_neumann_entropy
from src.models import ModelBundle, ModelError, SectorProjector

logger = logging.getLogger(__name__)

Observer = Callable[[np.ndarray], float]


@dataclass(frozen=True)
class ObservableSeries:
    name: str
    times: np.ndarray
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.values.size


def _trace_with(rho: np.ndarray, operator: np.ndarray) -> float:
    return float(np.einsum("ij,ji->", rho, operator).real)


def violation_observer(bundle: ModelBundle) -> Observer:
    """ε = (1/L) Σ_j Tr{ρ (G_j − g^tar_j)²}."""
    penalty = bundle.protection_quadratic.entries
    L = bundle.L
    return lambda rho: max(0.0, _trace_with(rho, penalty) / L)


def condensate_observer(bundle: ModelBundle) -> Observer:
    """C = 1/2 + (1/2L) Σ_j Tr{ρ σ^z_j}."""
    if bundle.model != "u1":
        raise ModelError("the chiral condensate is defined for the U(1) model only")
    total_z = np.real(sum(np.diag(sz.entries) for sz in bundle.matter_sigma_z))
    L = bundle.L
    return lambda rho: 0.5 + float(np.real(np.diag(rho)) @ total_z) / (2 * L)


def imbalance_weights(bundle: ModelBundle, psi0: np.ndarray) -> np.ndarray:
    """p_j = ⟨ψ₀|σ^z_j|ψ₀⟩."""
    return np.array([sz.expectation(psi0).real for sz in bundle.matter_sigma_z])


def imbalance_observer(bundle: ModelBundle, weights: Sequence[float]) -> Observer:
    """Instantaneous integrand (1/L) Σ_j p_j Tr{ρ n_j}."""
    weights = np.asarray(weights, dtype=float)
    if weights.size != bundle.L:
        raise ModelError(f"{weights.size} imbalance weights for {bundle.L} sites")
    weighted = np.real(sum(p * np.diag(n.entries) for p, n in zip(weights, bundle.number_operators())))
    L = bundle.L
    return lambda rho: float(np.real(np.diag(rho)) @ weighted) / L


def fidelity_observer(psi0: np.ndarray) -> Observer:
    psi0 = np.asarray(psi0, dtype=complex)
    return lambda rho: float(np.vdot(psi0, rho @ psi0).real)


def midchain_cut(lattice: LatticeSpec) -> List[int]:
    if lattice.n_subsystems % 2:
        raise ModelError(f"mid-chain cut needs an even number of subsystems, got {lattice.n_subsystems}")
    return list(range(lattice.n_subsystems // 2))


def entropy_observer(lattice: LatticeSpec) -> Observer:
    kept = midchain_cut(lattice)
    return lambda rho: von_neumann_entropy(partial_trace(rho, lattice, kept))


def sector_observer(projector: SectorProjector) -> Observer:
    entries = projector.projector.entries
    return lambda rho: _trace_with(rho, entries)


def time_average(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    """(1/t) ∫₀ᵗ values ds by the trapezoid rule; the t = 0 sample is the integrand itself."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    integral = cumulative_trapezoid(values, times, initial=0.0)
    averaged = np.empty_like(values)
    positive = times > 0
    averaged[positive] = integral[positive] / times[positive]
    averaged[~positive] = values[~positive]
    return averaged


def _series(traj: Trajectory, name: str, observer: Optional[Observer], metadata: dict) -> ObservableSeries:
    if name in traj.observables:
        return ObservableSeries(name, traj.times, np.asarray(traj.observables[name]), metadata)
    if observer is None:
        raise KeyError(f"trajectory carries no {name!r} samples")
    values = np.array([observer(rho) for rho in traj.densities()])
    return ObservableSeries(name, traj.snapshot_times, values, metadata)


def gauge_violation(traj: Trajectory, bundle: ModelBundle) -> ObservableSeries:
    return _series(traj, "violation", violation_observer(bundle), {"model": bundle.model, "L": bundle.L})


def chiral_condensate(traj: Trajectory, bundle: ModelBundle) -> ObservableSeries:
    return _series(traj, "condensate", condensate_observer(bundle), {"model": bundle.model, "L": bundle.L})


def imbalance(traj: Trajectory, bundle: ModelBundle, p: Sequence[float]) -> ObservableSeries:
    """Running time average of the imbalance integrand."""
    integrand = _series(traj, "imbalance", imbalance_observer(bundle, p), {})
    values = time_average(integrand.times, integrand.values)
    return ObservableSeries("imbalance_avg", integrand.times, values, {"model": bundle.model, "weights": list(p)})


def fidelity(traj: Trajectory, psi0: np.ndarray) -> ObservableSeries:
    return _series(traj, "fidelity", fidelity_observer(psi0), {})


def midchain_entropy(traj: Trajectory, lattice: LatticeSpec, averaged: bool = False) -> ObservableSeries:
    series = _series(traj, "entropy_midchain", entropy_observer(lattice), {"cut": midchain_cut(lattice)})
    if not averaged:
        return series
    return ObservableSeries(
        "entropy_midchain_avg", series.times, time_average(series.times, series.values), series.metadata
    )


def sector_weights(traj: Trajectory, projectors: Sequence[SectorProjector]) -> Dict[Tuple[int, ...], ObservableSeries]:
    """Tr{ρ(t) P_g} for every sector g."""
    weights = {}
    for projector in projectors:
        name = "sector_" + "_".join(str(g) for g in projector.sector)
        weights[projector.sector] = _series(traj, name, sector_observer(projector), {"rank": projector.rank})
    return weights


def standard_observers(bundle: ModelBundle, psi0: np.ndarray) -> Dict[str, Observer]:
    """On-the-fly observers for the run columns, in output order."""
    observers = {"violation": violation_observer(bundle)}
    if bundle.model == "u1":
        observers["condensate"] = condensate_observer(bundle)
    observers["imbalance"] = imbalance_observer(bundle, imbalance_weights(bundle, psi0))
    observers["fidelity"] = fidelity_observer(psi0)
    observers["entropy_midchain"] = entropy_observer(bundle.lattice)
    return observers
