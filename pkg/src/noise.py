# noise.py

import logging
import warnings
from typing import Literal, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.integrate import IntegrationWarning, quad
from typing_extensions import Annotated

from src.settings import COMPOSITE_QUAD_LIMIT, COMPOSITE_QUAD_REL_TOL, DEFAULT_OMEGA_CUTOFF

logger = logging.getLogger(__name__)


class SpectrumError(ValueError):
    """Raised when a spectrum cannot be evaluated at the requested accuracy."""


class PowerLawSpectrum(BaseModel):
    """S(ω) = γ / max(|ω|, ω_c)^β."""

    model_config = {"frozen": True}

    kind: Literal["power_law"] = "power_law"
    gamma: float = Field(ge=0)
    beta: float = Field(gt=0, lt=2)
    omega_cutoff: float = Field(default=DEFAULT_OMEGA_CUTOFF, gt=0)


class RtnSpectrum(BaseModel):
    """Lorentzian of a single random-telegraph fluctuator with switching rate r."""

    model_config = {"frozen": True}

    kind: Literal["rtn"] = "rtn"
    r: float = Field(gt=0)
    scale: float = Field(default=1.0, ge=0)


class CompositeSpectrum(BaseModel):
    """Lorentzians integrated over switching rates r ∈ [r1, r2] with weight ∝ r^−α."""

    model_config = {"frozen": True}

    kind: Literal["composite"] = "composite"
    r1: float = Field(gt=0)
    r2: float = Field(gt=0)
    alpha: float = Field(default=1.0, gt=0)
    scale: float = Field(default=1.0, ge=0)
    rel_tol: float = Field(default=COMPOSITE_QUAD_REL_TOL, gt=0)
    limit: int = Field(default=COMPOSITE_QUAD_LIMIT, ge=1)

    @model_validator(mode="after")
    def check_band(self):
        if self.r2 < self.r1:
            raise ValueError(f"rate band must satisfy r1 <= r2, got [{self.r1}, {self.r2}]")
        return self

    @property
    def degenerate(self) -> bool:
        return (self.r2 - self.r1) <= 1e-12 * self.r2


Spectrum = Annotated[Union[PowerLawSpectrum, RtnSpectrum, CompositeSpectrum], Field(discriminator="kind")]


def eval_power_law(s: PowerLawSpectrum, omega):
    omega = np.abs(np.asarray(omega, dtype=float))
    return s.gamma / np.maximum(omega, s.omega_cutoff) ** s.beta


def _lorentzian(r: float, omega):
    omega = np.asarray(omega, dtype=float)
    return r / (np.pi * (omega**2 + r**2))


def eval_rtn(s: RtnSpectrum, omega):
    return s.scale * _lorentzian(s.r, omega)


def _rate_norm(s: CompositeSpectrum) -> float:
    if abs(s.alpha - 1.0) < 1e-12:
        return float(np.log(s.r2 / s.r1))
    return (s.r2 ** (1 - s.alpha) - s.r1 ** (1 - s.alpha)) / (1 - s.alpha)


def _composite_point(s: CompositeSpectrum, omega: float, norm: float) -> float:
    def integrand(u):
        r = np.exp(u)
        # dr = r du absorbs one power of r.
        return r ** (2 - s.alpha) / (np.pi * (omega**2 + r**2)) / norm

    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, _ = quad(integrand, np.log(s.r1), np.log(s.r2), epsabs=0.0, epsrel=s.rel_tol, limit=s.limit)
        except IntegrationWarning as e:
            logger.error(f"Composite spectrum quadrature failed at omega={omega}: {e}", exc_info=True)
            raise SpectrumError(f"quadrature did not converge at omega={omega}: {e}") from e
    return value


def eval_composite(s: CompositeSpectrum, omega):
    omega = np.abs(np.asarray(omega, dtype=float))
    if s.degenerate:
        return s.scale * _lorentzian(s.r1, omega)

    norm = _rate_norm(s)
    # Evaluate each distinct |ω| once.
    unique, inverse = np.unique(omega.reshape(-1), return_inverse=True)
    values = np.array([_composite_point(s, float(w), norm) for w in unique])
    result = s.scale * values[inverse].reshape(omega.shape)
    return result if result.ndim else float(result)


def evaluate(spectrum: Spectrum, omega):
    """Spectrum value(s) at frequency or array of frequencies ω (even in ω)."""
    if isinstance(spectrum, PowerLawSpectrum):
        return eval_power_law(spectrum, omega)
    if isinstance(spectrum, RtnSpectrum):
        return eval_rtn(spectrum, omega)
    if isinstance(spectrum, CompositeSpectrum):
        return eval_composite(spectrum, omega)
    if callable(spectrum):
        return np.asarray(spectrum(np.asarray(omega, dtype=float)), dtype=float)
    raise SpectrumError(f"unsupported spectrum type {type(spectrum).__name__}")


def log_log_slope(spectrum: Spectrum, omega_min: float, omega_max: float, points: int = 41) -> float:
    """Least-squares slope of log S against log ω on a log-spaced grid."""
    omegas = np.logspace(np.log10(omega_min), np.log10(omega_max), points)
    values = np.asarray(evaluate(spectrum, omegas), dtype=float)
    if np.any(values <= 0):
        raise SpectrumError("spectrum vanishes on the slope window")
    slope, _ = np.polyfit(np.log(omegas), np.log(values), 1)
    return float(slope)
