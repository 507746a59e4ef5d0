import numpy as np
import pytest
from pydantic import TypeAdapter, ValidationError
from scipy.integrate import trapezoid

from src.noise import (
    CompositeSpectrum,
    PowerLawSpectrum,
    RtnSpectrum,
    Spectrum,
    SpectrumError,
    eval_composite,
    evaluate,
    log_log_slope,
)


def test_power_law_values():
    s = PowerLawSpectrum(gamma=0.1, beta=1.0)
    assert evaluate(s, 2.0) == pytest.approx(0.05)
    assert evaluate(s, -2.0) == pytest.approx(0.05)
    assert evaluate(s, 1.0) == pytest.approx(0.1)


def test_power_law_cutoff_regularizes_zero():
    s = PowerLawSpectrum(gamma=0.1, beta=1.0, omega_cutoff=1e-2)
    assert evaluate(s, 0.0) == pytest.approx(10.0)
    assert evaluate(s, 5e-3) == pytest.approx(10.0)


def test_power_law_validation():
    with pytest.raises(ValidationError):
        PowerLawSpectrum(gamma=0.1, beta=2.0)
    with pytest.raises(ValidationError):
        PowerLawSpectrum(gamma=-1.0, beta=1.0)


def test_rtn_values():
    s = RtnSpectrum(r=2.0)
    assert evaluate(s, 0.0) == pytest.approx(1 / (2 * np.pi))
    assert evaluate(s, 2.0) == pytest.approx(1 / (4 * np.pi))


def test_rtn_integrates_to_scale():
    s = RtnSpectrum(r=0.5, scale=3.0)
    omegas = np.linspace(-2000, 2000, 400001)
    total = trapezoid(evaluate(s, omegas), omegas)
    assert total == pytest.approx(3.0, rel=1e-3)


def test_composite_band_validation():
    with pytest.raises(ValidationError):
        CompositeSpectrum(r1=10.0, r2=1.0)


def test_composite_degenerate_band_is_lorentzian():
    s = CompositeSpectrum(r1=1.0, r2=1.0, scale=2.0)
    assert evaluate(s, 0.5) == pytest.approx(evaluate(RtnSpectrum(r=1.0, scale=2.0), 0.5))


@pytest.mark.parametrize("alpha", [0.7, 1.0, 1.3])
def test_composite_slope_inside_band(alpha):
    # Deep inside [r1, r2] the superposition falls off as 1/ω^α.
    s = CompositeSpectrum(r1=1e-2, r2=1e2, alpha=alpha)
    assert log_log_slope(s, 0.1, 10.0) == pytest.approx(-alpha, abs=0.05)


def test_composite_evaluates_arrays_and_scalars():
    s = CompositeSpectrum(r1=1e-2, r2=1e2)
    values = eval_composite(s, np.array([[0.5, -0.5], [1.0, 2.0]]))
    assert values.shape == (2, 2)
    assert values[0, 0] == pytest.approx(values[0, 1])
    assert isinstance(eval_composite(s, 0.5), float)


def test_power_law_slope():
    s = PowerLawSpectrum(gamma=1.0, beta=0.8)
    assert log_log_slope(s, 0.1, 10.0) == pytest.approx(-0.8)


def test_spectrum_union_discriminates():
    adapter = TypeAdapter(Spectrum)
    s = adapter.validate_python({"kind": "rtn", "r": 1.0})
    assert isinstance(s, RtnSpectrum)


def test_unsupported_spectrum():
    with pytest.raises(SpectrumError):
        evaluate("flat", 1.0)


def test_callable_spectrum():
    assert evaluate(lambda w: np.ones_like(w) * 0.2, np.array([1.0, 2.0])) == pytest.approx([0.2, 0.2])
