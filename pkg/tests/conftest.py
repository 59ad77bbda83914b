"""Shared fixtures and independent oracles for the test suite.

The oracles deliberately avoid the package's own evaluation paths:
Bessel references come from a high-precision ascending series evaluated
with mpmath arithmetic, and zeros from sign-change bisection on that
series.
"""

import mpmath as mp
import numpy as np
import pytest

from ibflow import SpectralMeasure, make_model

# first positive zero of J_1, frozen from the series bisection oracle below
J1_FIRST_ZERO = 3.8317059702075123
# J_1(1), frozen from the same oracle at 30 digits
J1_AT_1 = 0.44005058574493355


def series_j_oracle(nu, x, dps: int = 40) -> float:
    """Ascending series for J_nu evaluated in mpmath arithmetic.

    Independent of the package implementation; the extended precision
    absorbs the cancellation that makes the series unusable in doubles
    for large arguments.
    """
    with mp.workdps(dps):
        nu_mp = mp.mpf(nu)
        x_mp = mp.mpf(x)
        if x_mp == 0:
            return 1.0 if nu == 0 else 0.0
        q = x_mp * x_mp / 4
        term = (x_mp / 2) ** nu_mp / mp.gamma(nu_mp + 1)
        total = term
        for k in range(1, 400):
            term = term * (-q) / (k * (k + nu_mp))
            total += term
            if abs(term) < abs(total) * mp.mpf(10) ** (-dps):
                break
        return float(total)


def bessel_zero_oracle(nu, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Bisection on the series oracle; [lo, hi] must bracket one zero."""
    flo = series_j_oracle(nu, lo)
    assert flo * series_j_oracle(nu, hi) < 0, "interval must bracket a zero"
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if flo * series_j_oracle(nu, mid) > 0:
            lo = mid
            flo = series_j_oracle(nu, mid)
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def random_rotation(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish rotation via QR of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q *= np.sign(np.diag(r))
    return q


def random_model(rng: np.random.Generator, d: int | None = None,
                 force_mu1_zero: bool = False):
    """A randomized valid model built from atoms plus density pieces."""
    if d is None:
        d = int(rng.integers(2, 4))
    w = rng.uniform(0.05, 1.0, size=3)
    if force_mu1_zero:
        w[1] = 0.0
    if rng.random() < 0.3 and not force_mu1_zero:
        w[2] = 0.0
    w[0] *= 0.3  # keep a healthy stochastic part
    mu0, mu1, mu2 = w / w.sum()

    def measure():
        atoms = tuple(
            (float(rng.uniform(0.3, 4.0)), float(rng.uniform(0.2, 2.0)))
            for _ in range(rng.integers(1, 4)))
        pieces = ()
        if rng.random() < 0.5:
            lo = float(rng.uniform(0.2, 2.0))
            pieces = ((lo, lo + float(rng.uniform(0.3, 2.0)),
                       float(rng.uniform(0.1, 1.0))),)
        return SpectralMeasure(atoms=atoms, density_pieces=pieces)

    return make_model(d, mu0, mu1, mu2,
                      m_p=measure() if mu1 > 0 else None,
                      m_s=measure() if mu2 > 0 else None)


@pytest.fixture
def d2_potential_atom():
    """Pure-potential d=2 model with one atom at 1; lambda = -1/4."""
    return make_model(2, 0.0, 1.0, 0.0, m_p=SpectralMeasure(atoms=((1.0, 1.0),)))


@pytest.fixture
def d2_solenoidal_atom():
    """Pure-solenoidal d=2 model with one atom at 1; lambda = +1/4."""
    return make_model(2, 0.0, 0.0, 1.0, m_s=SpectralMeasure(atoms=((1.0, 1.0),)))


@pytest.fixture
def d2_mixed():
    """d=2 model with all three components and a density piece."""
    return make_model(
        2, 0.2, 0.5, 0.3,
        m_p=SpectralMeasure(atoms=((1.0, 1.0),), density_pieces=((0.5, 1.5, 0.4),)),
        m_s=SpectralMeasure(atoms=((2.0, 0.7),)))


@pytest.fixture
def d3_mixed():
    """d=3 model with potential and solenoidal parts."""
    return make_model(
        3, 0.1, 0.6, 0.3,
        m_p=SpectralMeasure(atoms=((1.3, 1.0),), density_pieces=((0.5, 2.5, 0.4),)),
        m_s=SpectralMeasure(atoms=((2.0, 1.0),)))


@pytest.fixture
def trivial_model():
    """Pure translation fixture (mu0 = 1)."""
    return make_model(2, 1.0, 0.0, 0.0, allow_trivial=True)

