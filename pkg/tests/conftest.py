import numpy as np
import pytest

from mflangevin import quad1d


@pytest.fixture(scope="session")
def gaussian_measure():
    return quad1d.build_measure(quad1d.PotentialSpec.gaussian(1.0), 1e-10)


@pytest.fixture(scope="session")
def quartic0_measure():
    return quad1d.build_measure(quad1d.PotentialSpec.quartic(0.0), 1e-10)


@pytest.fixture(scope="session")
def quartic1_measure():
    return quad1d.build_measure(quad1d.PotentialSpec.quartic(1.0), 1e-10)


@pytest.fixture(scope="session")
def uniform_circle():
    return quad1d.build_measure(quad1d.PotentialSpec.periodic_fourier([]), 1e-10)


@pytest.fixture(scope="session")
def quartic1_tc(quartic1_measure):
    from mflangevin import renormalized
    return renormalized.critical_temperature(quartic1_measure)


def adaptive_simpson(f, a, b, tol=1e-12, depth=48, initial_intervals=32):
    """Plain recursive adaptive Simpson quadrature (test oracle).

    The range is pre-split into panels so that symmetric integrands cannot
    fool the error estimate on the first subdivision.
    """
    def simpson(lo, hi):
        mid = (lo + hi) / 2.0
        return (hi - lo) / 6.0 * (f(lo) + 4.0 * f(mid) + f(hi)), mid

    def recurse(lo, hi, whole, mid, eps, level):
        left, lmid = simpson(lo, mid)
        right, rmid = simpson(mid, hi)
        if level <= 0 or abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return (recurse(lo, mid, left, lmid, eps / 2.0, level - 1)
                + recurse(mid, hi, right, rmid, eps / 2.0, level - 1))

    edges = np.linspace(a, b, initial_intervals + 1)
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        whole, mid = simpson(lo, hi)
        total += recurse(lo, hi, whole, mid, tol / initial_intervals, depth)
    return total
