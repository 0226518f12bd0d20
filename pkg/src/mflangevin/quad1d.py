"""One-dimensional measure engine.

Represents probability measures proportional to exp(-V) on the real line or
the circle, together with their exponential tilts exp(h*x - V), and answers
moment queries to a controlled tolerance.

Quadrature scheme: composite Gauss-Legendre panels on the real line with
automatic domain widening (tilts move the mode, so static bounds are unsafe);
uniform trapezoid grid on the circle (spectrally accurate for smooth periodic
integrands).  Every constructed measure is verified by grid doubling: the
returned grid and a grid at double resolution must agree on low moments to
the requested relative tolerance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline

from .errors import GridFailure, NonNormalizable

__all__ = [
    "PotentialSpec",
    "LineMeasure",
    "TiltMoments",
    "GhsReport",
    "build_measure",
    "tilt_moments",
    "expectation",
    "check_ghs",
]

REAL_LINE = "real_line"
CIRCLE = "circle"

# exp(-40) < 1e-17: a potential gap of TAIL_GAP above the interior minimum
# makes the truncated tail negligible at the 1e-16 level.
_TAIL_GAP = 40.0
_MAX_WIDENINGS = 60
_MAX_REFINEMENTS = 12


@dataclass(frozen=True)
class PotentialSpec:
    """A confinement potential with metadata.

    kind is one of "quartic", "gaussian", "periodic_fourier", "tabulated".
    quartic:  V(x) = x^4/4 - lam*x^2/2            (real line)
    gaussian: V(x) = curvature*x^2/2              (real line)
    periodic_fourier: V(t) = sum_k c[k-1]*cos(k*t) (circle, k = 1..len(c))
    tabulated: cubic spline through (nodes, values); outside the table the
        potential continues quadratically with matching value, slope and
        one-sided curvature, and evaluations there set the extrapolation flag
        on any measure built from it.
    """

    kind: str
    domain: str
    ghs_claimed: bool = False
    lam: float | None = None
    curvature: float | None = None
    coefficients: tuple[float, ...] | None = None
    table_nodes: tuple[float, ...] | None = None
    table_values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.domain not in (REAL_LINE, CIRCLE):
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.kind in ("quartic", "gaussian") and self.domain != REAL_LINE:
            raise ValueError(f"{self.kind} potentials live on the real line")
        if self.kind == "periodic_fourier" and self.domain != CIRCLE:
            raise ValueError("periodic_fourier potentials live on the circle")
        if self.kind == "gaussian" and not (self.curvature and self.curvature > 0):
            raise ValueError("gaussian potential needs curvature > 0")
        if self.kind == "tabulated":
            nodes = np.asarray(self.table_nodes, dtype=float)
            values = np.asarray(self.table_values, dtype=float)
            if nodes.ndim != 1 or nodes.shape != values.shape or len(nodes) < 4:
                raise ValueError("tabulated potential needs matching 1-D nodes/values, >= 4 points")
            if not np.all(np.diff(nodes) > 0):
                raise ValueError("tabulated nodes must be strictly increasing")
            if not np.all(np.isfinite(values)):
                raise ValueError("tabulated values must be finite")

    # -- constructors ---------------------------------------------------------

    @classmethod
    def quartic(cls, lam: float, ghs_claimed: bool = True) -> "PotentialSpec":
        return cls(kind="quartic", domain=REAL_LINE, ghs_claimed=ghs_claimed, lam=float(lam))

    @classmethod
    def gaussian(cls, curvature: float, ghs_claimed: bool = True) -> "PotentialSpec":
        return cls(kind="gaussian", domain=REAL_LINE, ghs_claimed=ghs_claimed,
                   curvature=float(curvature))

    @classmethod
    def periodic_fourier(cls, coefficients: Sequence[float]) -> "PotentialSpec":
        return cls(kind="periodic_fourier", domain=CIRCLE,
                   coefficients=tuple(float(c) for c in coefficients))

    @classmethod
    def tabulated(cls, nodes: Sequence[float], values: Sequence[float],
                  ghs_claimed: bool = False) -> "PotentialSpec":
        return cls(kind="tabulated", domain=REAL_LINE, ghs_claimed=ghs_claimed,
                   table_nodes=tuple(float(x) for x in nodes),
                   table_values=tuple(float(v) for v in values))

    # -- evaluation -----------------------------------------------------------

    def _spline(self) -> CubicSpline:
        return CubicSpline(np.asarray(self.table_nodes), np.asarray(self.table_values))

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "quartic":
            sq = x * x
            return sq * sq / 4.0 - self.lam * sq / 2.0
        if self.kind == "gaussian":
            return self.curvature * x**2 / 2.0
        if self.kind == "periodic_fourier":
            out = np.zeros_like(x)
            for k, c in enumerate(self.coefficients or (), start=1):
                out += c * np.cos(k * x)
            return out
        return self._eval_tabulated(x, deriv=0)

    def derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "quartic":
            return x * x * x - self.lam * x
        if self.kind == "gaussian":
            return self.curvature * x
        if self.kind == "periodic_fourier":
            out = np.zeros_like(x)
            for k, c in enumerate(self.coefficients or (), start=1):
                out -= c * k * np.sin(k * x)
            return out
        return self._eval_tabulated(x, deriv=1)

    def _eval_tabulated(self, x: np.ndarray, deriv: int) -> np.ndarray:
        sp = self._spline()
        lo, hi = self.table_nodes[0], self.table_nodes[-1]
        out = np.asarray(sp(x, nu=deriv), dtype=float)
        for bound, mask in ((lo, x < lo), (hi, x > hi)):
            if np.any(mask):
                v0 = float(sp(bound))
                v1 = float(sp(bound, nu=1))
                v2 = float(sp(bound, nu=2))
                t = x[mask] - bound
                if deriv == 0:
                    out[mask] = v0 + v1 * t + 0.5 * v2 * t**2
                else:
                    out[mask] = v1 + v2 * t
        return out

    def uses_extrapolation(self, lo: float, hi: float) -> bool:
        if self.kind != "tabulated":
            return False
        return lo < self.table_nodes[0] or hi > self.table_nodes[-1]


@dataclass(frozen=True)
class LineMeasure:
    """Quadrature representation of a measure proportional to exp(-V).

    nodes/weights form a quadrature rule on [lo, hi] (or [0, 2pi)); the rule
    has already passed the grid-doubling check at tolerance target_tol, and on
    the real line the density at the endpoints is below 1e-16 of its maximum.
    Values are immutable after construction and safe to share across threads.
    """

    potential: PotentialSpec
    nodes: np.ndarray
    weights: np.ndarray
    log_density: np.ndarray
    domain_bounds: tuple[float, float]
    target_tol: float
    panels: int
    panel_order: int
    extrapolated: bool = False

    @property
    def domain(self) -> str:
        return self.potential.domain


@dataclass(frozen=True)
class TiltMoments:
    """Moments of the tilted measure: exp(h*x) d(alpha)."""

    h: float
    log_z: float          # log of the unnormalised partition function
    mean: float
    central: np.ndarray   # central[p] = centred p-th moment; central[2] > 0

    @property
    def variance(self) -> float:
        return float(self.central[2])


@dataclass(frozen=True)
class GhsReport:
    """Result of the even/convex-derivative class check."""

    passed: bool
    is_even: bool
    derivative_convex: bool
    confining: bool
    first_violation: float | None
    detail: str

    def __bool__(self) -> bool:
        return self.passed


# -- quadrature grids ----------------------------------------------------------

def _composite_gauss_legendre(lo: float, hi: float, panels: int, order: int):
    base_x, base_w = leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = np.diff(edges) / 2.0
    mid = (edges[:-1] + edges[1:]) / 2.0
    nodes = (mid[:, None] + half[:, None] * base_x[None, :]).ravel()
    weights = (half[:, None] * base_w[None, :]).ravel()
    return nodes, weights


def _circle_grid(points: int):
    nodes = 2.0 * np.pi * np.arange(points) / points
    weights = np.full(points, 2.0 * np.pi / points)
    return nodes, weights


def _raw_moments(nodes, weights, log_density, h: float, max_power: int):
    """(log_z, mean, central moments) for the tilted density on a fixed grid."""
    g = h * nodes + log_density
    m = np.max(g)
    dens = weights * np.exp(g - m)
    z = np.sum(dens)
    log_z = m + np.log(z)
    p = dens / z
    mean = float(np.sum(p * nodes))
    d = nodes - mean
    central = np.empty(max_power + 1)
    central[0] = 1.0
    if max_power >= 1:
        central[1] = 0.0
    for k in range(2, max_power + 1):
        central[k] = float(np.sum(p * d**k))
    return log_z, mean, central


def _moment_distance(a, b) -> float:
    """Relative disagreement between two (log_z, mean, central) triples."""
    la, ma, ca = a
    lb, mb, cb = b
    scale = math.sqrt(max(ca[2], cb[2], 1e-300))
    err = abs(la - lb) / max(1.0, abs(la), abs(lb))
    err = max(err, abs(ma - mb) / scale)
    for k in range(2, len(ca)):
        err = max(err, abs(ca[k] - cb[k]) / max(abs(ca[k]), abs(cb[k]), scale**k))
    return err


def _circle_check_vector(nodes, weights, log_density) -> np.ndarray:
    """log_z plus low Fourier moments; the observables circle consumers query.

    Polynomial moments of the angle are not periodic functions, so they are
    useless for certifying a trapezoid grid; Fourier modes are.
    """
    m = np.max(log_density)
    dens = weights * np.exp(log_density - m)
    z = np.sum(dens)
    p = dens / z
    out = [m + np.log(z)]
    for k in (1, 2, 3):
        out.append(float(np.sum(p * np.cos(k * nodes))))
        out.append(float(np.sum(p * np.sin(k * nodes))))
    return np.array(out)


# -- domain selection -----------------------------------------------------------

def _find_bounds(spec: PotentialSpec, h_lo: float = 0.0, h_hi: float = 0.0):
    """Widen [lo, hi] until h*x - V(x) at both endpoints sits TAIL_GAP below
    the interior maximum for every tilt h in [h_lo, h_hi]."""
    probe = np.linspace(-4.0, 4.0, 1025)
    lo, hi = -4.0, 4.0
    for _ in range(_MAX_WIDENINGS):
        vals = spec.value(probe)
        peak = max(np.max(h_lo * probe - vals), np.max(h_hi * probe - vals))
        end_lo = max(h_lo * lo, h_hi * lo) - float(spec.value(lo))
        end_hi = max(h_lo * hi, h_hi * hi) - float(spec.value(hi))
        if end_lo <= peak - _TAIL_GAP and end_hi <= peak - _TAIL_GAP:
            return lo, hi
        grow_lo = end_lo > peak - _TAIL_GAP
        grow_hi = end_hi > peak - _TAIL_GAP
        new_lo = lo * 1.5 if grow_lo else lo
        new_hi = hi * 1.5 if grow_hi else hi
        # a potential that keeps decreasing outward can never be truncated
        if grow_lo and float(spec.value(new_lo)) < float(spec.value(lo)) - _TAIL_GAP:
            raise NonNormalizable("potential decreases towards -inf; exp(-V) not integrable")
        if grow_hi and float(spec.value(new_hi)) < float(spec.value(hi)) - _TAIL_GAP:
            raise NonNormalizable("potential decreases towards +inf; exp(-V) not integrable")
        lo, hi = new_lo, new_hi
        probe = np.linspace(lo, hi, 2049)
    raise NonNormalizable("domain widening did not terminate; exp(h*x - V) looks non-integrable")


# -- public operations ------------------------------------------------------------

def build_measure(spec: PotentialSpec, tol: float = 1e-10) -> LineMeasure:
    """Build a verified quadrature representation of exp(-V).

    Moment queries on the result are accurate to ``tol`` relative error,
    certified by grid doubling.  Raises NonNormalizable when exp(-V) is not
    integrable and GridFailure when refinement does not converge.
    """
    if not (0.0 < tol <= 1e-4):
        raise ValueError("tol must lie in (0, 1e-4]")

    if spec.domain == CIRCLE:
        points = 64
        prev = None
        for _ in range(_MAX_REFINEMENTS):
            nodes, weights = _circle_grid(points)
            log_density = -spec.value(nodes)
            cur = _circle_check_vector(nodes, weights, log_density)
            if prev is not None and float(np.max(np.abs(cur - prev))) < tol:
                return LineMeasure(spec, nodes, weights, log_density, (0.0, 2.0 * np.pi),
                                   tol, panels=points, panel_order=1)
            prev, points = cur, points * 2
        raise GridFailure("circle grid doubling did not converge")

    lo, hi = _find_bounds(spec)
    extrapolated = spec.uses_extrapolation(lo, hi)
    order = 16
    panels = max(8, int(math.ceil(hi - lo)))
    prev = None
    for _ in range(_MAX_REFINEMENTS):
        nodes, weights = _composite_gauss_legendre(lo, hi, panels, order)
        log_density = -spec.value(nodes)
        cur = _raw_moments(nodes, weights, log_density, 0.0, 4)
        if prev is not None and _moment_distance(prev, cur) < tol:
            return LineMeasure(spec, nodes, weights, log_density, (lo, hi),
                               tol, panels=panels, panel_order=order,
                               extrapolated=extrapolated)
        prev, panels = cur, panels * 2
    raise GridFailure("grid doubling did not converge within the refinement budget")


def _rebuild_for_tilts(measure: LineMeasure, h_lo: float, h_hi: float) -> LineMeasure:
    """Return a measure whose domain safely contains the tilted densities for
    every h in [h_lo, h_hi]; the input measure when it already does."""
    if measure.domain == CIRCLE:
        return measure
    lo, hi = measure.domain_bounds
    g_interior = np.maximum(h_lo * measure.nodes, h_hi * measure.nodes) + measure.log_density
    peak = float(np.max(g_interior))
    spec = measure.potential
    end_lo = max(h_lo * lo, h_hi * lo) - float(spec.value(lo))
    end_hi = max(h_lo * hi, h_hi * hi) - float(spec.value(hi))
    if end_lo <= peak - _TAIL_GAP and end_hi <= peak - _TAIL_GAP:
        return measure
    new_lo, new_hi = _find_bounds(spec, h_lo, h_hi)
    new_lo, new_hi = min(new_lo, lo), max(new_hi, hi)
    density = measure.panels / (hi - lo)
    panels = max(8, int(math.ceil(density * (new_hi - new_lo))))
    if panels > 2_000_000:
        raise GridFailure(
            f"tilt [{h_lo:.3g}, {h_hi:.3g}] needs {panels} panels; domain too wide to resolve")
    nodes, weights = _composite_gauss_legendre(new_lo, new_hi, panels, measure.panel_order)
    return replace(measure, nodes=nodes, weights=weights,
                   log_density=-spec.value(nodes), domain_bounds=(new_lo, new_hi),
                   panels=panels,
                   extrapolated=measure.extrapolated or spec.uses_extrapolation(new_lo, new_hi))


def tilt_moments(measure: LineMeasure, h: float, max_power: int = 4) -> TiltMoments:
    """Moments of exp(h*x) d(alpha), up to the measure's unnormalised constant.

    On the real line the domain is widened automatically when the tilt pushes
    mass towards the boundary; GridFailure is raised if widening fails.
    """
    h = float(h)
    work = _rebuild_for_tilts(measure, min(h, 0.0), max(h, 0.0))
    log_z, mean, central = _raw_moments(work.nodes, work.weights, work.log_density,
                                        h, max(2, max_power))
    if central[2] <= 0.0:
        raise GridFailure("tilted variance collapsed; grid cannot resolve the tilt")
    return TiltMoments(h=h, log_z=log_z, mean=mean, central=central[: max_power + 1]
                       if max_power >= 2 else central[:3])


def tilt_table(measure: LineMeasure, hs: np.ndarray):
    """Vectorised (log_z, mean, variance) for an array of tilts.

    Shares one widened grid across all tilts; used by the renormalised
    potential scan where hundreds of tilts are evaluated at once.
    """
    hs = np.asarray(hs, dtype=float)
    work = _rebuild_for_tilts(measure, float(np.min(hs, initial=0.0)),
                              float(np.max(hs, initial=0.0)))
    g = hs[:, None] * work.nodes[None, :] + work.log_density[None, :]
    m = np.max(g, axis=1, keepdims=True)
    dens = work.weights[None, :] * np.exp(g - m)
    z = np.sum(dens, axis=1)
    log_z = m[:, 0] + np.log(z)
    p = dens / z[:, None]
    mean = p @ work.nodes
    var = np.sum(p * (work.nodes[None, :] - mean[:, None]) ** 2, axis=1)
    return log_z, mean, var


def expectation(measure: LineMeasure, f: Callable[[np.ndarray], np.ndarray],
                h: float = 0.0) -> float:
    """Expectation of f under the (normalised) tilted measure."""
    work = _rebuild_for_tilts(measure, min(h, 0.0), max(h, 0.0))
    g = h * work.nodes + work.log_density
    dens = work.weights * np.exp(g - np.max(g))
    return float(np.sum(dens * f(work.nodes)) / np.sum(dens))


def check_ghs(spec: PotentialSpec, grid_points: int = 512) -> GhsReport:
    """Check membership in the even, convex-derivative potential class.

    Passes iff (a) V is even to 1e-10 on the test grid, (b) the finite
    difference second derivative is nondecreasing on [0, inf) within 1e-8
    relative tolerance, and (c) V is confining at the domain ends.  The
    report carries the first violating grid point otherwise.
    """
    if spec.domain != REAL_LINE:
        raise ValueError("class check applies to real-line potentials only")
    if grid_points < 64:
        raise ValueError("grid_points must be >= 64")

    lo, hi = _find_bounds(spec)
    half = max(abs(lo), abs(hi))
    xs = np.linspace(0.0, half, grid_points)

    even_gap = np.abs(spec.value(xs) - spec.value(-xs))
    is_even = bool(np.max(even_gap) < 1e-10 * max(1.0, float(np.max(np.abs(spec.value(xs))))))
    first_violation = None
    if not is_even:
        first_violation = float(xs[int(np.argmax(even_gap > 1e-10))])

    # finite-difference V'' on [0, half]; step fixed by the class definition.
    # The tolerance is 1e-8 relative plus the cancellation noise floor of the
    # second difference (without it, exact class members with large |V| fail).
    step = (hi - lo) / 2**14
    inner = xs[(xs >= step) & (xs <= half - step)]
    vpp = (spec.value(inner + step) - 2.0 * spec.value(inner) + spec.value(inner - step)) / step**2
    noise = 64.0 * np.finfo(float).eps * float(np.max(np.abs(spec.value(inner)))) / step**2
    tol = 1e-8 * max(1.0, float(np.max(np.abs(vpp)))) + noise
    running_max = np.maximum.accumulate(vpp)
    drops = vpp[1:] < running_max[:-1] - tol
    derivative_convex = not bool(np.any(drops))
    if not derivative_convex and first_violation is None:
        first_violation = float(inner[1:][int(np.argmax(drops))])

    v_all = spec.value(np.linspace(lo, hi, grid_points))
    confining = bool(float(spec.value(np.array([hi]))[0]) > float(np.min(v_all)) + 10.0
                     and float(spec.value(np.array([lo]))[0]) > float(np.min(v_all)) + 10.0)
    if not confining and first_violation is None:
        first_violation = float(hi)

    passed = is_even and derivative_convex and confining
    detail = "ok" if passed else (
        f"even={is_even} derivative_convex={derivative_convex} confining={confining}")
    return GhsReport(passed=passed, is_even=is_even, derivative_convex=derivative_convex,
                     confining=confining, first_violation=first_violation, detail=detail)
