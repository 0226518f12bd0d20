"""Mode decomposition of periodic interactions and the multi-mode effective
potential.

An interaction kernel w on the circle splits into Fourier modes

    w(x - y) = sum_k c_k [cos(kx)cos(ky) + sin(kx)sin(ky)],

and the sign of each coefficient decides which side of the split it lands on:
alignment-favouring terms (c_k > 0, the ones that can drive a phase
transition) build the mode part, the rest build the flat-convex part.  Each
negative-part mode is a bounded function n_k with weight w_k; the collection
defines a weighted inner product

    (psi, psi')_H = alpha*phi*phi' + sum_k w_k psi_k psi'_k.

Internally all fields are stored in orthonormal coordinates zeta_k =
sqrt(w_k) psi_k, which turns weighted strong convexity into plain spectral
positivity of the Hessian.  Additive-constant convention: the limiting
effective potential is normalised so that it vanishes at psi = 0; all
consumers compare differences.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    FixedPointDiverged,
    GridExplosion,
    TooManyModes,
    TruncationTooCoarse,
    Unsupported,
)
from .quad1d import LineMeasure, PotentialSpec, build_measure

__all__ = [
    "Mode",
    "ModeDecomposition",
    "ModeField",
    "ScanResult",
    "XYReport",
    "fourier_decompose",
    "make_decomposition",
    "xy_decomposition",
    "u_limit",
    "bracket_value",
    "self_consistent_density",
    "v_renorm",
    "hessian_v_renorm",
    "strong_convexity_scan",
    "un_small_n",
    "xy_check",
]

_FIXED_POINT_TOL = 1e-10
_FIXED_POINT_MAX_ITER = 500
_TENSOR_BUDGET = 400_000_000


@dataclass(frozen=True)
class Mode:
    """One bounded mode function with its weight.

    kind "cos"/"sin" with frequency k are the serialisable Fourier modes
    ("cos" with k=0 is the constant mode); "custom" wraps arbitrary callables
    and cannot be serialised.
    """

    weight: float
    kind: str
    k: int = 0
    fn: Callable[[np.ndarray], np.ndarray] | None = None
    dfn: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "cos":
            return np.cos(self.k * np.asarray(x, dtype=float))
        if self.kind == "sin":
            return np.sin(self.k * np.asarray(x, dtype=float))
        return self.fn(np.asarray(x, dtype=float))

    def grad(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "cos":
            return -self.k * np.sin(self.k * x)
        if self.kind == "sin":
            return self.k * np.cos(self.k * x)
        if self.dfn is not None:
            return self.dfn(x)
        eps = 1e-6
        return (self.fn(x + eps) - self.fn(x - eps)) / (2.0 * eps)

    def sup_grad(self) -> float:
        if self.kind in ("cos", "sin"):
            return float(self.k)
        probe = np.linspace(-30.0, 30.0, 4001)
        return float(np.max(np.abs(self.grad(probe))))


@dataclass(frozen=True)
class ModeDecomposition:
    """Split of an interaction into a quadratic part, bounded modes, and a
    flat-convex remainder, with the sup/Lipschitz bounds that certify it."""

    alpha: float
    neg_modes: tuple[Mode, ...]
    pos_modes: tuple[Mode, ...]
    m_bound: float
    l_bound: float

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("quadratic coefficient must be nonnegative")
        for m in self.neg_modes + self.pos_modes:
            if m.weight < 0:
                raise ValueError("mode weights must be nonnegative")

    @property
    def dim(self) -> int:
        """Dimension of the field space in orthonormal coordinates."""
        return (1 if self.alpha > 0 else 0) + len(self.neg_modes)

    def weighted_modes(self, x: np.ndarray) -> np.ndarray:
        """Rows sqrt(w_k) n_k(x); first row sqrt(alpha)*x when alpha > 0."""
        x = np.asarray(x, dtype=float)
        rows = []
        if self.alpha > 0:
            rows.append(math.sqrt(self.alpha) * x)
        for m in self.neg_modes:
            rows.append(math.sqrt(m.weight) * m(x))
        return np.vstack(rows) if rows else np.empty((0, len(x)))

    def reconstruction(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Kernel value sum_neg w n(x)n(y) - sum_pos w p(x)p(y) (+ alpha x y)."""
        out = self.alpha * np.multiply.outer(x, y)
        for m in self.neg_modes:
            out += m.weight * np.multiply.outer(m(x), m(y))
        for m in self.pos_modes:
            out -= m.weight * np.multiply.outer(m(x), m(y))
        return out

    def to_json(self) -> str:
        def enc(modes):
            out = []
            for m in modes:
                if m.kind == "custom":
                    raise ValueError("custom modes are not serialisable")
                out.append({"w": m.weight, "kind": m.kind, "k": m.k})
            return out
        return json.dumps({"alpha": self.alpha, "neg": enc(self.neg_modes),
                           "pos": enc(self.pos_modes), "M": self.m_bound,
                           "L": self.l_bound}, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModeDecomposition":
        raw = json.loads(text)

        def dec(items):
            modes = []
            for it in items:
                if it["kind"] not in ("cos", "sin"):
                    raise ValueError(f"cannot deserialise mode kind {it['kind']!r}")
                modes.append(Mode(weight=float(it["w"]), kind=it["kind"], k=int(it["k"])))
            return tuple(modes)
        return cls(alpha=float(raw["alpha"]), neg_modes=dec(raw["neg"]),
                   pos_modes=dec(raw["pos"]), m_bound=float(raw["M"]),
                   l_bound=float(raw["L"]))


@dataclass(frozen=True)
class ModeField:
    """A point of the field space: the quadratic coordinate (when the
    decomposition has one) plus orthonormal mode coordinates zeta_k."""

    coords: np.ndarray
    quad_part: float | None = None

    @classmethod
    def from_vector(cls, vec: Sequence[float], decomp: ModeDecomposition) -> "ModeField":
        vec = np.asarray(vec, dtype=float)
        if len(vec) != decomp.dim:
            raise ValueError(f"field needs {decomp.dim} coordinates, got {len(vec)}")
        if decomp.alpha > 0:
            return cls(coords=vec[1:].copy(), quad_part=float(vec[0] / math.sqrt(decomp.alpha)))
        return cls(coords=vec.copy(), quad_part=None)

    def as_vector(self, decomp: ModeDecomposition) -> np.ndarray:
        if decomp.alpha > 0:
            if self.quad_part is None:
                raise ValueError("decomposition has a quadratic part; field must set it")
            return np.concatenate(([math.sqrt(decomp.alpha) * self.quad_part], self.coords))
        return np.asarray(self.coords, dtype=float)

    def norm_sq(self, decomp: ModeDecomposition) -> float:
        v = self.as_vector(decomp)
        return float(v @ v)


@dataclass(frozen=True)
class ScanResult:
    """Grid scan of the smallest Hessian eigenvalue."""

    lambda_hat: float
    argmin: np.ndarray
    grid_points: np.ndarray   # (n_points, dim)
    min_eigs: np.ndarray      # (n_points,)


@dataclass(frozen=True)
class XYReport:
    bound: float
    measured_min_eig: float
    convex: bool


# -- decomposition builders -----------------------------------------------------

def fourier_decompose(kernel, max_frequency: int, tol: float = 1e-10) -> ModeDecomposition:
    """Decompose an even periodic kernel into cosine/sine mode pairs.

    ``kernel`` is either a vectorised callable w(theta) or a sequence of
    cosine coefficients (entry j multiplies cos((j+1)*theta)).  Coefficients
    with alignment-favouring sign (c_k > 0) go to the mode part, the others
    to the flat-convex part with weight |c_k|.  The truncation residual
    (sup over a 2-D grid of |w(x-y) - reconstruction|) must stay below tol.
    """
    if max_frequency < 1:
        raise ValueError("max_frequency must be >= 1")
    if callable(kernel):
        samples = max(4096, 8 * max_frequency)
        theta = 2.0 * np.pi * np.arange(samples) / samples
        vals = np.asarray(kernel(theta), dtype=float)
        c0 = float(np.mean(vals))
        coeffs = [2.0 * float(np.mean(vals * np.cos(k * theta)))
                  for k in range(1, max_frequency + 1)]
        kernel_fn = kernel
    else:
        seq = [float(c) for c in kernel]
        c0 = 0.0
        coeffs = seq[:max_frequency] + [0.0] * max(0, max_frequency - len(seq))

        def kernel_fn(theta, _seq=tuple(seq)):
            out = np.zeros_like(np.asarray(theta, dtype=float))
            for j, c in enumerate(_seq, start=1):
                out += c * np.cos(j * theta)
            return out

    tiny = 1e-14 * max(1.0, max((abs(c) for c in coeffs + [c0]), default=1.0))
    neg, pos = [], []
    if abs(c0) > tiny:
        (neg if c0 > 0 else pos).append(Mode(weight=abs(c0), kind="cos", k=0))
    for k, c in enumerate(coeffs, start=1):
        if abs(c) <= tiny:
            continue
        side = neg if c > 0 else pos
        side.append(Mode(weight=abs(c), kind="cos", k=k))
        side.append(Mode(weight=abs(c), kind="sin", k=k))

    decomp = _finish_decomposition(0.0, tuple(neg), tuple(pos))
    grid = np.linspace(0.0, 2.0 * np.pi, 101, endpoint=False)
    target = np.asarray(kernel_fn(np.subtract.outer(grid, grid)), dtype=float)
    residual = float(np.max(np.abs(target - decomp.reconstruction(grid, grid))))
    if residual >= tol:
        raise TruncationTooCoarse(
            f"truncation at frequency {max_frequency} leaves residual {residual:.3e} >= {tol:.3e}")
    return decomp


def _finish_decomposition(alpha, neg, pos) -> ModeDecomposition:
    grid = np.linspace(0.0, 2.0 * np.pi, 101, endpoint=False)
    probe = np.linspace(-30.0, 30.0, 2001)
    for m in neg:
        sup = max(float(np.max(np.abs(m(grid)))), float(np.max(np.abs(m(probe)))))
        if sup > 1.0 + 1e-9:
            raise ValueError(f"mode functions must map into [-1, 1]; got sup {sup:.3g}")

    def part_sup(modes):
        if not modes:
            return 0.0
        acc = np.zeros((len(grid), len(grid)))
        for m in modes:
            acc += m.weight * np.multiply.outer(m(grid), m(grid))
        return float(np.max(np.abs(acc)))

    m_bound = math.sqrt(max(part_sup(neg), part_sup(pos)))
    l_sq = alpha + sum(m.weight * m.sup_grad() ** 2 for m in neg)
    return ModeDecomposition(alpha=float(alpha), neg_modes=neg, pos_modes=pos,
                             m_bound=m_bound, l_bound=math.sqrt(l_sq))


def make_decomposition(alpha: float = 0.0, neg: Sequence[Mode] = (),
                       pos: Sequence[Mode] = ()) -> ModeDecomposition:
    """Assemble a decomposition from explicit modes, computing its bounds."""
    return _finish_decomposition(alpha, tuple(neg), tuple(pos))


def xy_decomposition() -> ModeDecomposition:
    """The rotor-model interaction cos(x - y) as a cos/sin mode pair."""
    return fourier_decompose(np.cos, max_frequency=1, tol=1e-12)


# -- effective potential ----------------------------------------------------------

def _base_log_weights(measure: LineMeasure) -> np.ndarray:
    """log of normalised quadrature masses of the base measure."""
    g = measure.log_density + np.log(measure.weights)
    m = np.max(g)
    return g - (m + np.log(np.sum(np.exp(g - m))))


def bracket_value(dens: np.ndarray, psi: ModeField, T: float,
                  decomp: ModeDecomposition, measure: LineMeasure) -> float:
    """Constrained free-energy bracket at a density given w.r.t. the base
    measure: entropy + flat-convex interaction - field drive.  The
    self-consistent density minimises this over all densities."""
    zeta = psi.as_vector(decomp)
    a = np.exp(_base_log_weights(measure))
    nm = decomp.weighted_modes(measure.nodes)
    p = a * dens
    entropy = float(np.sum(p[dens > 0] * np.log(dens[dens > 0])))
    interaction = 0.0
    for m in decomp.pos_modes:
        interaction += m.weight * float(np.sum(p * m(measure.nodes))) ** 2
    interaction /= 2.0 * T
    drive = float(zeta @ (nm @ p)) / T if decomp.dim else 0.0
    return entropy + interaction - drive


def self_consistent_density(psi: ModeField, T: float, decomp: ModeDecomposition,
                            measure: LineMeasure) -> np.ndarray:
    """Density (w.r.t. the base measure) minimising the free-energy bracket,
    by damped fixed-point iteration on the Gibbs update: L1 tolerance 1e-10,
    at most 500 iterations, step 0.5 halved whenever the residual grows."""
    zeta = psi.as_vector(decomp)
    la = _base_log_weights(measure)
    nm = decomp.weighted_modes(measure.nodes)
    tilt = (zeta @ nm) / T if decomp.dim else np.zeros_like(la)
    a = np.exp(la)
    pos_vals = np.vstack([p(measure.nodes) for p in decomp.pos_modes])
    pos_w = np.array([p.weight for p in decomp.pos_modes])

    def gibbs(dens):
        means = pos_vals @ (a * dens)
        fld = (pos_w * means) @ pos_vals / T
        g = tilt - fld
        g -= np.max(g)
        new = np.exp(g)
        return new / float(np.sum(a * new))

    dens = np.exp(tilt - np.max(tilt))
    dens /= float(np.sum(a * dens))
    step_size = 0.5
    residual = math.inf
    for _ in range(_FIXED_POINT_MAX_ITER):
        new = gibbs(dens)
        new_residual = float(np.sum(a * np.abs(new - dens)))
        if new_residual < _FIXED_POINT_TOL:
            return new
        if new_residual > residual:
            step_size = max(step_size / 2.0, 1.0 / 64.0)
        residual = new_residual
        dens = (1.0 - step_size) * dens + step_size * new
        dens /= float(np.sum(a * dens))
    raise FixedPointDiverged(
        f"self-consistency iteration stalled at L1 residual {residual:.3e}")


def u_limit(psi: ModeField, T: float, decomp: ModeDecomposition,
            measure: LineMeasure) -> float:
    """Limiting non-quadratic part of the effective potential, normalised to 0
    at psi = 0.

    Without a flat-convex part this is the closed form
    -log integral exp((psi, n(x))_H / T) alpha(dx); with one it is the
    bracket value at the self-consistent density.
    """
    if T <= 0:
        raise ValueError("temperature must be positive")
    zeta = psi.as_vector(decomp)
    la = _base_log_weights(measure)
    nm = decomp.weighted_modes(measure.nodes)        # (dim, nodes)

    if not decomp.pos_modes:
        g = la + ((zeta @ nm) / T if decomp.dim else 0.0)
        m = np.max(g)
        return -(m + math.log(float(np.sum(np.exp(g - m)))))

    dens = self_consistent_density(psi, T, decomp, measure)
    return bracket_value(dens, psi, T, decomp, measure)


def v_renorm(psi: ModeField, T: float, decomp: ModeDecomposition,
             measure: LineMeasure) -> float:
    """Full effective potential: |psi|_H^2/(2T) plus the non-quadratic part."""
    return psi.norm_sq(decomp) / (2.0 * T) + u_limit(psi, T, decomp, measure)


def hessian_v_renorm(psi: ModeField, T: float, decomp: ModeDecomposition,
                     measure: LineMeasure) -> np.ndarray:
    """Hessian of the effective potential in orthonormal coordinates:

        (1/T) Id - (1/T^2) Cov[ sqrt(w_k) n_k(x) ]

    under the tilted single-particle measure.  Only available without a
    flat-convex part (Unsupported otherwise).
    """
    if decomp.pos_modes:
        raise Unsupported("Hessian closed form requires an empty flat-convex part")
    if decomp.dim == 0:
        raise ValueError("decomposition has no modes")
    zeta = psi.as_vector(decomp)
    nm = decomp.weighted_modes(measure.nodes)
    g = _base_log_weights(measure) + (zeta @ nm) / T
    g -= np.max(g)
    p = np.exp(g)
    p /= np.sum(p)
    mean = nm @ p
    centred = nm - mean[:, None]
    cov = (centred * p[None, :]) @ centred.T
    hess = np.eye(decomp.dim) / T - cov / T**2
    asym = float(np.max(np.abs(hess - hess.T)))
    if asym > 1e-12:
        raise AssertionError(f"Hessian asymmetry {asym:.3e}")
    return (hess + hess.T) / 2.0


def strong_convexity_scan(T: float, decomp: ModeDecomposition, measure: LineMeasure,
                          region: Sequence[tuple[float, float]],
                          grid: int) -> ScanResult:
    """Minimum Hessian eigenvalue over a box grid in orthonormal coordinates.

    The scan is exponential in the mode count; decompositions with more than
    three modes (plus the optional quadratic coordinate) are refused.
    """
    if decomp.dim == 0:
        raise ValueError("decomposition has no modes to scan")
    if len(decomp.neg_modes) > 3:
        raise TooManyModes("scan supports at most 3 modes plus the quadratic part")
    if len(region) != decomp.dim:
        raise ValueError(f"region must give {decomp.dim} axis bounds")
    axes = [np.linspace(lo, hi, grid) for lo, hi in region]
    best = math.inf
    best_at = None
    points = []
    eigs = []
    for combo in itertools.product(*axes):
        vec = np.array(combo)
        fld = ModeField.from_vector(vec, decomp)
        lam = float(np.linalg.eigvalsh(hessian_v_renorm(fld, T, decomp, measure))[0])
        points.append(vec)
        eigs.append(lam)
        if lam < best:
            best, best_at = lam, vec
    return ScanResult(lambda_hat=best, argmin=best_at,
                      grid_points=np.array(points), min_eigs=np.array(eigs))


@dataclass(frozen=True)
class SmallNResult:
    """Finite-N effective potential against the N-fold product measure."""

    n: int
    u_n: float
    u_limiting: float

    @property
    def gap(self) -> float:
        return self.u_n - self.u_limiting


def un_small_n(psi: ModeField, T: float, decomp: ModeDecomposition,
               measure: LineMeasure, n: int,
               budget: int = _TENSOR_BUDGET) -> SmallNResult:
    """Finite-N counterpart of the limiting potential by tensor quadrature:

        -(1/N) log E[ exp( (psi, S)_H/T - |S|_H^2/(2TN) - W+ sum/(2TN) ) ],

    with S = sum_i n(x_i) and the expectation over the N-fold product of the
    base measure.  Same additive-constant normalisation as ``u_limit``.
    """
    if not (1 <= n <= 4):
        raise ValueError("tensor quadrature supports 1 <= N <= 4")
    if len(decomp.pos_modes) > 1:
        raise Unsupported("at most one flat-convex mode is supported")
    m_pts = len(measure.nodes)
    if m_pts**n > budget:
        raise GridExplosion(f"{m_pts}^{n} tensor points exceed the budget {budget}")

    zeta = psi.as_vector(decomp)
    la = _base_log_weights(measure)
    nm = decomp.weighted_modes(measure.nodes)        # (dim, M)
    if decomp.pos_modes:
        p_mode = decomp.pos_modes[0]
        pos_row = math.sqrt(p_mode.weight) * p_mode(measure.nodes)
    else:
        pos_row = None

    # The exponent splits over head = first particle and tail = the other
    # n-1 particles up to the cross term: with S = head + tail,
    #   zeta.S/T - |S|^2/(2Tn) = [head part] + [tail part] - head.tail/(Tn).
    # Precomputing the tail part leaves two fused passes per head chunk.
    rows = [nm[k] for k in range(nm.shape[0])]
    if pos_row is not None:
        rows = rows + [pos_row]
    zeta_full = np.concatenate([zeta, [0.0]]) if pos_row is not None else zeta

    def part(values_rows, logw_row, axes):
        """Sum each row (and the log-weights) over a broadcast product of axes."""
        shape = tuple([m_pts] * axes)
        sums = [np.zeros(shape) for _ in values_rows]
        lw = np.zeros(shape)
        for j in range(axes):
            sl = [1] * axes
            sl[j] = m_pts
            for s, row in zip(sums, values_rows):
                s += row.reshape(sl)
            lw += logw_row.reshape(sl)
        return [s.ravel() for s in sums], lw.ravel()

    tail_sums, tail_lw = part(rows, la, n - 1) if n > 1 else \
        ([np.zeros(1) for _ in rows], np.zeros(1))
    scale = 1.0 / (2.0 * T * n)
    tail_part = tail_lw.copy()
    for zk, ts in zip(zeta_full, tail_sums):
        tail_part += (zk / T) * ts - scale * ts * ts

    chunk_logs = []
    for i0 in range(m_pts):
        g = tail_part + la[i0]
        head_bonus = 0.0
        for zk, ts, row in zip(zeta_full, tail_sums, rows):
            h = row[i0]
            head_bonus += (zk / T) * h - scale * h * h
            g = g - (2.0 * scale * h) * ts
        g += head_bonus
        m = float(np.max(g))
        chunk_logs.append(m + math.log(float(np.sum(np.exp(g - m)))))
    top = max(chunk_logs)
    total = top + math.log(sum(math.exp(c - top) for c in chunk_logs))
    u_n = -total / n
    return SmallNResult(n=n, u_n=u_n, u_limiting=u_limit(psi, T, decomp, measure))


_XY_MEASURE: LineMeasure | None = None


def _xy_measure() -> LineMeasure:
    global _XY_MEASURE
    if _XY_MEASURE is None:
        _XY_MEASURE = build_measure(PotentialSpec.periodic_fourier([]), 1e-10)
    return _XY_MEASURE


def xy_check(T: float, radius: float = 6.0, grid: int = 41) -> XYReport:
    """Convexity scan for the rotor model against its closed-form floor
    1/T - 1/(2 T^2); the scan must never fall below the floor."""
    if T <= 0:
        raise ValueError("temperature must be positive")
    decomp = xy_decomposition()
    scan = strong_convexity_scan(T, decomp, _xy_measure(),
                                 region=[(-radius, radius)] * 2, grid=grid)
    bound = 1.0 / T - 1.0 / (2.0 * T**2)
    if scan.lambda_hat < bound - 1e-6:
        raise AssertionError(
            f"scan minimum {scan.lambda_hat:.9f} fell below the closed-form floor {bound:.9f}")
    return XYReport(bound=bound, measured_min_eig=scan.lambda_hat,
                    convex=bool(scan.lambda_hat > 0.0))
