"""Euler-Maruyama simulation of the interacting Langevin system with
magnetisation, susceptibility, and spectral-gap estimators.

The integrator is explicit:

    x <- x + dt * drift(x) + sqrt(2 dt) * g,   g ~ N(0, 1) per coordinate,

with the drift assembled from the confinement potential and the interaction
(complete graph, sparse graph, or circle mode interaction).  Replicas evolve
in lockstep as one (replicas, n) state array but consume independent
deterministic RNG streams, so a run is reproducible bit for bit from
(config, seed) and adding replicas never perturbs existing ones.
"""
from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    InsufficientSamples,
    NumericalBlowup,
    SingleWellOnly,
)
from .graphs import GraphInstance
from .modes import ModeDecomposition
from .quad1d import CIRCLE, PotentialSpec

__all__ = [
    "SimConfig",
    "EstimatorReport",
    "Susceptibility",
    "PlateauBound",
    "CovarianceCheckReport",
    "drift",
    "simulate",
    "susceptibility",
    "estimate",
    "symmetrize",
    "plateau_gap_bound",
    "covariance_bound_check",
    "covariance_ratio",
    "write_samples",
    "read_samples",
]

_BLOWUP_LIMIT = 1e6
_NOISE_BLOCK = 512
_MAGIC = b"MFLSAMP1"


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one Euler-Maruyama run."""

    n_particles: int
    temperature: float
    dt: float
    n_steps: int
    burn_in: int
    seed: int
    thinning: int = 10
    replicas: int = 1
    topology: GraphInstance | str = "complete"
    potential: PotentialSpec = field(default_factory=lambda: PotentialSpec.gaussian(1.0))
    modes: ModeDecomposition | None = None
    no_interaction: bool = False

    def __post_init__(self):
        if self.temperature <= 0 or self.dt <= 0:
            raise ValueError("temperature and dt must be positive")
        if not (0 <= self.burn_in < self.n_steps):
            raise ValueError("need 0 <= burn_in < n_steps")
        if self.thinning < 1 or self.replicas < 1 or self.n_particles < 1:
            raise ValueError("thinning, replicas, n_particles must be >= 1")
        if isinstance(self.topology, GraphInstance) and self.topology.n != self.n_particles:
            raise ValueError("graph size must match n_particles")
        if self.potential.domain == CIRCLE and self.modes is None and not self.no_interaction:
            raise ValueError("circle runs need a mode decomposition (or no_interaction)")
        stiffness = self._stiffness_estimate()
        if self.dt * stiffness >= 0.5:
            warnings.warn(
                f"dt*stiffness = {self.dt * stiffness:.3g} >= 0.5; "
                "the explicit scheme may be unstable", RuntimeWarning)

    def _stiffness_estimate(self) -> float:
        if self.potential.domain == CIRCLE:
            xs = np.linspace(0.0, 2.0 * np.pi, 257)
        else:
            xs = np.linspace(-4.0, 4.0, 257)
        dstep = xs[1] - xs[0]
        vpp = np.max(np.abs(np.diff(self.potential.derivative(xs)) / dstep))
        inter = 0.0 if self.no_interaction else 1.0 / self.temperature
        if self.modes is not None:
            inter = self.modes.l_bound**2 / self.temperature
        return float(vpp) + inter

    @property
    def n_kept(self) -> int:
        return int(np.ceil((self.n_steps - self.burn_in) / self.thinning))


@dataclass(frozen=True)
class Susceptibility:
    chi: float
    stderr: float
    samples_used: int
    degenerate: bool


@dataclass(frozen=True)
class PlateauBound:
    """Rayleigh-quotient upper bound on the spectral gap from the two-plateau
    test function of the empirical mean.  The quotient is invariant under the
    plateau height scale, so it is computed with unit plateaus regardless of
    the rate parameter."""

    bound: float
    stderr: float
    n_window: int
    n_plus: int
    n_minus: int
    flag: str | None = None


@dataclass(frozen=True)
class EstimatorReport:
    chi: float
    chi_stderr: float
    mean_magnetisation: float
    abs_magnetisation: float
    gap_upper_chi: float
    samples_used: int
    gap_upper_plateau: float | None = None


@dataclass(frozen=True)
class CovarianceCheckReport:
    n: int
    samples: int
    worst_ratio: float
    worst_ratio_stderr: float
    ratios: tuple[float, ...]
    stderrs: tuple[float, ...]


# -- drift / integrator -----------------------------------------------------------

def _adjacency_operator(g: GraphInstance):
    """Matvec-ready adjacency; dense below a size cutoff where sparse
    dispatch overhead dominates."""
    a = g.adjacency()
    return a.toarray() if g.n <= 512 else a


def _drift_impl(x: np.ndarray, config: SimConfig, adj) -> np.ndarray:
    out = -config.potential.derivative(x)
    if config.no_interaction:
        return out
    n = config.n_particles
    T = config.temperature
    if config.modes is not None:
        dec = config.modes
        for sign, group in ((1.0, dec.neg_modes), (-1.0, dec.pos_modes)):
            for m in group:
                total = np.sum(m(x), axis=-1, keepdims=True)
                out += sign * m.weight * m.grad(x) * total / (n * T)
        if dec.alpha > 0:
            out += dec.alpha * np.sum(x, axis=-1, keepdims=True) / (n * T)
        return out
    if adj is not None:
        neigh = (adj @ x.T).T if x.ndim == 2 else adj @ x
        return out + neigh / (T * config.topology.d_eff)
    return out + np.sum(x, axis=-1, keepdims=(x.ndim == 2)) / (n * T)


def drift(state: np.ndarray, config: SimConfig) -> np.ndarray:
    """Drift field of the system; accepts (n,) or (replicas, n) states."""
    x = np.asarray(state, dtype=float)
    adj = _adjacency_operator(config.topology) \
        if isinstance(config.topology, GraphInstance) else None
    return _drift_impl(x, config, adj)


def _initial_state(config: SimConfig, gens) -> np.ndarray:
    shape = (config.replicas, config.n_particles)
    if config.potential.domain == CIRCLE:
        return np.stack([g.uniform(0.0, 2.0 * np.pi, config.n_particles) for g in gens])
    return np.zeros(shape)


def simulate(config: SimConfig) -> np.ndarray:
    """Run the scheme and return thinned post-burn-in states with shape
    (replicas, n_kept, n_particles).  Raises NumericalBlowup if any
    coordinate exceeds 1e6 on the real line."""
    ss = np.random.SeedSequence(config.seed)
    gens = [np.random.default_rng(c) for c in ss.spawn(config.replicas)]
    x = _initial_state(config, gens)
    kept = np.empty((config.replicas, config.n_kept, config.n_particles))
    scale = np.sqrt(2.0 * config.dt)
    circle = config.potential.domain == CIRCLE
    adj = _adjacency_operator(config.topology) \
        if isinstance(config.topology, GraphInstance) else None

    k = 0
    noise = None
    with np.errstate(over="ignore", invalid="ignore"):  # divergence caught below
        for step in range(config.n_steps):
            j = step % _NOISE_BLOCK
            if j == 0:
                block = min(_NOISE_BLOCK, config.n_steps - step)
                noise = np.stack([g.standard_normal((block, config.n_particles))
                                  for g in gens])
                if not circle and not np.all(np.abs(x) <= _BLOWUP_LIMIT):
                    raise NumericalBlowup(f"|x| exceeded {_BLOWUP_LIMIT:g} at step {step}")
            x = x + config.dt * _drift_impl(x, config, adj) + scale * noise[:, j, :]
            if circle:
                x %= 2.0 * np.pi
            if step >= config.burn_in and (step - config.burn_in) % config.thinning == 0:
                kept[:, k, :] = x
                k += 1
    if not circle and not np.all(np.abs(kept) <= _BLOWUP_LIMIT):
        raise NumericalBlowup("trajectory left the admissible region")
    return kept


# -- estimators ---------------------------------------------------------------------

def _as_replica_array(samples: np.ndarray) -> np.ndarray:
    s = np.asarray(samples, dtype=float)
    if s.ndim == 2:
        s = s[None, :, :]
    if s.ndim != 3:
        raise ValueError("samples must have shape (n_kept, n) or (replicas, n_kept, n)")
    return s


def _batch_stderr(values: np.ndarray, batches: int = 20) -> float:
    """Batch-means standard error over the time axis of (replicas, n_kept)."""
    r, n = values.shape
    size = n // batches
    trimmed = values[:, : size * batches].reshape(r, batches, size)
    means = trimmed.mean(axis=2).ravel()
    return float(np.std(means, ddof=1) / np.sqrt(len(means)))


def susceptibility(samples: np.ndarray, subtract_mean: bool = False) -> Susceptibility:
    """Empirical mean of (sum_i x_i / sqrt(n))^2 with batch-means stderr.

    The default keeps the raw second moment (the correct form for even
    potentials); ``subtract_mean`` switches to the centred variant for
    broken-symmetry runs.
    """
    s = _as_replica_array(samples)
    if s.shape[1] < 100:
        raise InsufficientSamples("need at least 100 thinned samples")
    m = s.sum(axis=2) / np.sqrt(s.shape[2])
    if subtract_mean:
        m = m - m.mean()
    sq = m**2
    chi = float(sq.mean())
    return Susceptibility(chi=chi, stderr=_batch_stderr(sq),
                          samples_used=s.shape[0] * s.shape[1],
                          degenerate=bool(chi < 1e-300))


def estimate(samples: np.ndarray, subtract_mean: bool = False,
             plateau: PlateauBound | None = None) -> EstimatorReport:
    """Assemble the standard estimator report from a sample array."""
    s = _as_replica_array(samples)
    sus = susceptibility(s, subtract_mean=subtract_mean)
    mbar = s.mean(axis=2)
    return EstimatorReport(
        chi=sus.chi, chi_stderr=sus.stderr,
        mean_magnetisation=float(mbar.mean()),
        abs_magnetisation=float(np.abs(mbar.mean(axis=1)).mean()),
        gap_upper_chi=1.0 / sus.chi if not sus.degenerate else np.inf,
        samples_used=sus.samples_used,
        gap_upper_plateau=plateau.bound if plateau is not None else None)


def symmetrize(samples: np.ndarray) -> np.ndarray:
    """Pool samples with their global sign flip (exact symmetry for even V).

    Below the critical temperature single trajectories do not cross wells at
    feasible run lengths; pooling each replica with its mirror image makes the
    two-plateau variance estimable without metastable crossing times.
    """
    s = _as_replica_array(samples)
    return np.concatenate([s, -s], axis=0)


def plateau_gap_bound(samples: np.ndarray, m_plus: float, delta: float,
                      r: float = 0.0) -> PlateauBound:
    """Rayleigh-quotient gap bound from the two-plateau test function.

    The test function depends on the empirical mean u: constant on
    u >= m_plus - delta and u <= -(m_plus - delta), linear between; its
    squared gradient is (slope^2 / n) inside the linear window and zero on
    the plateaus.  Samples must visit both plateaus (SingleWellOnly
    otherwise); an empty window with both plateaus visited reports bound 0
    with a flag rather than failing.
    """
    if m_plus <= 0 or delta <= 0 or r < 0:
        raise ValueError("need m_plus > 0, delta > 0, r >= 0")
    if 3.0 * delta > 2.0 * m_plus + 1e-12:
        raise ValueError("well separation requires 3*delta <= 2*m_plus")
    s = _as_replica_array(samples)
    n = s.shape[2]
    mbar = s.mean(axis=2)
    edge = m_plus - delta

    window = np.abs(mbar) < edge
    n_plus = int(np.sum(mbar >= edge))
    n_minus = int(np.sum(mbar <= -edge))
    n_window = int(np.sum(window))
    if n_plus == 0 or n_minus == 0:
        raise SingleWellOnly(
            f"samples visit plateaus (+:{n_plus}, -:{n_minus}); variance under-resolved")

    f = np.clip(mbar / edge, -1.0, 1.0)
    grad_sq = np.where(window, 1.0 / (edge**2 * n), 0.0)
    den = float(np.mean(f**2) - np.mean(f) ** 2)
    if n_window == 0:
        return PlateauBound(bound=0.0, stderr=0.0, n_window=0, n_plus=n_plus,
                            n_minus=n_minus, flag="no_window_visits")
    num = float(np.mean(grad_sq))
    stderr = _batch_stderr(grad_sq) / den
    return PlateauBound(bound=num / den, stderr=stderr, n_window=n_window,
                        n_plus=n_plus, n_minus=n_minus)


# -- covariance inequality check -----------------------------------------------------

def covariance_ratio(f_pair, h_pair, n: int, rng: np.random.Generator,
                     n_samples: int, batches: int = 20):
    """Empirical check of cov(F^2, H)^2 <= 4 sup|grad H|^2 E[F^2] E[|grad F|^2]
    under the standard Gaussian product measure (log-Sobolev constant 1).

    f_pair = (F, grad_F) vectorised callables, h_pair = (H, sup_grad_sq).
    Returns (ratio, stderr) where ratio is the left side over the right side.
    """
    f_fn, grad_f_fn = f_pair
    h_fn, sup_grad_sq = h_pair
    per = n_samples // batches
    stats = np.zeros((batches, 4))  # E[F^2], E[|grad F|^2], E[F^2 H], E[H]
    for b in range(batches):
        x = rng.standard_normal((per, n))
        f2 = f_fn(x) ** 2
        g2 = np.sum(grad_f_fn(x) ** 2, axis=1)
        h = h_fn(x)
        stats[b] = [f2.mean(), g2.mean(), (f2 * h).mean(), h.mean()]

    def ratio_of(row):
        ef2, eg2, ef2h, eh = row
        cov = ef2h - ef2 * eh
        rhs = 4.0 * sup_grad_sq * ef2 * eg2
        return cov**2 / rhs if rhs > 0 else 0.0

    pooled = ratio_of(stats.mean(axis=0))
    per_batch = np.array([ratio_of(row) for row in stats])
    return pooled, float(np.std(per_batch, ddof=1) / np.sqrt(batches))


def _window_poly_pair(n: int, rng: np.random.Generator):
    """Random smooth compactly-supported surrogate: a low-degree polynomial in
    the first coordinates under a Gaussian window, with its exact gradient."""
    k = min(n, 3)
    c0 = rng.uniform(-1.0, 1.0)
    lin = rng.uniform(-1.0, 1.0, k)
    quad = rng.uniform(-0.5, 0.5, k)
    s2 = rng.uniform(1.5, 3.0) ** 2

    def f(x):
        q = c0 + x[:, :k] @ lin + (x[:, :k] ** 2) @ quad
        return q * np.exp(-np.sum(x**2, axis=1) / (2.0 * s2))

    def grad_f(x):
        w = np.exp(-np.sum(x**2, axis=1) / (2.0 * s2))
        q = c0 + x[:, :k] @ lin + (x[:, :k] ** 2) @ quad
        g = -x * (q / s2)[:, None]
        g[:, :k] += lin + 2.0 * quad * x[:, :k]
        return g * w[:, None]

    return f, grad_f


def _lipschitz_pair(n: int, rng: np.random.Generator, clipped: bool):
    if clipped:
        a = rng.uniform(-1.0, 1.0, n)
        c = rng.uniform(0.5, 2.0, n)
        return (lambda x: np.clip(x, -c, c) @ a), float(np.sum(a**2))
    return (lambda x: np.sum(x, axis=1)), float(n)


def covariance_bound_check(n: int, seed: int, n_samples: int = 1_000_000,
                           n_pairs: int = 10) -> CovarianceCheckReport:
    """Monte-Carlo check of the covariance inequality on the Gaussian product
    measure for a family of random windowed polynomials F and Lipschitz H."""
    if n > 20:
        raise ValueError("check supports n <= 20")
    rng = np.random.default_rng(np.random.SeedSequence([seed, n]))
    ratios, stderrs = [], []
    for i in range(n_pairs):
        f_pair = _window_poly_pair(n, rng)
        h_pair = _lipschitz_pair(n, rng, clipped=bool(i % 2))
        ratio, se = covariance_ratio(f_pair, h_pair, n, rng, n_samples)
        ratios.append(ratio)
        stderrs.append(se)
    worst = int(np.argmax(ratios))
    return CovarianceCheckReport(n=n, samples=n_samples,
                                 worst_ratio=ratios[worst],
                                 worst_ratio_stderr=stderrs[worst],
                                 ratios=tuple(ratios), stderrs=tuple(stderrs))


# -- sample I/O -----------------------------------------------------------------------

_HEADER = struct.Struct("<8sQddQQQ")


def write_samples(samples: np.ndarray, path, *, temperature: float, dt: float,
                  seed: int) -> None:
    """Binary frames: a fixed header (n, T, dt, seed, replicas, frames) then
    little-endian float64 states, frame-major per replica."""
    s = _as_replica_array(samples)
    r, frames, n = s.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, n, float(temperature), float(dt), seed, r, frames))
        fh.write(np.ascontiguousarray(s, dtype="<f8").tobytes())


def read_samples(path):
    """Inverse of write_samples; returns (samples, meta dict)."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        magic, n, temperature, dt, seed, r, frames = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise ValueError(f"{path} is not a sample file")
        data = np.frombuffer(fh.read(), dtype="<f8").reshape(r, frames, n)
    return data.copy(), {"n": n, "temperature": temperature, "dt": dt,
                         "seed": seed, "replicas": r, "frames": frames}


def write_samples_csv(samples: np.ndarray, path) -> None:
    """CSV form `step,x_0,...` for small single-replica runs (n <= 64)."""
    s = _as_replica_array(samples)
    if s.shape[0] != 1:
        raise ValueError("CSV output is limited to single-replica runs")
    if s.shape[2] > 64:
        raise ValueError("CSV output is limited to n <= 64")
    with open(path, "w") as fh:
        fh.write("step," + ",".join(f"x_{i}" for i in range(s.shape[2])) + "\n")
        for t in range(s.shape[1]):
            fh.write(str(t) + "," + ",".join(f"{v:.17g}" for v in s[0, t]) + "\n")
