"""Random graphs and the spectral deviation of their adjacency matrices.

The quantity of interest is epsilon = ||A - d P|| / d where P projects on the
constant vector: small epsilon means the top adjacency eigenvalue is isolated
and the graph behaves like the complete graph after rescaling by its degree.
The top singular value is computed by power iteration on the centred matvec
y = A x - d * mean(x) * 1 without ever materialising the dense matrix.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import InfeasibleDegree, NoConvergence, RestartBudgetExceeded

__all__ = [
    "GraphInstance",
    "SpectralReport",
    "gen_rrg",
    "gen_er",
    "spectral_report",
    "write_edge_list",
    "read_edge_list",
]

_RESTART_BUDGET = 10_000
_POWER_MAX_ITER = 100_000


@dataclass(frozen=True)
class GraphInstance:
    """A simple undirected graph with its generation metadata.

    d_eff is the exact degree for regular graphs and the target mean degree
    for Erdos-Renyi graphs (the deterministic normalisation, not the realised
    mean).
    """

    n: int
    edges: np.ndarray          # (m, 2) int array, i < j, no duplicates
    kind: str                  # "regular" | "erdos_renyi"
    d_eff: float
    seed: int

    def adjacency(self) -> sparse.csr_matrix:
        i, j = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([i, j])
        cols = np.concatenate([j, i])
        data = np.ones(len(rows))
        return sparse.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        np.add.at(deg, self.edges[:, 0], 1)
        np.add.at(deg, self.edges[:, 1], 1)
        return deg


@dataclass(frozen=True)
class SpectralReport:
    """Measured spectral deviation of the centred adjacency matrix."""

    epsilon: float
    top_singular: float
    iterations: int
    residual: float


def gen_rrg(n: int, d: int, seed: int) -> GraphInstance:
    """Uniform-ish d-regular simple graph via the stub-pairing model.

    Each round shuffles the unmatched stubs and keeps collision-free pairs;
    colliding stubs re-enter the pool.  A round that makes no progress
    triggers a full restart (never edge switching, which would bias the
    distribution); the restart budget bounds the attempt count.
    """
    if d >= n or d < 0:
        raise InfeasibleDegree(f"degree {d} impossible on {n} vertices")
    if (n * d) % 2 != 0:
        raise InfeasibleDegree("n*d must be even")
    rng = np.random.default_rng(np.random.SeedSequence([seed, n, d]))
    if d == 0:
        return GraphInstance(n=n, edges=np.empty((0, 2), dtype=int), kind="regular",
                             d_eff=0.0, seed=seed)

    for _ in range(_RESTART_BUDGET):
        stubs = np.repeat(np.arange(n), d)
        edges: set[tuple[int, int]] = set()
        ok = True
        while len(stubs):
            rng.shuffle(stubs)
            a, b = stubs[0::2], stubs[1::2]
            leftovers = []
            progressed = False
            for u, v in zip(a, b):
                if u == v:
                    leftovers += [u, v]
                    continue
                e = (u, v) if u < v else (v, u)
                if e in edges:
                    leftovers += [u, v]
                    continue
                edges.add(e)
                progressed = True
            if not progressed:
                ok = False
                break
            stubs = np.array(leftovers, dtype=int)
        if ok:
            arr = np.array(sorted(edges), dtype=int)
            return GraphInstance(n=n, edges=arr, kind="regular", d_eff=float(d), seed=seed)
    raise RestartBudgetExceeded(f"pairing model failed {_RESTART_BUDGET} restarts at n={n}, d={d}")


def gen_er(n: int, d_mean: float, seed: int) -> GraphInstance:
    """Erdos-Renyi graph: each pair present independently with d_mean/(n-1)."""
    if not (0 <= d_mean < n - 1 or (d_mean == 0)):
        raise ValueError("need 0 <= d_mean < n-1")
    p = d_mean / (n - 1) if n > 1 else 0.0
    rng = np.random.default_rng(np.random.SeedSequence([seed, n]))
    iu, ju = np.triu_indices(n, k=1)
    mask = rng.random(len(iu)) < p
    edges = np.column_stack([iu[mask], ju[mask]]).astype(int)
    return GraphInstance(n=n, edges=edges, kind="erdos_renyi", d_eff=float(d_mean), seed=seed)


def centered_matvec(g: GraphInstance, a: sparse.csr_matrix, x: np.ndarray) -> np.ndarray:
    """y = A x - d_eff * mean(x) * 1, the matvec of the centred matrix."""
    return a @ x - g.d_eff * float(np.mean(x)) * np.ones_like(x)


def spectral_report(g: GraphInstance) -> SpectralReport:
    """Top singular value of the centred adjacency matrix by power iteration.

    Iterates on the squared matrix (two centred matvecs per step) so that
    paired +/- extreme eigenvalues cannot stall the iteration; stops when the
    Rayleigh quotient is stable to 1e-10 relative and the eigen-residual is
    below 1e-8 of the singular value.
    """
    if g.d_eff <= 0:
        return SpectralReport(epsilon=0.0, top_singular=0.0, iterations=0, residual=0.0)
    a = g.adjacency()
    rng = np.random.default_rng(np.random.SeedSequence([g.seed, 0xB]))
    x = rng.standard_normal(g.n)
    x /= np.linalg.norm(x)
    rayleigh = 0.0
    for it in range(1, _POWER_MAX_ITER + 1):
        y = centered_matvec(g, a, centered_matvec(g, a, x))
        norm_y = float(np.linalg.norm(y))
        if norm_y == 0.0:
            return SpectralReport(epsilon=0.0, top_singular=0.0, iterations=it, residual=0.0)
        new_rayleigh = float(x @ y)
        y /= norm_y
        if it % 8 == 0 or abs(new_rayleigh - rayleigh) <= 1e-10 * abs(new_rayleigh):
            s_sq = max(new_rayleigh, 0.0)
            s = float(np.sqrt(s_sq))
            resid_vec = centered_matvec(g, a, centered_matvec(g, a, x)) - s_sq * x
            residual = float(np.linalg.norm(resid_vec)) / max(s, 1e-300)
            if (abs(new_rayleigh - rayleigh) <= 1e-10 * abs(new_rayleigh)
                    and residual < 1e-8 * s):
                return SpectralReport(epsilon=s / g.d_eff, top_singular=s,
                                      iterations=it, residual=residual)
        rayleigh = new_rayleigh
        x = y
    raise NoConvergence(f"power iteration did not converge in {_POWER_MAX_ITER} steps")


def write_edge_list(g: GraphInstance, path) -> None:
    """First line `n d_eff kind seed`, then one 0-indexed `i j` pair per line."""
    with open(path, "w") as fh:
        fh.write(f"{g.n} {g.d_eff:.17g} {g.kind} {g.seed}\n")
        for i, j in g.edges:
            fh.write(f"{i} {j}\n")


def read_edge_list(path) -> GraphInstance:
    with open(path) as fh:
        header = fh.readline().split()
        n, d_eff, kind, seed = int(header[0]), float(header[1]), header[2], int(header[3])
        edges = []
        for line in fh:
            if line.strip():
                i, j = line.split()
                edges.append((int(i), int(j)))
    arr = np.array(edges, dtype=int) if edges else np.empty((0, 2), dtype=int)
    return GraphInstance(n=n, edges=arr, kind=kind, d_eff=d_eff, seed=seed)
