"""Investor-initiator network statistics and budget distribution diagnostics.

Node numbering for graph routines: investors are ``0..N-1`` and initiator j is
node ``N + j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numpy.typing import ArrayLike, NDArray
from scipy.sparse.csgraph import shortest_path

DEFAULT_TAIL_FRACTION = 0.1
DEFAULT_BINS = 50

# BFS sources per shortest_path call; bounds the dense distance block in memory
_BFS_BATCH = 256
# rows per dense matmul block in the triangle count
_TRIANGLE_BLOCK = 1024


@dataclass
class BipartiteGraph:
    investor_count: int
    initiator_count: int
    investors: NDArray[np.intp]
    initiators: NDArray[np.intp]

    def __post_init__(self) -> None:
        self.investors = np.asarray(self.investors, dtype=np.intp)
        self.initiators = np.asarray(self.initiators, dtype=np.intp)
        if self.investors.shape != self.initiators.shape:
            raise ValueError("edge endpoint arrays differ in length")
        if self.investors.size:
            if self.investors.min() < 0 or self.investors.max() >= self.investor_count:
                raise ValueError("investor endpoint out of range")
            if self.initiators.min() < 0 or self.initiators.max() >= self.initiator_count:
                raise ValueError("initiator endpoint out of range")
        keys = self.investors * self.initiator_count + self.initiators
        if np.unique(keys).size != keys.size:
            raise ValueError("duplicate edges")

    @classmethod
    def from_edges(cls, investor_count: int, initiator_count: int, edges) -> BipartiteGraph:
        pairs = np.asarray(sorted(set(map(tuple, edges))), dtype=np.intp).reshape(-1, 2)
        return cls(investor_count, initiator_count, pairs[:, 0], pairs[:, 1])

    @property
    def node_count(self) -> int:
        return self.investor_count + self.initiator_count

    @property
    def edges(self) -> set[tuple[int, int]]:
        return set(zip(self.investors.tolist(), self.initiators.tolist()))

    def degrees(self) -> NDArray[np.int64]:
        inv = np.bincount(self.investors, minlength=self.investor_count)
        ini = np.bincount(self.initiators, minlength=self.initiator_count)
        return np.concatenate((inv, ini)).astype(np.int64)

    def incidence(self) -> sp.csr_matrix:
        """N x J 0/1 matrix with a one per edge."""
        data = np.ones(self.investors.size, dtype=np.float32)
        return sp.csr_matrix(
            (data, (self.investors, self.initiators)),
            shape=(self.investor_count, self.initiator_count),
        )

    def adjacency(self) -> sp.csr_matrix:
        """Symmetric (N+J) x (N+J) adjacency of the undirected graph."""
        n = self.node_count
        rows = np.concatenate((self.investors, self.investor_count + self.initiators))
        cols = np.concatenate((self.investor_count + self.initiators, self.investors))
        data = np.ones(rows.size, dtype=np.float32)
        return sp.csr_matrix((data, (rows, cols)), shape=(n, n))


@dataclass
class NetworkMetrics:
    links: int
    max_degree: int
    average_degree: float
    avg_path_length: float | None
    clustering: float
    clustering_projected: float
    l_rand: float | None
    C_rand: float


@dataclass
class TailFit:
    slope: float
    intercept: float
    tail_fraction: float
    points_used: int
    r_squared: float


@dataclass
class Histogram:
    edges: NDArray[np.float64]
    probabilities: NDArray[np.float64]


def build_graph(weights: NDArray[np.float64]) -> BipartiteGraph:
    """Link investor k and initiator j iff their decision weight is strictly positive."""
    w = np.asarray(weights)
    if not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite")
    k, j = np.nonzero(w > 0)
    return BipartiteGraph(w.shape[0], w.shape[1], k, j)


def count_links(graph: BipartiteGraph) -> int:
    return int(graph.investors.size)


def max_degree(graph: BipartiteGraph) -> int:
    deg = graph.degrees()
    return int(deg.max()) if deg.size else 0


def average_degree(graph: BipartiteGraph) -> float:
    return 2.0 * count_links(graph) / graph.node_count


def mean_shortest_path(adjacency) -> float | None:
    """Mean BFS distance over unordered node pairs that are connected.

    Unreachable pairs are left out of the mean. Returns None if no pair is
    connected.
    """
    adj = sp.csr_matrix(adjacency)
    deg = np.diff(adj.indptr)
    sources = np.flatnonzero(deg > 0)
    total = 0.0
    pairs = 0
    for start in range(0, sources.size, _BFS_BATCH):
        batch = sources[start : start + _BFS_BATCH]
        dist = shortest_path(adj, directed=False, unweighted=True, indices=batch)
        reach = np.isfinite(dist) & (dist > 0)
        total += float(dist[reach].sum())
        pairs += int(reach.sum())
    if pairs == 0:
        return None
    # every unordered pair was seen from both ends
    return total / pairs


def average_path_length(graph: BipartiteGraph) -> float | None:
    if count_links(graph) == 0:
        return None
    return mean_shortest_path(graph.adjacency())


def _triangles_dense(adj: NDArray) -> NDArray[np.float64]:
    a = np.asarray(adj, dtype=np.float32)
    n = a.shape[0]
    tri = np.empty(n, dtype=np.float64)
    for start in range(0, n, _TRIANGLE_BLOCK):
        blk = a[start : start + _TRIANGLE_BLOCK]
        # float32 sums of 0/1 products stay exact below 2**24 nodes
        tri[start : start + blk.shape[0]] = ((blk @ a) * blk).sum(axis=1, dtype=np.float64) / 2.0
    return tri


def _triangles_sparse(adj: sp.csr_matrix) -> NDArray[np.float64]:
    n = adj.shape[0]
    coo = sp.triu(adj, k=1).tocoo()
    tri = np.zeros(n, dtype=np.float64)
    if coo.nnz == 0:
        return tri
    # common neighbours of the endpoints of every edge
    common = np.asarray(adj[coo.row].multiply(adj[coo.col]).sum(axis=1)).ravel()
    # each triangle through v is seen from its two edges incident to v
    np.add.at(tri, coo.row, common)
    np.add.at(tri, coo.col, common)
    return tri / 2.0


def local_clustering(adjacency) -> NDArray[np.float64]:
    """Per-node clustering: triangles / (deg*(deg-1)/2), zero when deg < 2.

    Sparse input is counted edge by edge (cheap for sparse graphs such as the
    raw bipartite network); dense input uses blocked matrix products (suited
    to the clique-rich one-mode projection).
    """
    if sp.issparse(adjacency):
        adj = sp.csr_matrix(adjacency, dtype=np.float32)
        adj.setdiag(0)
        adj.eliminate_zeros()
        adj.data[:] = 1.0
        deg = np.diff(adj.indptr).astype(np.float64)
        tri = _triangles_sparse(adj)
    else:
        adj = np.array(adjacency, dtype=bool)
        np.fill_diagonal(adj, False)
        deg = adj.sum(axis=1).astype(np.float64)
        tri = _triangles_dense(adj)
    possible = deg * (deg - 1.0) / 2.0
    out = np.zeros_like(deg)
    mask = deg >= 2
    out[mask] = tri[mask] / possible[mask]
    return out


def average_clustering(adjacency) -> float:
    c = local_clustering(adjacency)
    return math.fsum(c) / c.size if c.size else 0.0


def clustering_coefficient(graph: BipartiteGraph) -> float:
    """Average clustering of the raw two-mode graph (always 0: no odd cycles)."""
    return average_clustering(graph.adjacency())


def project_onto_investors(graph: BipartiteGraph) -> NDArray[np.bool_]:
    """Dense one-mode adjacency: investors linked iff they share an initiator."""
    b = graph.incidence().toarray()
    n = graph.investor_count
    proj = np.empty((n, n), dtype=bool)
    for start in range(0, n, _TRIANGLE_BLOCK):
        proj[start : start + _TRIANGLE_BLOCK] = (b[start : start + _TRIANGLE_BLOCK] @ b.T) > 0
    np.fill_diagonal(proj, False)
    return proj


def clustering_projected(projection: NDArray[np.bool_]) -> float:
    return average_clustering(projection)


def random_baselines(node_count: int, avg_degree: float) -> tuple[float | None, float]:
    """Path length and clustering of a random graph with the same mean degree.

    ``l_rand = ln(n)/ln(<k>)`` is undefined (None) for ``<k> <= 1``.
    """
    if node_count < 1:
        raise ValueError(f"node_count must be >= 1, got {node_count}")
    c_rand = avg_degree / node_count
    l_rand = math.log(node_count) / math.log(avg_degree) if avg_degree > 1 else None
    return l_rand, c_rand


def network_metrics(graph: BipartiteGraph) -> NetworkMetrics:
    avg_k = average_degree(graph)
    l_rand, c_rand = random_baselines(graph.node_count, avg_k)
    return NetworkMetrics(
        links=count_links(graph),
        max_degree=max_degree(graph),
        average_degree=avg_k,
        avg_path_length=average_path_length(graph),
        clustering=clustering_coefficient(graph),
        clustering_projected=clustering_projected(project_onto_investors(graph)),
        l_rand=l_rand,
        C_rand=c_rand,
    )


def rank_size(values: ArrayLike) -> tuple[NDArray[np.int64], NDArray[np.float64]]:
    """Ranks 1..n and the values sorted descending; ties keep input order."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("rank_size needs at least one value")
    order = np.argsort(-v, kind="stable")
    return np.arange(1, v.size + 1, dtype=np.int64), v[order]


def powerlaw_tail_slope(values: ArrayLike, tail_fraction: float = DEFAULT_TAIL_FRACTION) -> TailFit:
    """Least-squares line through (log rank, log value) over the top of the ranking."""
    if not 0 < tail_fraction <= 1:
        raise ValueError(f"tail_fraction must lie in (0, 1], got {tail_fraction}")
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size and (np.any(v <= 0) or not np.all(np.isfinite(v))):
        raise ValueError("power-law fit needs positive finite values")
    used = math.ceil(tail_fraction * v.size)
    if used < 2:
        raise ValueError(f"need at least 2 tail points, have {used}")
    ranks, sizes = rank_size(v)
    x = np.log(ranks[:used].astype(np.float64))
    y = np.log(sizes[:used])
    xc = x - x.mean()
    yc = y - y.mean()
    slope = float((xc * yc).sum() / (xc * xc).sum())
    intercept = float(y.mean() - slope * x.mean())
    ss_tot = float((yc * yc).sum())
    ss_res = float(((y - (intercept + slope * x)) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return TailFit(slope, intercept, tail_fraction, used, r2)


def log_bins(values: ArrayLike, n_bins: int = DEFAULT_BINS) -> NDArray[np.float64]:
    """Log-spaced edges spanning the observed min/max of positive values."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0 or np.any(v <= 0):
        raise ValueError("log bins need nonempty positive values")
    lo, hi = float(v.min()), float(v.max())
    if hi <= lo:
        hi = lo * (1.0 + 1e-9)
    return np.geomspace(lo, hi, n_bins + 1)


def histogram(values: ArrayLike, edges: ArrayLike) -> Histogram:
    """Probability mass per bin; values outside the edges are not counted."""
    e = np.asarray(edges, dtype=np.float64)
    counts, _ = np.histogram(np.asarray(values, dtype=np.float64), bins=e)
    total = counts.sum()
    probs = counts / total if total else counts.astype(np.float64)
    return Histogram(edges=e, probabilities=probs)


def stationarity_distance(h1: Histogram, h2: Histogram) -> float:
    """L1 distance between two histograms on the same bins (range [0, 2])."""
    if h1.edges.shape != h2.edges.shape or not np.array_equal(h1.edges, h2.edges):
        raise ValueError("histograms use different bin edges")
    return float(np.abs(h1.probabilities - h2.probabilities).sum())


def consecutive_distances(budget_series: list[ArrayLike], n_bins: int = DEFAULT_BINS) -> list[float]:
    """L1 distance between each pair of consecutive budget samples.

    Each pair is binned on log-spaced edges spanning the pair's joint range.
    """
    out = []
    for prev, cur in zip(budget_series, budget_series[1:]):
        edges = log_bins(np.concatenate((np.ravel(prev), np.ravel(cur))), n_bins)
        out.append(stationarity_distance(histogram(prev, edges), histogram(cur, edges)))
    return out
