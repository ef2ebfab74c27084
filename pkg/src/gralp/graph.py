"""Graph representation, K-NN graph construction and Laplacians.

All matrices are stored dense. Arrays held by :class:`Graph` and
:class:`Laplacian` are marked read-only after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import InvalidParameterError

METRICS = ("euclidean", "cosine")
VARIANTS = ("unnormalized", "normalized")


def _frozen(a):
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph given by a symmetric weight matrix."""

    weights: np.ndarray
    degree: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InvalidParameterError(f"weight matrix must be square, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise InvalidParameterError("weight matrix has non-finite entries")
        if np.any(w < 0):
            raise InvalidParameterError("weight matrix has negative entries")
        if np.any(np.diag(w) != 0):
            raise InvalidParameterError("weight matrix must have a zero diagonal")
        if not np.array_equal(w, w.T):
            raise InvalidParameterError("weight matrix is not symmetric")
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "degree", _frozen(w.sum(axis=1)))

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def num_edges(self) -> int:
        return int(np.count_nonzero(np.triu(self.weights)))


@dataclass(frozen=True)
class Laplacian:
    matrix: np.ndarray
    variant: str = "unnormalized"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidParameterError(f"unknown Laplacian variant {self.variant!r}")
        object.__setattr__(self, "matrix", _frozen(self.matrix))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class FeatureSet:
    samples: np.ndarray
    metric: str = "euclidean"

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 1:
            raise InvalidParameterError(f"need an N x d sample matrix with N >= 2, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InvalidParameterError("feature matrix has non-finite entries")
        if self.metric not in METRICS:
            raise InvalidParameterError(f"unknown metric {self.metric!r}")
        object.__setattr__(self, "samples", _frozen(x))

    @property
    def n(self) -> int:
        return self.samples.shape[0]


def _cosine_similarity(x):
    norms = np.linalg.norm(x, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    xn = x / safe[:, None]
    sim = xn @ xn.T
    # zero vectors have no direction; treat them as orthogonal to everything
    sim[norms == 0, :] = 0.0
    sim[:, norms == 0] = 0.0
    return np.clip(sim, -1.0, 1.0)


def build_knn_graph(features: FeatureSet, k: int, sigma: float | None = None) -> Graph:
    """Connect every sample to its ``k`` nearest neighbours.

    The adjacency is symmetrized by union. Euclidean edges get the Gaussian
    weight ``exp(-d^2 / (2 sigma^2))``; cosine edges get
    ``max(0, cos(x_i, x_j))``, so orthogonal neighbours end up unconnected.
    Neighbour ties are broken by the lower sample index.
    """
    n = features.n
    k = int(k)
    if k < 1 or k >= n:
        raise InvalidParameterError(f"k must satisfy 1 <= k < N (k={k}, N={n})")
    x = features.samples
    if features.metric == "euclidean":
        if sigma is None or not sigma > 0:
            raise InvalidParameterError("a positive sigma is required for the euclidean metric")
        d2 = cdist(x, x, "sqeuclidean")
        order_key = d2
        kernel = np.exp(-d2 / (2.0 * sigma**2))
    else:
        kernel = _cosine_similarity(x)
        order_key = -kernel
        kernel = np.maximum(kernel, 0.0)

    key = order_key.copy()
    np.fill_diagonal(key, np.inf)
    nbrs = np.argsort(key, axis=1, kind="stable")[:, :k]
    adj = np.zeros((n, n), dtype=bool)
    adj[np.repeat(np.arange(n), k), nbrs.ravel()] = True
    adj |= adj.T
    w = np.where(adj, kernel, 0.0)
    # the kernel is symmetric up to rounding; copy the upper triangle to make it exact
    w = np.triu(w, 1)
    w = w + w.T
    return Graph(w)


def laplacian(g: Graph, variant: str = "unnormalized") -> Laplacian:
    """Graph Laplacian ``D - W`` or its symmetric normalization.

    In the normalized variant a node of zero degree gets an identity row.
    """
    if variant not in VARIANTS:
        raise InvalidParameterError(f"unknown Laplacian variant {variant!r}")
    w = g.weights
    deg = g.degree
    lap = np.diag(deg) - w
    if variant == "normalized":
        isolated = deg == 0
        inv_sqrt = np.where(isolated, 0.0, 1.0 / np.sqrt(np.where(isolated, 1.0, deg)))
        lap = inv_sqrt[:, None] * lap * inv_sqrt[None, :]
        lap[isolated, isolated] = 1.0
        lap = 0.5 * (lap + lap.T)
    return Laplacian(lap, variant)


def is_connected(g: Graph) -> bool:
    from scipy.sparse.csgraph import connected_components

    ncomp, _ = connected_components(g.weights > 0, directed=False)
    return ncomp == 1
