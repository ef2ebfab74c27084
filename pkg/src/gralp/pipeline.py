"""End-to-end helpers: from features or graphs to frames, dictionaries and a solve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import FeatureSet, Graph, Laplacian, build_knn_graph, laplacian
from .solver import AdaptationProblem, solve
from .spectral import SpectralDecomposition, decompose
from .wavelets import KernelSpec, WaveletFrame, build_matched_dictionary


@dataclass(frozen=True)
class Domain:
    graph: Graph
    lap: Laplacian
    sd: SpectralDecomposition
    frame: WaveletFrame

    @property
    def n(self) -> int:
        return self.graph.n


def prepare_domain(graph: Graph, kernel: KernelSpec = KernelSpec(), variant: str = "unnormalized") -> Domain:
    lap = laplacian(graph, variant)
    sd = decompose(lap)
    return Domain(graph, lap, sd, WaveletFrame(kernel, sd))


def domain_from_features(
    features: FeatureSet, k: int, sigma=None, kernel: KernelSpec = KernelSpec(), variant="unnormalized"
) -> Domain:
    return prepare_domain(build_knn_graph(features, k, sigma), kernel, variant)


def adapt(
    source: Domain,
    target: Domain,
    pairs,
    idx_s,
    labels_s,
    idx_t,
    labels_t,
    num_classes: int,
    mu: float = 1.0,
    gamma_s: float = 0.1,
    gamma_t: float = 0.1,
    ridge: bool = False,
):
    """Build the matched dictionary and solve one adaptation problem."""
    dictionary = build_matched_dictionary(source.frame, target.frame, pairs)
    problem = AdaptationProblem.from_class_labels(
        source.lap,
        target.lap,
        dictionary,
        np.asarray(idx_s, dtype=int),
        np.asarray(labels_s, dtype=int),
        np.asarray(idx_t, dtype=int),
        np.asarray(labels_t, dtype=int),
        num_classes,
        mu=mu,
        gamma_s=gamma_s,
        gamma_t=gamma_t,
    )
    return problem, solve(problem, ridge=ridge)
