"""Sweep protocols, error metrics and the coefficient dissimilarity diagnostic.

Protocols
---------
Every protocol draws a set of matched pairs from a candidate pool, a set of
labeled source nodes and a set of labeled target nodes, solves, and scores
the target nodes that received no label.

=============================  ============================================
target-sweep                   matches unlabeled, all other source nodes
                               labeled, swept fraction of the non-matched
                               target nodes labeled
source-sweep                   matches unlabeled, no target labels, swept
                               fraction of non-matched source nodes labeled
unlabeled-match-sweep          90% source labels, no target labels, swept
                               match ratio
partially-labeled-match-sweep  90% source labels, 25% of matches labeled in
                               both domains, swept match ratio
labeled-match-sweep            90% source labels, every match labeled in
                               both domains, swept match ratio
=============================  ============================================

The match ratio is the number of matches over ``min(N_s, N_t)``; the two
non-swept protocols use 10%.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidParameterError, SingularSystemError, UndefinedMeasureError
from .pipeline import Domain, adapt
from .wavelets import KernelSpec, MatchedDictionary, WaveletFrame

PROTOCOLS = (
    "target-sweep",
    "source-sweep",
    "unlabeled-match-sweep",
    "partially-labeled-match-sweep",
    "labeled-match-sweep",
)
SCORES = ("misclassification", "balanced")

_DEFAULT_FIXED = {
    "target-sweep": {"match_ratio": 0.1, "source_ratio": 1.0, "match_label_ratio": 0.0},
    "source-sweep": {"match_ratio": 0.1, "target_ratio": 0.0, "match_label_ratio": 0.0},
    "unlabeled-match-sweep": {"source_ratio": 0.9, "target_ratio": 0.0, "match_label_ratio": 0.0},
    "partially-labeled-match-sweep": {"source_ratio": 0.9, "target_ratio": 0.0, "match_label_ratio": 0.25},
    "labeled-match-sweep": {"source_ratio": 0.9, "target_ratio": 0.0, "match_label_ratio": 1.0},
}
_SWEPT = {
    "target-sweep": "target_ratio",
    "source-sweep": "source_ratio",
    "unlabeled-match-sweep": "match_ratio",
    "partially-labeled-match-sweep": "match_ratio",
    "labeled-match-sweep": "match_ratio",
}

DEFAULT_RATIOS = {
    "target-sweep": (0.0, 0.05, 0.1, 0.2, 0.4),
    "source-sweep": (0.1, 0.3, 0.5, 0.7, 0.9),
    "unlabeled-match-sweep": (0.02, 0.05, 0.1, 0.15, 0.2),
    "partially-labeled-match-sweep": (0.02, 0.05, 0.1, 0.15, 0.2),
    "labeled-match-sweep": (0.02, 0.05, 0.1, 0.15, 0.2),
}


def misclassification_rate(predicted, truth, mask=None) -> float:
    predicted, truth = np.asarray(predicted), np.asarray(truth)
    sel = _mask_indices(mask, truth.size)
    return float(np.mean(predicted[sel] != truth[sel]))


def balanced_error(predicted, truth, mask=None) -> float:
    """Mean of the per-class error rates over the classes present in ``mask``."""
    predicted, truth = np.asarray(predicted), np.asarray(truth)
    sel = _mask_indices(mask, truth.size)
    p, t = predicted[sel], truth[sel]
    rates = [np.mean(p[t == c] != c) for c in np.unique(t)]
    return float(np.mean(rates))


def _mask_indices(mask, n):
    if mask is None:
        sel = np.arange(n)
    else:
        mask = np.asarray(mask)
        sel = np.flatnonzero(mask) if mask.dtype == bool else mask.astype(int)
    if sel.size == 0:
        raise InvalidParameterError("evaluation mask is empty")
    return sel


def projection_coefficients(dictionary: MatchedDictionary, f_s, f_t):
    """Dictionary coefficients ``Psi^T f`` of both label functions."""
    f_s = np.asarray(getattr(f_s, "values", f_s), dtype=float)
    f_t = np.asarray(getattr(f_t, "values", f_t), dtype=float)
    if f_s.ndim == 1:
        f_s, f_t = f_s[:, None], f_t[:, None]
    return dictionary.psi_s.T @ f_s, dictionary.psi_t.T @ f_t


def coefficient_dissimilarity(dictionary: MatchedDictionary, f_s, f_t) -> float:
    """``sum (c_s - c_t)^2 / sum c_s^2`` over all coefficients of all classes."""
    cs, ct = projection_coefficients(dictionary, f_s, f_t)
    denom = float((cs**2).sum())
    if denom == 0:
        raise UndefinedMeasureError("source coefficients are all zero; dissimilarity is undefined")
    return float(((cs - ct) ** 2).sum()) / denom


@dataclass(frozen=True)
class SweepSpec:
    protocol: str = "source-sweep"
    swept_ratios: tuple = ()
    fixed_ratios: dict = field(default_factory=dict)
    repetitions: int = 20
    seed: int = 0
    fixed_matches: bool = False
    score: str = "misclassification"

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise InvalidParameterError(f"unknown protocol {self.protocol!r}; choose from {PROTOCOLS}")
        if self.score not in SCORES:
            raise InvalidParameterError(f"unknown score {self.score!r}")
        ratios = tuple(float(r) for r in (self.swept_ratios or DEFAULT_RATIOS[self.protocol]))
        fixed = dict(_DEFAULT_FIXED[self.protocol])
        for k, v in dict(self.fixed_ratios).items():
            if k not in ("match_ratio", "source_ratio", "target_ratio", "match_label_ratio"):
                raise InvalidParameterError(f"unknown fixed ratio {k!r}")
            if k == _SWEPT[self.protocol]:
                raise InvalidParameterError(f"{k} is the swept quantity of {self.protocol}")
            fixed[k] = float(v)
        for r in (*ratios, *fixed.values()):
            if not 0.0 <= r <= 1.0:
                raise InvalidParameterError(f"ratio {r} outside [0, 1]")
        if int(self.repetitions) < 1:
            raise InvalidParameterError("repetitions must be >= 1")
        if int(self.seed) < 0:
            raise InvalidParameterError("seed must be non-negative")
        object.__setattr__(self, "swept_ratios", ratios)
        object.__setattr__(self, "fixed_ratios", fixed)

    def ratios_at(self, swept: float) -> dict:
        out = dict(self.fixed_ratios)
        out[_SWEPT[self.protocol]] = swept
        return out


@dataclass(frozen=True)
class SweepData:
    """Everything a sweep needs besides the protocol."""

    source: Domain
    target: Domain
    labels_s: np.ndarray
    labels_t: np.ndarray
    candidates: np.ndarray
    num_classes: int
    mu: float = 1.0
    gamma_s: float = 0.1
    gamma_t: float = 0.1
    ridge: bool = False

    def with_kernel(self, kernel: KernelSpec) -> "SweepData":
        src = replace(self.source, frame=WaveletFrame(kernel, self.source.sd))
        tgt = replace(self.target, frame=WaveletFrame(kernel, self.target.sd))
        return replace(self, source=src, target=tgt)


@dataclass(frozen=True)
class CellResult:
    error: float
    feasible: bool
    reason: str
    pairs: tuple
    labeled_s: np.ndarray
    labeled_t: np.ndarray
    evaluated: np.ndarray
    predicted: np.ndarray | None = None
    scores: np.ndarray | None = None


@dataclass(frozen=True)
class SweepRow:
    ratio: float
    mean_error: float
    std_error: float
    n_repetitions: int
    infeasible: int


def cell_seed(base_seed: int, protocol: str, ratio_index: int, repetition: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(base_seed), PROTOCOLS.index(protocol), int(ratio_index), int(repetition)])


def _count(ratio, n):
    return int(math.floor(ratio * n + 0.5))


def run_cell(
    data: SweepData, ratios: dict, rng, match_order=None, score="misclassification", singular="raise"
) -> CellResult:
    """Sample one labeled/matched configuration, solve it and score it.

    ``match_order`` fixes the order in which candidate matches are taken;
    without it the matches are resampled from ``rng``. A singular system is
    re-raised unless ``singular="infeasible"``.
    """
    n_s, n_t = data.source.n, data.target.n
    cand = np.asarray(data.candidates, dtype=int).reshape(-1, 2)
    q = _count(ratios["match_ratio"], min(n_s, n_t))
    empty = np.array([], dtype=int)

    def infeasible(reason, pairs=(), ls=empty, lt=empty):
        return CellResult(math.nan, False, reason, tuple(pairs), ls, lt, empty)

    if q > len(cand):
        return infeasible(f"{q} matches requested, {len(cand)} candidates available")
    order = match_order if match_order is not None else rng.permutation(len(cand))
    pairs = [tuple(int(v) for v in cand[i]) for i in order[:q]]
    matched_s = np.array([m for m, _ in pairs], dtype=int)
    matched_t = np.array([n for _, n in pairs], dtype=int)

    n_lab_match = _count(ratios["match_label_ratio"], q)
    lab_pairs = rng.permutation(q)[:n_lab_match] if q else empty
    rest_s = np.setdiff1d(np.arange(n_s), matched_s)
    rest_t = np.setdiff1d(np.arange(n_t), matched_t)
    ls = rng.permutation(rest_s)[: _count(ratios["source_ratio"], rest_s.size)]
    lt = rng.permutation(rest_t)[: _count(ratios["target_ratio"], rest_t.size)]
    ls = np.sort(np.concatenate([ls, matched_s[lab_pairs]]).astype(int))
    lt = np.sort(np.concatenate([lt, matched_t[lab_pairs]]).astype(int))

    if q == 0:
        return infeasible("no matched pairs", pairs, ls, lt)
    if ls.size == 0 and lt.size == 0:
        return infeasible("no labels in either domain", pairs, ls, lt)
    evaluated = np.setdiff1d(np.arange(n_t), lt)
    if evaluated.size == 0:
        return infeasible("no unlabeled target nodes to score", pairs, ls, lt)
    try:
        _, sol = adapt(
            data.source,
            data.target,
            pairs,
            ls,
            data.labels_s[ls],
            lt,
            data.labels_t[lt],
            data.num_classes,
            mu=data.mu,
            gamma_s=data.gamma_s,
            gamma_t=data.gamma_t,
            ridge=data.ridge,
        )
    except SingularSystemError as exc:
        if singular != "infeasible":
            raise
        return infeasible(str(exc), pairs, ls, lt)
    pred = sol.f_t.decoded
    metric = balanced_error if score == "balanced" else misclassification_rate
    err = metric(pred, data.labels_t, evaluated)
    return CellResult(err, True, "", tuple(pairs), ls, lt, evaluated, pred, sol.f_t.values)


def _fixed_match_order(spec, n_candidates):
    if not spec.fixed_matches:
        return None
    rng = np.random.default_rng(np.random.SeedSequence([int(spec.seed), PROTOCOLS.index(spec.protocol)]))
    return rng.permutation(n_candidates)


def _run_one(args):
    data, spec, k, r = args
    ratio = spec.swept_ratios[k]
    rng = np.random.default_rng(cell_seed(spec.seed, spec.protocol, k, r))
    order = _fixed_match_order(spec, len(data.candidates))
    return run_cell(data, spec.ratios_at(ratio), rng, order, spec.score)


def run_sweep(spec: SweepSpec, data: SweepData, jobs: int = 1, keep_cells: bool = False):
    """Run every (ratio, repetition) cell and aggregate per ratio.

    Returns the list of :class:`SweepRow`, or ``(rows, cells)`` with
    ``keep_cells`` where ``cells[k][r]`` is the :class:`CellResult`.
    """
    tasks = [(data, spec, k, r) for k in range(len(spec.swept_ratios)) for r in range(spec.repetitions)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        results = [_run_one(t) for t in tasks]
    rows, cells = [], []
    for k, ratio in enumerate(spec.swept_ratios):
        chunk = results[k * spec.repetitions : (k + 1) * spec.repetitions]
        errs = np.array([c.error for c in chunk if c.feasible])
        rows.append(
            SweepRow(
                ratio,
                float(errs.mean()) if errs.size else math.nan,
                float(errs.std()) if errs.size else math.nan,
                int(errs.size),
                len(chunk) - int(errs.size),
            )
        )
        cells.append(chunk)
    return (rows, cells) if keep_cells else rows


def parameter_grid(data: SweepData, mus, gammas, repetitions=10, seed=0, ratios=None):
    """Mean target error over a (gamma, mu) grid, rows indexed by gamma.

    Default setting: 90% source labels, 10% of non-matched target nodes
    labeled, 10% matched, matches unlabeled; ``gamma_s = gamma_t = gamma``.
    """
    ratios = ratios or {"match_ratio": 0.1, "source_ratio": 0.9, "target_ratio": 0.1, "match_label_ratio": 0.0}
    out = np.full((len(gammas), len(mus)), math.nan)
    for i, g in enumerate(gammas):
        for j, mu in enumerate(mus):
            d = replace(data, mu=float(mu), gamma_s=float(g), gamma_t=float(g))
            errs = []
            for r in range(repetitions):
                # same label/match draws in every grid cell
                rng = np.random.default_rng(np.random.SeedSequence([int(seed), 99, r]))
                c = run_cell(d, ratios, rng)
                if c.feasible:
                    errs.append(c.error)
            if errs:
                out[i, j] = float(np.mean(errs))
    return out


WEIGHT_SETTINGS = (
    ("regularized", 1.0, 0.1, 0.1),
    ("unregularized", 1.0, 0.0, 0.0),
    ("smoothing-only", 0.0, 0.1, 0.1),
)


def kernel_sensitivity(data: SweepData, families, js, settings=WEIGHT_SETTINGS, repetitions=10, seed=0, lp_factor=20.0):
    """Target error per (family, J, weight setting).

    Uses 90% source labels, 10% matched, no labels on matches or on the
    target. Returns a list of ``(family, J, setting, mean, std, feasible)``.
    """
    ratios = {"match_ratio": 0.1, "source_ratio": 0.9, "target_ratio": 0.0, "match_label_ratio": 0.0}
    out = []
    for fam in families:
        for j in js:
            dk = data.with_kernel(KernelSpec(fam, int(j), lp_factor))
            for name, mu, gs, gt in settings:
                d = replace(dk, mu=mu, gamma_s=gs, gamma_t=gt)
                errs = []
                for r in range(repetitions):
                    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 98, r]))
                    c = run_cell(d, ratios, rng, singular="infeasible")
                    if c.feasible:
                        errs.append(c.error)
                errs = np.array(errs)
                out.append(
                    (
                        fam,
                        int(j),
                        name,
                        float(errs.mean()) if errs.size else math.nan,
                        float(errs.std()) if errs.size else math.nan,
                        int(errs.size),
                    )
                )
    return out



def time_pipeline(
    n: int, repeats: int = 3, seed: int = 0, kernel: KernelSpec = KernelSpec(), match_ratio=0.1, min_time=0.25
):
    """Best wall time of one full square problem with ``n`` nodes per domain.

    Covers what scales with ``n``: both eigendecompositions, the frames,
    the dictionary and the solve. Graph construction is excluded. Runs at
    least ``repeats`` times and until ``min_time`` seconds have been spent,
    so that small sizes are not dominated by timer noise.
    """
    import gc
    import time

    from .graph import FeatureSet, build_knn_graph, laplacian
    from .spectral import decompose

    rng = np.random.default_rng(np.random.SeedSequence([int(seed), int(n)]))
    xs, xt = rng.standard_normal((n, 3)), rng.standard_normal((n, 3))
    gs, gt = build_knn_graph(FeatureSet(xs), 10, 1.0), build_knn_graph(FeatureSet(xt), 10, 1.0)
    labels_s = (xs[:, 0] > 0).astype(int)
    q = max(1, _count(match_ratio, n))
    pairs = list(zip(rng.permutation(n)[:q].tolist(), rng.permutation(n)[:q].tolist()))
    ls = rng.permutation(n)[: _count(0.9, n)]
    best, spent, runs = math.inf, 0.0, 0
    # like timeit: keep the collector from charging earlier garbage to this run
    gc_was_on = gc.isenabled()
    gc.disable()
    try:
        while runs < repeats or spent < min_time:
            runs += 1
            t0 = time.perf_counter()
            doms = []
            for g in (gs, gt):
                lap = laplacian(g)
                sd = decompose(lap)
                doms.append(Domain(g, lap, sd, WaveletFrame(kernel, sd)))
            adapt(doms[0], doms[1], pairs, ls, labels_s[ls], [], [], 2)
            dt = time.perf_counter() - t0
            best, spent = min(best, dt), spent + dt
    finally:
        if gc_was_on:
            gc.enable()
    return best


def complexity_slope(sizes=(100, 200, 400, 800), rounds=5, seed=0, min_time=0.05):
    """Wall times per size and the least-squares slope of log(time) on log(n).

    Sizes are timed round-robin for ``rounds`` rounds and the best time per
    size is kept, so a slow stretch of the machine hits all sizes alike.
    """
    times = np.full(len(sizes), math.inf)
    for _ in range(rounds):
        for i, n in enumerate(sizes):
            times[i] = min(times[i], time_pipeline(n, 1, seed, min_time=min_time))
    slope = float(np.polyfit(np.log(sizes), np.log(times), 1)[0])
    return times, slope
