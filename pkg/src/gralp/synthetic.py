"""Synthetic source/target pairs of Gaussian clusters.

Each target sample either has a partner source sample, in which case it is
the partner's latent point plus a small jitter, or is drawn fresh from its
class cluster. Latent points are embedded into each domain's ambient space by
independent random isometries, and the target domain additionally gets an
anisotropic scaling and a translation. Partnered samples form the pool from
which matched pairs are drawn, so matched pairs are always same-class.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .graph import FeatureSet


@dataclass(frozen=True)
class SyntheticPairConfig:
    num_classes: int = 3
    n_source: int | tuple = 34
    n_target: int | tuple = 34
    latent_dim: int = 3
    dim_source: int = 5
    dim_target: int = 5
    separation: float = 5.0
    spread: float = 1.0
    spread_ratio: float = 2.0
    domain_noise: float = 0.15
    warp: float = 0.2
    q: int = 10
    seed: int = 0

    def counts(self, which):
        v = self.n_source if which == "source" else self.n_target
        if np.isscalar(v):
            return (int(v),) * self.num_classes
        v = tuple(int(x) for x in v)
        if len(v) != self.num_classes:
            raise InvalidParameterError(f"{which} counts must have one entry per class")
        return v


@dataclass(frozen=True)
class SyntheticPair:
    features_s: FeatureSet
    labels_s: np.ndarray
    features_t: FeatureSet
    labels_t: np.ndarray
    pairs: list
    candidates: np.ndarray

    def __iter__(self):
        return iter((self.features_s, self.labels_s, self.features_t, self.labels_t, self.pairs))


def _isometry(rng, d_in, d_out):
    if d_out < d_in:
        raise InvalidParameterError(f"ambient dimension {d_out} is below the latent dimension {d_in}")
    q, _ = np.linalg.qr(rng.standard_normal((d_out, d_in)))
    return q.T


def stratified_pairs(candidates, labels_s, q, rng):
    """Draw ``q`` candidate pairs, cycling over classes so each gets a fair share."""
    candidates = np.asarray(candidates, dtype=int).reshape(-1, 2)
    if q > len(candidates):
        raise InvalidParameterError(f"requested {q} matches but only {len(candidates)} candidates exist")
    if q == 0:
        return []
    cls = labels_s[candidates[:, 0]]
    queues = {c: list(rng.permutation(np.flatnonzero(cls == c))) for c in np.unique(cls)}
    chosen = []
    while len(chosen) < q:
        for c in sorted(queues):
            if queues[c] and len(chosen) < q:
                chosen.append(queues[c].pop())
    return [tuple(int(v) for v in candidates[i]) for i in sorted(chosen)]


def generate_synthetic_pair(cfg: SyntheticPairConfig) -> SyntheticPair:
    if cfg.num_classes < 1:
        raise InvalidParameterError("need at least one class")
    ns, nt = cfg.counts("source"), cfg.counts("target")
    pool = sum(min(a, b) for a, b in zip(ns, nt))
    if cfg.q < 0 or cfg.q > pool:
        raise InvalidParameterError(f"q={cfg.q} infeasible; at most {pool} same-class matches exist")
    rng = np.random.default_rng(cfg.seed)
    c = cfg.num_classes
    if c <= cfg.latent_dim:
        # scaled basis vectors: every pair of centers is `separation` apart
        centers = np.eye(c, cfg.latent_dim) * cfg.separation / np.sqrt(2.0)
    else:
        centers = rng.standard_normal((c, cfg.latent_dim)) * cfg.separation / np.sqrt(2.0)
    if c > 1:
        spreads = cfg.spread * cfg.spread_ratio ** (np.arange(c) / (c - 1) - 0.5)
    else:
        spreads = np.array([cfg.spread])

    zs, ys, zt, yt, partner = [], [], [], [], []
    for k in range(c):
        z = centers[k] + spreads[k] * rng.standard_normal((ns[k], cfg.latent_dim))
        m = min(ns[k], nt[k])
        zk = z[:m] + cfg.domain_noise * rng.standard_normal((m, cfg.latent_dim))
        fresh = centers[k] + spreads[k] * rng.standard_normal((nt[k] - m, cfg.latent_dim))
        offset = sum(len(a) for a in zs)
        partner += [offset + i for i in range(m)] + [-1] * (nt[k] - m)
        zs.append(z)
        zt.append(np.vstack([zk, fresh]))
        ys += [k] * ns[k]
        yt += [k] * nt[k]
    zs, zt = np.vstack(zs), np.vstack(zt)
    ys, yt = np.array(ys), np.array(yt)
    partner = np.array(partner)

    xs = zs @ _isometry(rng, cfg.latent_dim, cfg.dim_source)
    xt = zt @ _isometry(rng, cfg.latent_dim, cfg.dim_target)
    stretch = 1.0 + cfg.warp * rng.uniform(-1, 1, cfg.dim_target)
    xt = xt * stretch + rng.standard_normal(cfg.dim_target) * cfg.separation

    # arbitrary node enumeration in each domain
    perm_s = rng.permutation(len(ys))
    perm_t = rng.permutation(len(yt))
    inv_s = np.argsort(perm_s)
    inv_t = np.argsort(perm_t)
    xs, ys = xs[perm_s], ys[perm_s]
    xt, yt = xt[perm_t], yt[perm_t]
    has = np.flatnonzero(partner >= 0)
    cand = np.column_stack([inv_s[partner[has]], inv_t[has]])
    cand = cand[np.argsort(cand[:, 1], kind="stable")]

    pairs = stratified_pairs(cand, ys, cfg.q, rng)
    return SyntheticPair(FeatureSet(xs), ys, FeatureSet(xt), yt, pairs, cand)


def shuffle_matches(pairs, labels_s, labels_t, rng, max_tries=1000):
    """Permute the target ends of ``pairs`` so that no pair stays same-class.

    The matched target nodes are unchanged as a set; only their assignment to
    source nodes moves.
    """
    src = np.array([m for m, _ in pairs], dtype=int)
    tgt = np.array([n for _, n in pairs], dtype=int)
    for _ in range(max_tries):
        perm = rng.permutation(len(tgt))
        if np.all(labels_s[src] != labels_t[tgt[perm]]):
            return [(int(m), int(n)) for m, n in zip(src, tgt[perm])]
    raise InvalidParameterError("cannot re-wire the matches so that every pair is cross-class")
