"""Closed-form estimation of the source and target label functions.

The objective, for label functions ``F_s`` (N_s x C) and ``F_t`` (N_t x C), is

    ||S_s F_s - Y_s||^2 + ||S_t F_t - Y_t||^2
    + mu ||Psi_s^T F_s - Psi_t^T F_t||^2
    + gamma_s tr(F_s^T L_s F_s) + gamma_t tr(F_t^T L_t F_t)

with Frobenius norms, i.e. the scalar problem summed over the C columns.
Setting the gradient to zero and eliminating ``F_s`` gives

    M_s   = S_s^T S_s + mu Psi_s Psi_s^T + gamma_s L_s
    T     = S_t^T S_t + mu Psi_t Psi_t^T + gamma_t L_t
            - mu^2 Psi_t Psi_s^T M_s^{-1} Psi_s Psi_t^T
    F_t   = T^{-1} (S_t^T Y_t + mu Psi_t Psi_s^T M_s^{-1} S_s^T Y_s)
    F_s   = M_s^{-1} (S_s^T Y_s + mu Psi_s Psi_t^T F_t)

Both inverses are applied through factorizations shared by all C columns.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.linalg import lapack

from .errors import InvalidParameterError, SingularSystemError
from .graph import Laplacian
from .wavelets import MatchedDictionary

log = logging.getLogger(__name__)

DEFAULT_MU = 1.0
DEFAULT_GAMMA_S = 0.1
DEFAULT_GAMMA_T = 0.1


class SingularSystemWarning(RuntimeWarning):
    pass


def encode_labels(class_ids, num_classes: int) -> np.ndarray:
    """One-hot encode integer class ids into an N x C matrix."""
    ids = np.asarray(class_ids)
    if ids.size and (ids.min() < 0 or ids.max() >= num_classes):
        raise InvalidParameterError(f"class ids must lie in [0, {num_classes})")
    if ids.size and not np.issubdtype(ids.dtype, np.integer):
        if not np.all(ids == np.round(ids)):
            raise InvalidParameterError("class ids must be integers")
    ids = ids.astype(int)
    out = np.zeros((ids.size, num_classes))
    out[np.arange(ids.size), ids.ravel()] = 1.0
    return out


def decode_labels(values) -> np.ndarray:
    """Row-wise argmax; ties resolve to the lowest class index."""
    if isinstance(values, LabelFunction):
        values = values.values
    return np.argmax(np.asarray(values), axis=1)


@dataclass(frozen=True)
class LabelFunction:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if not np.all(np.isfinite(v)):
            raise InvalidParameterError("label function has non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def decoded(self) -> np.ndarray:
        return decode_labels(self.values)


def _as_lap(lap):
    return lap.matrix if isinstance(lap, Laplacian) else np.asarray(lap, dtype=float)


@dataclass(frozen=True)
class AdaptationProblem:
    """Inputs of one adaptation solve.

    ``idx_s``/``idx_t`` hold the labeled node indices and ``y_s``/``y_t`` the
    matching rows of target values (M x C; one-hot for class labels).
    """

    lap_s: Laplacian
    lap_t: Laplacian
    dictionary: MatchedDictionary
    idx_s: np.ndarray
    y_s: np.ndarray
    idx_t: np.ndarray
    y_t: np.ndarray
    mu: float = DEFAULT_MU
    gamma_s: float = DEFAULT_GAMMA_S
    gamma_t: float = DEFAULT_GAMMA_T

    def __post_init__(self):
        n_s, n_t = _as_lap(self.lap_s).shape[0], _as_lap(self.lap_t).shape[0]
        if self.dictionary.psi_s.shape[0] != n_s or self.dictionary.psi_t.shape[0] != n_t:
            raise InvalidParameterError("dictionary rows do not match the graph sizes")
        c = None
        for name, idx, y, n in (("source", self.idx_s, self.y_s, n_s), ("target", self.idx_t, self.y_t, n_t)):
            idx = np.asarray(idx, dtype=int).ravel()
            y = np.asarray(y, dtype=float)
            if y.ndim == 1:
                y = y[:, None] if idx.size else y.reshape(0, 1 if c is None else c)
            if y.shape[0] != idx.size:
                raise InvalidParameterError(f"{name}: {idx.size} labeled indices but {y.shape[0]} label rows")
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise InvalidParameterError(f"{name}: labeled index out of range")
            if np.unique(idx).size != idx.size:
                raise InvalidParameterError(f"{name}: labeled indices are not unique")
            if idx.size:
                if c is not None and y.shape[1] != c:
                    raise InvalidParameterError("source and target labels have different class counts")
                c = y.shape[1]
            object.__setattr__(self, "idx_" + name[0], idx)
            object.__setattr__(self, "y_" + name[0], y)
        if c is None:
            raise InvalidParameterError("no labels in either domain; the problem is label-free")
        for name in ("y_s", "y_t"):
            y = getattr(self, name)
            if y.shape[0] == 0:
                object.__setattr__(self, name, np.zeros((0, c)))
        for name in ("mu", "gamma_s", "gamma_t"):
            v = float(getattr(self, name))
            if not (v >= 0 and np.isfinite(v)):
                raise InvalidParameterError(f"{name} must be a finite non-negative number, got {v}")
            object.__setattr__(self, name, v)

    @classmethod
    def from_class_labels(cls, lap_s, lap_t, dictionary, idx_s, labels_s, idx_t, labels_t, num_classes, **weights):
        return cls(
            lap_s,
            lap_t,
            dictionary,
            np.asarray(idx_s, dtype=int),
            encode_labels(labels_s, num_classes),
            np.asarray(idx_t, dtype=int),
            encode_labels(labels_t, num_classes),
            **weights,
        )

    @property
    def num_classes(self) -> int:
        return self.y_s.shape[1]

    @property
    def n_s(self) -> int:
        return self.dictionary.psi_s.shape[0]

    @property
    def n_t(self) -> int:
        return self.dictionary.psi_t.shape[0]

    def label_norm(self) -> float:
        return float(np.sqrt((self.y_s**2).sum() + (self.y_t**2).sum()))


@dataclass(frozen=True)
class ObjectiveTerms:
    fidelity_s: float
    fidelity_t: float
    matching: float
    smooth_s: float
    smooth_t: float

    @property
    def total(self) -> float:
        return self.fidelity_s + self.fidelity_t + self.matching + self.smooth_s + self.smooth_t


@dataclass(frozen=True)
class Solution:
    f_s: LabelFunction
    f_t: LabelFunction
    terms: ObjectiveTerms
    gradient_max: float
    ridge: tuple = (0.0, 0.0)

    @property
    def objective_value(self) -> float:
        return self.terms.total


def _as_matrix(f, n):
    f = np.asarray(f.values if isinstance(f, LabelFunction) else f, dtype=float)
    if f.ndim == 1:
        f = f[:, None]
    if f.shape[0] != n:
        raise InvalidParameterError(f"label function has {f.shape[0]} rows, expected {n}")
    return f


def evaluate_objective(problem: AdaptationProblem, f_s, f_t) -> ObjectiveTerms:
    """Evaluate each term of the objective at ``(f_s, f_t)``."""
    fs = _as_matrix(f_s, problem.n_s)
    ft = _as_matrix(f_t, problem.n_t)
    d = problem.dictionary
    rs = fs[problem.idx_s] - problem.y_s
    rt = ft[problem.idx_t] - problem.y_t
    rc = d.psi_s.T @ fs - d.psi_t.T @ ft
    ls, lt = _as_lap(problem.lap_s), _as_lap(problem.lap_t)
    return ObjectiveTerms(
        fidelity_s=float((rs**2).sum()),
        fidelity_t=float((rt**2).sum()),
        matching=problem.mu * float((rc**2).sum()),
        smooth_s=problem.gamma_s * float(np.sum(fs * (ls @ fs))),
        smooth_t=problem.gamma_t * float(np.sum(ft * (lt @ ft))),
    )


def objective_gradient(problem: AdaptationProblem, f_s, f_t):
    """Gradient of the objective with respect to ``f_s`` and ``f_t``."""
    fs = _as_matrix(f_s, problem.n_s)
    ft = _as_matrix(f_t, problem.n_t)
    d = problem.dictionary
    rc = d.psi_s.T @ fs - d.psi_t.T @ ft
    gs = 2 * problem.mu * (d.psi_s @ rc) + 2 * problem.gamma_s * (_as_lap(problem.lap_s) @ fs)
    gt = -2 * problem.mu * (d.psi_t @ rc) + 2 * problem.gamma_t * (_as_lap(problem.lap_t) @ ft)
    np.add.at(gs, problem.idx_s, 2 * (fs[problem.idx_s] - problem.y_s))
    np.add.at(gt, problem.idx_t, 2 * (ft[problem.idx_t] - problem.y_t))
    return gs, gt


def _selection_gram(n, idx):
    return np.bincount(idx, minlength=n).astype(float)


def _smallest_singular_value(m):
    return float(scipy.linalg.svdvals(m, check_finite=False)[-1])


class _Factor:
    """Cholesky factorization with an LU fallback and a conditioning check.

    A matrix counts as singular when its reciprocal condition number is at
    most ``10 n eps`` or when ``1 / ||m^-1||_1`` does not clear ``noise``,
    the absolute rounding error already present in ``m``, by a factor 10.
    """

    def __init__(self, m, which, noise=0.0):
        self.which = which
        self.noise = noise
        self.ridge = 0.0
        self.ok = self._factor(m)

    def _factor(self, m):
        n = m.shape[0]
        # reciprocal condition below this is treated as exactly singular
        tol = 10 * n * np.finfo(float).eps
        anorm = float(np.abs(m).sum(axis=0).max())
        if anorm == 0:
            return False
        try:
            self.cho = scipy.linalg.cho_factor(m, lower=True, check_finite=False)
            rcond, info = lapack.dpocon(self.cho[0], anorm, uplo="L")
            self.kind = "cholesky"
        except np.linalg.LinAlgError:
            lu, piv, info = lapack.dgetrf(m)
            if info != 0:
                return False
            self.lu = (lu, piv)
            rcond, info = lapack.dgecon(lu, anorm)
            self.kind = "lu"
        self.rcond, self.anorm = float(rcond), anorm
        log.debug("%s system: %s factorization, rcond %.3e, noise %.3e", self.which, self.kind, rcond, self.noise)
        return info == 0 and rcond > tol and rcond * anorm > 10 * self.noise

    @property
    def inverse_norm(self) -> float:
        """Estimate of ``||m^-1||_1``."""
        return 1.0 / (self.rcond * self.anorm)

    def solve(self, b):
        if self.kind == "cholesky":
            return scipy.linalg.cho_solve(self.cho, b, check_finite=False)
        return scipy.linalg.lu_solve(self.lu, b, check_finite=False)


def _check_symmetric(m, which):
    asym = float(np.abs(m - m.T).max()) if m.size else 0.0
    scale = max(float(np.abs(m).max()) if m.size else 0.0, 1.0)
    if asym > 1e-8 * scale:
        raise InvalidParameterError(f"{which} system matrix is not symmetric (max asymmetry {asym:.3e})")
    return 0.5 * (m + m.T)


def _factor_or_raise(m, which, ridge):
    """Factor ``m``; if singular, raise or (with ``ridge``) regularize and warn."""
    fac = _Factor(m, which)
    if fac.ok:
        return fac
    n = m.shape[0]
    sigma_min = _smallest_singular_value(m)
    if not ridge:
        raise SingularSystemError(which, sigma_min)
    eps = 1e-9 * float(np.trace(m)) / n
    warnings.warn(
        f"{which} system matrix is singular (smallest singular value {sigma_min:.3e}); adding ridge {eps:.3e}",
        SingularSystemWarning,
        stacklevel=3,
    )
    fac = _Factor(m + eps * np.eye(n), which)
    if not fac.ok:
        raise SingularSystemError(which, sigma_min)
    fac.ridge = eps
    return fac


def _rhs(problem):
    rhs_s = np.zeros((problem.n_s, problem.num_classes))
    np.add.at(rhs_s, problem.idx_s, problem.y_s)
    rhs_t = np.zeros((problem.n_t, problem.num_classes))
    np.add.at(rhs_t, problem.idx_t, problem.y_t)
    return rhs_s, rhs_t


def _source_matrix(problem):
    ps = problem.dictionary.psi_s
    m_s = problem.mu * (ps @ ps.T) + problem.gamma_s * _as_lap(problem.lap_s)
    m_s[np.diag_indices_from(m_s)] += _selection_gram(problem.n_s, problem.idx_s)
    return _check_symmetric(m_s, "source")


def _solve_joint(problem, m_s, ridge):
    """Solve the full (N_s + N_t) stationarity system in one factorization."""
    ps, pt = problem.dictionary.psi_s, problem.dictionary.psi_t
    mu = problem.mu
    m_t = mu * (pt @ pt.T) + problem.gamma_t * _as_lap(problem.lap_t)
    m_t[np.diag_indices_from(m_t)] += _selection_gram(problem.n_t, problem.idx_t)
    cross = -mu * (ps @ pt.T)
    a = _check_symmetric(np.block([[m_s, cross], [cross.T, m_t]]), "target")
    # m_s was factored fine, so a singular joint matrix means the target is not pinned down
    fac = _factor_or_raise(a, "target", ridge)
    f = fac.solve(np.vstack(_rhs(problem)))
    return f[: problem.n_s], f[problem.n_s :], fac.ridge


def solve(problem: AdaptationProblem, ridge: bool = False) -> Solution:
    """Minimize the objective in closed form.

    ``F_t`` comes from the Schur complement of the source block, ``F_s`` by
    back-substitution. The Schur complement is formed by a subtraction, so
    when it is too close to its own rounding error to be judged the full
    joint system is solved instead.

    Raises :class:`SingularSystemError` when the system is singular, e.g.
    when a domain has no labels, ``mu == 0`` and nothing else pins down its
    constant component. With ``ridge=True`` a multiple ``1e-9 trace(M)/n``
    of the identity is added to the offending matrix instead, with a warning.
    """
    d = problem.dictionary
    mu = problem.mu
    ps, pt = d.psi_s, d.psi_t

    m_s = _source_matrix(problem)
    fac_s = _factor_or_raise(m_s, "source", ridge)
    rhs_s, rhs_t = _rhs(problem)

    # M_s^{-1} Psi_s and M_s^{-1} S_s^T Y_s in one multi-RHS solve
    sol = fac_s.solve(np.hstack([ps, rhs_s]))
    a_ps, a_rhs = sol[:, : ps.shape[1]], sol[:, ps.shape[1]:]

    core = ps.T @ a_ps
    m_t = mu * (pt @ pt.T) + problem.gamma_t * _as_lap(problem.lap_t) - mu**2 * (pt @ core @ pt.T)
    m_t[np.diag_indices_from(m_t)] += _selection_gram(problem.n_t, problem.idx_t)
    m_t = 0.5 * (m_t + m_t.T)
    # worst-case rounding left by the subtraction: n eps mu^2 ||Psi_s||^2 ||Psi_t||^2 ||M_s^-1||
    gram_norm = float(np.abs(ps.T @ ps).sum(axis=0).max() * np.abs(pt.T @ pt).sum(axis=0).max())
    noise = problem.n_t * np.finfo(float).eps * mu**2 * gram_norm * fac_s.inverse_norm
    fac_t = _Factor(m_t, "target", noise)

    if fac_t.ok:
        f_t = fac_t.solve(rhs_t + mu * (pt @ (ps.T @ a_rhs)))
        f_s = a_rhs + mu * (a_ps @ (pt.T @ f_t))
        ridges = (fac_s.ridge, 0.0)
    else:
        log.debug("target Schur complement inconclusive; solving the joint system")
        f_s, f_t, r = _solve_joint(problem, m_s, ridge)
        ridges = (fac_s.ridge, r)

    gs, gt = objective_gradient(problem, f_s, f_t)
    gmax = float(max(np.abs(gs).max(initial=0.0), np.abs(gt).max(initial=0.0)))
    return Solution(
        LabelFunction(f_s),
        LabelFunction(f_t),
        evaluate_objective(problem, f_s, f_t),
        gmax,
        ridges,
    )


def stationarity_tolerance(problem: AdaptationProblem) -> float:
    return 1e-6 * (1.0 + problem.label_norm())
