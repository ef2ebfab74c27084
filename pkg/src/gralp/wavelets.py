"""Spectral graph wavelet kernels, scale sampling and matched dictionaries.

Kernel families
---------------
ab-spline
    Band-pass ``g(x) = x^2`` on ``[0, 1)``, ``4 x^-2`` on ``[2, inf)`` and the
    cubic through ``(1, 1)``, ``(2, 1)`` matching both slopes in between.
mexican-hat
    ``g(x) = x exp(-x)``.
meyer
    ``g(x) = sin(pi/2 nu(3x/2 - 1))`` on ``[2/3, 4/3)`` and
    ``cos(pi/2 nu(3x/4 - 1))`` on ``[4/3, 8/3)``, zero elsewhere, with
    ``nu(t) = t^4 (35 - 84 t + 70 t^2 - 20 t^3)``. Scaling function
    ``h(x) = 1`` below ``2/3`` and ``cos(pi/2 nu(3x/2 - 1))`` up to ``4/3``.
simple-tight-frame
    With ``q(t) = sin^2(pi t / 2)``: ``g(x) = q(4x - 1)`` on ``[1/4, 1/2)``,
    ``sqrt(1 - q(2x - 1)^2)`` on ``[1/2, 1)``. Scaling function ``h(x) = 1``
    below ``1/4`` and ``sqrt(1 - q(4x - 1)^2)`` up to ``1/2``.

ab-spline and mexican-hat use scales log-spaced between ``x2 K / lmax`` and
``x2 / lmax`` (``x2 = 2``, ``K`` the low-pass factor) together with the
low-pass ``h(l) = gamma exp(-(l / (0.6 lmax / K))^4)``, ``gamma`` being the
peak of ``g`` over the sampled band. meyer and simple-tight-frame use dyadic
scales ending at ``x2 / lmax`` (``x2 = 4/3`` resp. ``1/2``) and their own
scaling function at the coarsest scale, which makes
``h^2 + sum_j g(s_j l)^2 == 1`` on ``[0, lmax]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvalidParameterError
from .spectral import SpectralDecomposition

FAMILIES = ("ab-spline", "mexican-hat", "meyer", "simple-tight-frame")
TIGHT_FAMILIES = ("meyer", "simple-tight-frame")

# upper design abscissa used by the scale sampling
DESIGN_X2 = {
    "ab-spline": 2.0,
    "mexican-hat": 2.0,
    "meyer": 4.0 / 3.0,
    "simple-tight-frame": 0.5,
}


@lru_cache(maxsize=None)
def _abspline_coeffs(alpha=2.0, beta=2.0, x1=1.0, x2=2.0):
    m = np.array(
        [
            [1.0, x1, x1**2, x1**3],
            [1.0, x2, x2**2, x2**3],
            [0.0, 1.0, 2 * x1, 3 * x1**2],
            [0.0, 1.0, 2 * x2, 3 * x2**2],
        ]
    )
    v = np.array([1.0, 1.0, alpha / x1, -beta / x2])
    return tuple(np.linalg.solve(m, v))


def _abspline(x, alpha=2.0, beta=2.0, x1=1.0, x2=2.0):
    a = _abspline_coeffs(alpha, beta, x1, x2)
    r = np.zeros_like(x)
    low = x < x1
    mid = (x >= x1) & (x < x2)
    high = x >= x2
    r[low] = (x[low] / x1) ** alpha
    xm = x[mid]
    r[mid] = a[0] + a[1] * xm + a[2] * xm**2 + a[3] * xm**3
    r[high] = (x2 / x[high]) ** beta
    return r


def _meyer_nu(t):
    # rounding can push the polynomial a hair past 1 near t = 1
    return np.clip(t**4 * (35 - 84 * t + 70 * t**2 - 20 * t**3), 0.0, 1.0)


def _meyer_wavelet(x):
    r = np.zeros_like(x)
    a = (x >= 2 / 3) & (x < 4 / 3)
    b = (x >= 4 / 3) & (x < 8 / 3)
    r[a] = np.sin(np.pi / 2 * _meyer_nu(1.5 * x[a] - 1))
    r[b] = np.cos(np.pi / 2 * _meyer_nu(0.75 * x[b] - 1))
    return r


def _meyer_scaling(x):
    r = np.zeros_like(x)
    r[x < 2 / 3] = 1.0
    a = (x >= 2 / 3) & (x < 4 / 3)
    r[a] = np.cos(np.pi / 2 * _meyer_nu(1.5 * x[a] - 1))
    return r


def _stf_q(t):
    return np.sin(np.pi * t / 2) ** 2


def _stf_wavelet(x):
    r = np.zeros_like(x)
    a = (x >= 0.25) & (x < 0.5)
    b = (x >= 0.5) & (x < 1.0)
    r[a] = _stf_q(4 * x[a] - 1)
    r[b] = np.sqrt(1 - _stf_q(2 * x[b] - 1) ** 2)
    return r


def _stf_scaling(x):
    r = np.zeros_like(x)
    r[x < 0.25] = 1.0
    a = (x >= 0.25) & (x < 0.5)
    r[a] = np.sqrt(1 - _stf_q(4 * x[a] - 1) ** 2)
    return r


_BANDPASS = {
    "ab-spline": _abspline,
    "mexican-hat": lambda x: x * np.exp(-x),
    "meyer": _meyer_wavelet,
    "simple-tight-frame": _stf_wavelet,
}


def _check_family(family):
    if family not in FAMILIES:
        raise InvalidParameterError(f"unknown kernel family {family!r}; choose from {FAMILIES}")


def kernel_eval(family: str, x):
    """Band-pass wavelet kernel ``g`` of ``family`` at ``x >= 0``."""
    _check_family(family)
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise InvalidParameterError("kernels are defined for x >= 0")
    out = _BANDPASS[family](np.atleast_1d(arr).astype(float))
    return out.reshape(arr.shape) if arr.ndim else float(out[0])


@dataclass(frozen=True)
class KernelSpec:
    family: str = "ab-spline"
    j: int = 4
    lp_factor: float = 20.0

    def __post_init__(self):
        _check_family(self.family)
        if int(self.j) != self.j or self.j < 1:
            raise InvalidParameterError(f"number of wavelet scales must be >= 1, got {self.j}")
        if not self.lp_factor > 1:
            raise InvalidParameterError(f"lp_factor must exceed 1, got {self.lp_factor}")

    @property
    def design_x2(self) -> float:
        return DESIGN_X2[self.family]

    def bandpass(self, x):
        return kernel_eval(self.family, x)

    def lowpass(self, lam, lambda_max: float):
        """Low-pass kernel ``h`` for a graph whose largest eigenvalue is ``lambda_max``."""
        lam = np.asarray(lam, dtype=float)
        if self.family in TIGHT_FAMILIES:
            s1 = sample_scales(self, lambda_max)[0]
            f = _meyer_scaling if self.family == "meyer" else _stf_scaling
            return f(np.atleast_1d(s1 * lam)).reshape(lam.shape)
        lam_lp = lambda_max / self.lp_factor
        return self.lowpass_gain(lambda_max) * np.exp(-((lam / (0.6 * lam_lp)) ** 4))

    def lowpass_gain(self, lambda_max: float) -> float:
        """Peak of ``g`` over ``[0, s_max lambda_max]``."""
        # s_max * lambda_max == x2 * lp_factor, so the gain does not depend on the graph
        return _peak_gain(self.family, float(self.lp_factor))


@lru_cache(maxsize=None)
def _peak_gain(family, lp_factor):
    grid = np.linspace(0.0, DESIGN_X2[family] * lp_factor, 20001)
    return float(kernel_eval(family, grid).max())


def sample_scales(spec: KernelSpec, lambda_max: float) -> np.ndarray:
    """Descending wavelet scales ``s_1 > ... > s_J`` for a spectrum up to ``lambda_max``."""
    if not lambda_max > 0:
        raise InvalidParameterError(f"lambda_max must be positive, got {lambda_max}")
    s_min = spec.design_x2 / lambda_max
    if spec.family in TIGHT_FAMILIES:
        return s_min * 2.0 ** np.arange(spec.j - 1, -1, -1, dtype=float)
    s_max = spec.design_x2 / (lambda_max / spec.lp_factor)
    if spec.j == 1:
        return np.array([s_max])
    return np.exp(np.linspace(np.log(s_max), np.log(s_min), spec.j))


def _filtered_column(sd, response, node):
    u = sd.eigenvectors
    return u @ (response * u[node])


def _check_node(sd, node):
    if not 0 <= node < sd.n:
        raise InvalidParameterError(f"node {node} out of range for graph with {sd.n} nodes")


def wavelet_atom(sd: SpectralDecomposition, kernel, scale: float, node: int) -> np.ndarray:
    """Wavelet at ``scale`` centred on ``node``: the filtered Dirac ``g(s L) delta_n``."""
    _check_node(sd, node)
    if not scale > 0:
        raise InvalidParameterError(f"scale must be positive, got {scale}")
    lam = np.maximum(sd.eigenvalues, 0.0)
    resp = np.broadcast_to(np.asarray(kernel(scale * lam), dtype=float), lam.shape)
    return _filtered_column(sd, resp, node)


def scaling_atom(sd: SpectralDecomposition, kernel, node: int) -> np.ndarray:
    _check_node(sd, node)
    lam = np.maximum(sd.eigenvalues, 0.0)
    resp = np.broadcast_to(np.asarray(kernel(lam), dtype=float), lam.shape)
    return _filtered_column(sd, resp, node)


@dataclass(frozen=True)
class WaveletFrame:
    """Scaling function and ``J`` wavelets of one graph.

    ``responses`` holds the spectral responses, row 0 the low-pass
    ``h(lambda_k)`` and row ``j`` the band-pass ``g(s_j lambda_k)``.
    """

    spec: KernelSpec
    sd: SpectralDecomposition
    scales: np.ndarray = field(init=False)
    responses: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        lam = self.sd.eigenvalues
        lmax = self.sd.lambda_max
        scales = sample_scales(self.spec, lmax)
        # clip tiny negative round-off eigenvalues so kernels see x >= 0
        lam_c = np.maximum(lam, 0.0)
        resp = np.vstack([self.spec.lowpass(lam_c, lmax), self.spec.bandpass(np.outer(scales, lam_c))])
        scales.flags.writeable = False
        resp.flags.writeable = False
        object.__setattr__(self, "scales", scales)
        object.__setattr__(self, "responses", resp)

    @property
    def n(self) -> int:
        return self.sd.n

    @property
    def num_atoms(self) -> int:
        return self.responses.shape[0]

    def atoms(self, node: int) -> np.ndarray:
        """N x (J+1) matrix ``[phi_n, psi_{s_1,n}, ..., psi_{s_J,n}]``."""
        _check_node(self.sd, node)
        u = self.sd.eigenvectors
        return u @ (self.responses * u[node]).T

    def atoms_at(self, nodes) -> np.ndarray:
        """Atoms of several nodes side by side, node by node (N x len(nodes)(J+1))."""
        nodes = np.asarray(nodes, dtype=int)
        for v in nodes:
            _check_node(self.sd, int(v))
        u = self.sd.eigenvectors
        # (nodes, atoms, K) spectral coefficients -> one GEMM
        coef = u[nodes][:, None, :] * self.responses[None, :, :]
        return u @ coef.reshape(-1, u.shape[1]).T

    def frame_function(self) -> np.ndarray:
        """``h(lambda_k)^2 + sum_j g(s_j lambda_k)^2`` on the spectrum."""
        return (self.responses**2).sum(axis=0)


@dataclass(frozen=True)
class MatchedDictionary:
    psi_s: np.ndarray
    psi_t: np.ndarray
    pairs: tuple

    @property
    def q(self) -> int:
        return len(self.pairs)

    @property
    def atoms_per_pair(self) -> int:
        return self.psi_s.shape[1] // max(self.q, 1)


def validate_pairs(pairs, n_s, n_t):
    pairs = tuple((int(m), int(n)) for m, n in pairs)
    if not pairs:
        raise InvalidParameterError("at least one matched pair is required")
    src = [m for m, _ in pairs]
    tgt = [n for _, n in pairs]
    if len(set(src)) != len(src) or len(set(tgt)) != len(tgt):
        raise InvalidParameterError("matched pairs contain a duplicate source or target index")
    for m, n in pairs:
        if not (0 <= m < n_s and 0 <= n < n_t):
            raise InvalidParameterError(f"pair ({m}, {n}) out of range for graphs of size {n_s}, {n_t}")
    return pairs


def build_matched_dictionary(frame_s: WaveletFrame, frame_t: WaveletFrame, pairs) -> MatchedDictionary:
    """Stack the atoms of both frames at every matched pair, pair by pair."""
    if frame_s.num_atoms != frame_t.num_atoms:
        raise InvalidParameterError("source and target frames have different numbers of scales")
    pairs = validate_pairs(pairs, frame_s.n, frame_t.n)
    psi_s = frame_s.atoms_at([m for m, _ in pairs])
    psi_t = frame_t.atoms_at([n for _, n in pairs])
    psi_s.flags.writeable = False
    psi_t.flags.writeable = False
    return MatchedDictionary(psi_s, psi_t, pairs)
