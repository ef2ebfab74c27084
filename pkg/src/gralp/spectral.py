"""Laplacian eigendecomposition, graph Fourier transform and spectral filtering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidParameterError, NumericFailureError
from .graph import Laplacian


@dataclass(frozen=True)
class SpectralDecomposition:
    """Full spectrum of a Laplacian.

    ``eigenvalues`` are sorted ascending; column ``k`` of ``eigenvectors``
    is the unit eigenvector for ``eigenvalues[k]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])


def _fix_signs(u):
    scale = np.abs(u).max(axis=0)
    significant = np.abs(u) > 1e-10 * np.where(scale > 0, scale, 1.0)
    first = significant.argmax(axis=0)
    signs = np.sign(u[first, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    return u * signs


def decompose(lap: Laplacian | np.ndarray) -> SpectralDecomposition:
    """Dense symmetric eigendecomposition with a deterministic sign gauge.

    Each eigenvector is flipped so that its first significant entry is
    positive.
    """
    m = lap.matrix if isinstance(lap, Laplacian) else np.asarray(lap, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidParameterError(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericFailureError(f"matrix of shape {m.shape} has non-finite entries")
    try:
        lam, u = scipy.linalg.eigh(m, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        asym = float(np.abs(m - m.T).max())
        raise NumericFailureError(
            f"eigensolver failed on {m.shape[0]}x{m.shape[0]} matrix "
            f"(frobenius norm {np.linalg.norm(m):.3e}, max asymmetry {asym:.3e}): {exc}"
        ) from exc
    u = _fix_signs(u)
    lam.flags.writeable = False
    u.flags.writeable = False
    return SpectralDecomposition(lam, u)


def fourier(f, sd: SpectralDecomposition) -> np.ndarray:
    """Coefficients ``<f, u_k>``. ``f`` may be a vector or an N x C matrix."""
    f = np.asarray(f, dtype=float)
    if f.shape[0] != sd.n:
        raise InvalidParameterError(f"signal length {f.shape[0]} does not match graph size {sd.n}")
    return sd.eigenvectors.T @ f


def inverse_fourier(coeffs, sd: SpectralDecomposition) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[0] != sd.n:
        raise InvalidParameterError(f"coefficient length {coeffs.shape[0]} does not match graph size {sd.n}")
    return sd.eigenvectors @ coeffs


def filter_response(kernel, sd: SpectralDecomposition) -> np.ndarray:
    """Evaluate a spectral kernel on the eigenvalues, broadcasting scalars."""
    resp = np.broadcast_to(np.asarray(kernel(sd.eigenvalues), dtype=float), sd.eigenvalues.shape)
    if not np.all(np.isfinite(resp)):
        raise InvalidParameterError("kernel is not finite on the spectrum")
    return resp


def filter_signal(f, kernel, sd: SpectralDecomposition) -> np.ndarray:
    """Apply the spectral filter ``kernel`` to the graph signal ``f``."""
    resp = filter_response(kernel, sd)
    fh = fourier(f, sd)
    if fh.ndim == 2:
        resp = resp[:, None]
    return inverse_fourier(resp * fh, sd)
