"""Symmetric-matrix kernels shared across the package."""

import numpy as np

from .exceptions import AsymmetryError, NotPositiveDefinite

SYM_TOL = 1e-9
SPD_RTOL = 1e-12


def frobenius_norm(m):
    """Frobenius (Hilbert-Schmidt) norm of a real array."""
    return float(np.sqrt(np.sum(np.square(np.asarray(m, dtype=float)))))


def asymmetry(m):
    m = np.asarray(m, dtype=float)
    return frobenius_norm(m - m.T)


def symmetrize(raw, tol=SYM_TOL):
    """Return ``(raw + raw.T) / 2``, refusing inputs that are too far from symmetric.

    Parameters
    ----------
    raw : array_like, shape (n, n)
        Finite square matrix.
    tol : float
        Largest accepted ``||raw - raw.T||_F``.

    Raises
    ------
    AsymmetryError
        If the asymmetry exceeds `tol`.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[0] != raw.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {raw.shape}")
    if not np.all(np.isfinite(raw)):
        raise ValueError("matrix has non-finite entries")
    gap = asymmetry(raw)
    if gap > tol:
        raise AsymmetryError(gap, tol)
    return 0.5 * (raw + raw.T)


def spd_threshold(eigvals):
    scale = max(1.0, float(np.max(np.abs(eigvals)))) if len(eigvals) else 1.0
    return SPD_RTOL * scale


def is_spd(m):
    w = np.linalg.eigvalsh(np.asarray(m, dtype=float))
    return bool(w[0] > spd_threshold(w))


def check_spd(m, where=""):
    """Validate `m` as symmetric positive definite and return it symmetrized."""
    m = symmetrize(m)
    w = np.linalg.eigvalsh(m)
    if not w[0] > spd_threshold(w):
        raise NotPositiveDefinite(w[0], where)
    return m


def principal_sqrt(m):
    """Principal square root of a symmetric positive definite matrix.

    Eigenvalues are square-rooted in the symmetric eigenbasis, so the
    result is symmetric positive definite and commutes with `m`.
    """
    m = symmetrize(m)
    w, v = np.linalg.eigh(m)
    if not w[0] > spd_threshold(w):
        raise NotPositiveDefinite(w[0], "principal_sqrt")
    s = (v * np.sqrt(w)) @ v.T
    return 0.5 * (s + s.T)


def vech(m):
    """Half-vectorization: column-major stacking of the lower triangle."""
    m = np.asarray(m, dtype=float)
    n = m.shape[0]
    rows, cols = _lower_indices(n)
    return m[rows, cols].copy()


def unvech(v, n):
    """Inverse of :func:`vech`."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size != n * (n + 1) // 2:
        raise ValueError(f"vech length {v.size} does not match n={n} (expected {n * (n + 1) // 2})")
    rows, cols = _lower_indices(n)
    m = np.zeros((n, n))
    m[rows, cols] = v
    m[cols, rows] = v
    return m


def _lower_indices(n):
    # column-major: column j holds rows j..n-1
    cols, rows = np.triu_indices(n)
    return rows, cols
