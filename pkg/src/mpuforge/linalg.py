"""Dense complex linear-algebra primitives shared by the rest of the package.

All routines take and return ``numpy`` arrays of dtype ``complex128``; they are
pure and never mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TOL = 1e-10


class NotPsdError(ValueError):
    """A matrix expected to be positive semidefinite has a clearly negative eigenvalue."""


class ShapeError(ValueError):
    """Operand shapes or structural requirements do not match."""


def as_cmatrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise ShapeError(f"expected a matrix, got array of shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ShapeError("matrix has non-finite entries")
    return a


def kron(a, b) -> np.ndarray:
    """Kronecker product; the index of ``a`` is the slow one."""
    return np.kron(as_cmatrix(a), as_cmatrix(b))


@dataclass(frozen=True)
class SvdResult:
    u: np.ndarray
    singular_values: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.singular_values) @ self.v.conj().T


def svd(m) -> SvdResult:
    """Thin SVD ``m = u diag(s) v^dagger`` with descending ``s``."""
    a = as_cmatrix(m)
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise ArithmeticError(f"SVD did not converge: {exc}") from exc
    return SvdResult(u=u, singular_values=s, v=vh.conj().T)


def _check_hermitian(a: np.ndarray, tol: float) -> None:
    if a.shape[0] != a.shape[1]:
        raise ShapeError("matrix must be square")
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    if np.abs(a - a.conj().T).max(initial=0.0) > tol * scale:
        raise ShapeError("matrix is not Hermitian within tolerance")


def eigh_psd(m, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a PSD matrix with tiny negative eigenvalues clamped to zero."""
    a = as_cmatrix(m)
    _check_hermitian(a, tol)
    a = 0.5 * (a + a.conj().T)
    w, v = np.linalg.eigh(a)
    scale = max(1.0, float(np.abs(w).max(initial=0.0)))
    if w.size and w.min() < -tol * scale:
        raise NotPsdError(f"eigenvalue {w.min():.3e} below -tol")
    return np.clip(w, 0.0, None), v


def sqrtm_psd(m, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Hermitian PSD square root."""
    w, v = eigh_psd(m, tol)
    return (v * np.sqrt(w)) @ v.conj().T


def trace_norm(m) -> float:
    return float(np.linalg.svd(as_cmatrix(m), compute_uv=False).sum())


def numerical_rank(m, rel_tol: float = DEFAULT_TOL) -> int:
    a = as_cmatrix(m)
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))


def complete_unitary(columns) -> np.ndarray:
    """Extend orthonormal columns to a square unitary whose leading columns are ``columns``.

    The completion is deterministic: the extra columns are the leading eigenvectors of
    the projector onto the orthogonal complement.
    """
    c = np.asarray(columns, dtype=complex)
    if c.ndim == 1:
        c = c[:, None]
    n, k = c.shape
    if k == n:
        return c.copy()
    proj = np.eye(n) - c @ c.conj().T
    w, v = np.linalg.eigh(0.5 * (proj + proj.conj().T))
    comp = v[:, np.argsort(w)[::-1][: n - k]]
    return np.concatenate([c, comp], axis=1)


def householder_unitary(vec) -> np.ndarray:
    """Unitary ``B`` with ``B e_0 = vec`` for a unit vector ``vec``, via a Householder reflection."""
    x = np.asarray(vec, dtype=complex).reshape(-1)
    n = x.size
    nrm = np.linalg.norm(x)
    if not np.isclose(nrm, 1.0, atol=1e-12):
        raise ShapeError("vector must have unit norm")
    if n == 1:
        return x.reshape(1, 1).copy()
    # Strip the phase of x[0] so that <y, e0> is real and non-negative; the
    # reflection through (y + e0)^perp then sends e0 to -y.
    phase = x[0] / abs(x[0]) if abs(x[0]) > 0 else 1.0
    e0 = np.zeros(n, dtype=complex)
    e0[0] = 1.0
    w = x / phase + e0
    w = w / np.linalg.norm(w)
    h = np.eye(n, dtype=complex) - 2.0 * np.outer(w, w.conj())
    return -phase * h


def unitarity_residual(u) -> float:
    a = as_cmatrix(u)
    return float(np.abs(a.conj().T @ a - np.eye(a.shape[1])).max(initial=0.0))


def phase_invariant_distance(u, v) -> float:
    """``1 - |Tr(u^dagger v)| / dim``; zero iff ``u`` and ``v`` agree up to a global phase."""
    a, b = as_cmatrix(u), as_cmatrix(v)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(1.0 - abs(np.vdot(a, b)) / a.shape[1])
