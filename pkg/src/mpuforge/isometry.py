"""Isometry caps ``L``, ``R`` and conditioning numbers.

A segment of sites ``j..k`` becomes an isometry once its open bonds are capped:

    V |J> = sum_{I, a, b} (Lcap A^{i_j j_j} ... A^{i_k j_k} Rcap^T)_{ab} |I, a, b>

where ``Lcap`` is either the boundary row ``l`` or a Hermitian cap ``L`` with
``L^2 = E_L`` (the left environment, weighted by a density matrix on the inputs), and
likewise on the right.  Environments are stored as ``E[n, p] = sum conj(x_n) x_p``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import PreconditionError, ValidationError
from .mpu import MpoChain, SchmidtData, UniformMpu, capped_left, capped_right


@dataclass(frozen=True)
class CapPair:
    L: np.ndarray
    R: np.ndarray
    full_rank: bool
    source: dict = field(default_factory=dict)

    @property
    def L_sq(self) -> np.ndarray:
        return self.L @ self.L

    @property
    def R_sq(self) -> np.ndarray:
        return self.R @ self.R


@dataclass(frozen=True)
class IsometryBlock:
    site_range: tuple[int, int]
    left_cap: np.ndarray
    right_cap: np.ndarray
    dense_v: np.ndarray | None = None

    def residual(self) -> float:
        if self.dense_v is None:
            raise ValueError("block has no dense isometry")
        return linalg.unitarity_residual(self.dense_v)


def _weighted_env(x: np.ndarray, d_out: int, d_in: int, rho: np.ndarray | None) -> np.ndarray:
    # x: rows (I, J), cols bond.  E[n, p] = sum rho[K, J] conj(x[I, J, n]) x[I, K, p].
    x = x.reshape(d_out, d_in, -1)
    if rho is None:
        return np.einsum("ijn,ijp->np", x.conj(), x) / d_in
    rho = linalg.as_cmatrix(rho)
    if rho.shape != (d_in, d_in):
        raise linalg.ShapeError(f"density matrix must be {d_in} x {d_in}")
    return np.einsum("kj,ijn,ikp->np", rho, x.conj(), x)


def _check_density(rho, tol: float) -> None:
    if rho is None:
        return
    w, _ = linalg.eigh_psd(rho, tol)
    if abs(w.sum() - 1.0) > 1e-9:
        raise PreconditionError("density matrix must have unit trace")


def caps_from_environments(e_left, e_right, tol: float = linalg.DEFAULT_TOL, source=None) -> CapPair:
    L = linalg.sqrtm_psd(e_left, tol)
    R = linalg.sqrtm_psd(e_right, tol)
    full = (
        linalg.numerical_rank(L, tol) == L.shape[0] and linalg.numerical_rank(R, tol) == R.shape[0]
    )
    return CapPair(L, R, bool(full), dict(source or {}))


def compute_caps_uniform(
    mpu: UniformMpu,
    m: int = 1,
    sigma=None,
    tau=None,
    tol: float = linalg.DEFAULT_TOL,
    check_tol: float = 1e-9,
) -> CapPair:
    """Caps from ``m`` blocked sites; ``sigma``/``tau`` default to the maximally mixed state."""
    if not mpu.is_open:
        raise ValidationError("compute caps on the open-boundary form")
    _check_density(sigma, tol)
    _check_density(tau, tol)
    d_out, d_in = mpu.bulk.shape[:2]
    e_left = _weighted_env(capped_left(mpu, m), d_out**m, d_in**m, sigma)
    e_right = _weighted_env(capped_right(mpu, m), d_out**m, d_in**m, tau)
    caps = caps_from_environments(
        e_left,
        e_right,
        tol,
        {"kind": "uniform", "m": m, "sigma": "mixed" if sigma is None else "user",
         "tau": "mixed" if tau is None else "user"},
    )
    v = build_isometry([mpu.bulk], caps.L, caps.R).dense_v
    res = linalg.unitarity_residual(v)
    if res > check_tol:
        raise ArithmeticError(f"capped bulk tensor is not an isometry (residual {res:.2e})")
    return caps


def left_environment(chain: MpoChain, k: int, sigma=None) -> np.ndarray:
    """Environment of sites ``1..k`` (1-based) seen from bond ``k``."""
    if sigma is not None:
        x = _capped_chain_left(chain, k)
        d_out = int(np.prod(chain.phys_dims[:k]))
        return _weighted_env(x, d_out, x.shape[0] // d_out, sigma)
    e = np.outer(chain.left.conj(), chain.left)
    for a in chain.tensors[:k]:
        e = np.einsum("ijnq,np,ijpr->qr", a.conj(), e, a) / a.shape[1]
    return e


def right_environment(chain: MpoChain, k: int, tau=None) -> np.ndarray:
    """Environment of sites ``k+1..N`` (1-based) seen from bond ``k``."""
    if tau is not None:
        y = _capped_chain_right(chain, k)
        d_out = int(np.prod(chain.phys_dims[k:]))
        return _weighted_env(y, d_out, y.shape[0] // d_out, tau)
    f = np.outer(chain.right.conj(), chain.right)
    for a in reversed(chain.tensors[k:]):
        f = np.einsum("ijqn,np,ijrp->qr", a.conj(), f, a) / a.shape[1]
    return f


def _capped_chain_left(chain: MpoChain, k: int) -> np.ndarray:
    x = chain.left.reshape(1, 1, -1)
    for a in chain.tensors[:k]:
        x = np.einsum("abm,ijmn->aibjn", x, a)
        s = x.shape
        x = x.reshape(s[0] * s[1], s[2] * s[3], s[4])
    return x.reshape(-1, x.shape[2])


def _capped_chain_right(chain: MpoChain, k: int) -> np.ndarray:
    y = chain.right.reshape(1, 1, -1)
    for a in reversed(chain.tensors[k:]):
        y = np.einsum("ijmn,abn->iajbm", a, y)
        s = y.shape
        y = y.reshape(s[0] * s[1], s[2] * s[3], s[4])
    return y.reshape(-1, y.shape[2])


def compute_caps_nonuniform(
    chain: MpoChain, k: int, sigma=None, tau=None, tol: float = linalg.DEFAULT_TOL
) -> CapPair:
    """Caps on bond ``k`` (between sites ``k`` and ``k+1``, 1-based, ``1 <= k < N``)."""
    if not 1 <= k < chain.n_sites:
        raise PreconditionError(f"cut {k} outside 1..{chain.n_sites - 1}")
    _check_density(sigma, tol)
    _check_density(tau, tol)
    return caps_from_environments(
        left_environment(chain, k, sigma),
        right_environment(chain, k, tau),
        tol,
        {"kind": "nonuniform", "cut": k},
    )


def build_isometry(tensors, left_cap, right_cap, site_range=(1, None)) -> IsometryBlock:
    """Dense isometry of a segment; caps are ``(out, bond)`` matrices (a boundary row is ``l[None, :]``).

    Output index order is ``(I, a, b)``: physical outputs, left cap leg, right cap leg.
    """
    tensors = list(tensors)
    lc = linalg.as_cmatrix(np.atleast_2d(left_cap))
    rc = linalg.as_cmatrix(np.atleast_2d(right_cap))
    acc = np.einsum("am,ijmn->ijan", lc, tensors[0])
    for a in tensors[1:]:
        acc = np.einsum("IJam,ijmn->IiJjan", acc, a)
        s = acc.shape
        acc = acc.reshape(s[0] * s[1], s[2] * s[3], s[4], s[5])
    acc = np.einsum("IJan,bn->IabJ", acc, rc)
    s = acc.shape
    v = acc.reshape(s[0] * s[1] * s[2], s[3])
    hi = site_range[1] if site_range[1] is not None else site_range[0] + len(tensors) - 1
    return IsometryBlock((site_range[0], hi), lc, rc, v)


def cap_inverse(cap, tol: float = linalg.DEFAULT_TOL) -> np.ndarray:
    """Inverse of a Hermitian PSD cap; below-floor eigenvalues are a precondition failure."""
    w, v = linalg.eigh_psd(cap, tol)
    if w.size == 0 or w.min() <= tol * w.max():
        raise PreconditionError("cap is rank deficient; the merge operator is undefined")
    return (v / w) @ v.conj().T


def conditioning(L, R, tol: float = linalg.DEFAULT_TOL) -> float:
    """``sqrt(tr[R^-2 (L^-2)^T])``."""
    li = cap_inverse(L, tol)
    ri = cap_inverse(R, tol)
    return float(np.sqrt(np.trace(ri @ ri @ (li @ li).T).real))


def conditioning_uniform(caps: CapPair, tol: float = linalg.DEFAULT_TOL) -> float:
    return conditioning(caps.L, caps.R, tol)


@dataclass(frozen=True)
class NonuniformConditioning:
    per_cut: tuple[float, ...]
    q: float
    bounds: tuple[float, ...]


def conditioning_nonuniform(data: SchmidtData) -> NonuniformConditioning:
    """Canonical-choice ``q_k`` with ``L = 1`` and ``R = diag(s_k)``."""
    per_cut, bounds = [], []
    s_min = data.s_min
    for s in data.schmidt:
        qk = conditioning(np.eye(s.size), np.diag(s))
        bk = float(np.sqrt(s.size) / s_min)
        if qk > bk * (1 + 1e-12):
            raise ArithmeticError(f"q_k = {qk} exceeds sqrt(D_k)/s_min = {bk}")
        per_cut.append(qk)
        bounds.append(bk)
    return NonuniformConditioning(tuple(per_cut), max(per_cut, default=1.0), tuple(bounds))
