"""Matrix-product operators and unitaries.

Index convention (fixed across the package): a site tensor is an array ``A[i, j, m, n]``
with ``i`` the physical output, ``j`` the physical input, ``m`` the left bond and ``n``
the right bond.  Contracting a chain gives ``U[I, J] = l . A^{i1 j1} ... A^{iN jN} . r``
with the first site as the most significant physical index.

The normalized Choi vector of an ``N``-site operator pairs ``(i_k, j_k)`` per site in
row-major order and carries the factor ``d^{-N/2}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import linalg
from .errors import ResourceError, ValidationError, dim_cap


def _as_tensor(a) -> np.ndarray:
    t = np.asarray(a, dtype=complex)
    if t.ndim != 4:
        raise linalg.ShapeError(f"site tensor must have rank 4, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise linalg.ShapeError("site tensor has non-finite entries")
    return t


@dataclass(frozen=True)
class MpoChain:
    """Site-dependent MPO with open boundary vectors."""

    tensors: tuple[np.ndarray, ...]
    left: np.ndarray
    right: np.ndarray

    def __init__(self, tensors, left, right):
        ts = tuple(_as_tensor(t) for t in tensors)
        if not ts:
            raise linalg.ShapeError("chain needs at least one site")
        lv = np.asarray(left, dtype=complex).reshape(-1)
        rv = np.asarray(right, dtype=complex).reshape(-1)
        if lv.size != ts[0].shape[2]:
            raise linalg.ShapeError("left boundary length does not match first bond")
        if rv.size != ts[-1].shape[3]:
            raise linalg.ShapeError("right boundary length does not match last bond")
        for k in range(len(ts) - 1):
            if ts[k].shape[3] != ts[k + 1].shape[2]:
                raise linalg.ShapeError(f"bond mismatch between sites {k} and {k + 1}")
        object.__setattr__(self, "tensors", ts)
        object.__setattr__(self, "left", lv)
        object.__setattr__(self, "right", rv)

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def phys_dims(self) -> list[int]:
        return [t.shape[0] for t in self.tensors]

    @property
    def bond_dims(self) -> list[int]:
        """Bond dimensions ``D_0, ..., D_N`` including the two boundary bonds."""
        return [self.tensors[0].shape[2]] + [t.shape[3] for t in self.tensors]

    def scaled(self, factor: complex) -> MpoChain:
        return MpoChain(self.tensors, self.left * factor, self.right)


@dataclass(frozen=True)
class UniformMpu:
    """Uniform bulk tensor with either boundary vectors ``(l, r)`` or a boundary operator ``b``.

    With vectors the N-site operator is ``l A...A r``; with ``b`` it is ``Tr[b A...A]``.
    """

    bulk: np.ndarray
    left: np.ndarray | None = None
    right: np.ndarray | None = None
    boundary_op: np.ndarray | None = None
    name: str = ""

    def __post_init__(self):
        a = _as_tensor(self.bulk)
        if a.shape[2] != a.shape[3]:
            raise linalg.ShapeError("uniform bulk needs equal left and right bond dimensions")
        object.__setattr__(self, "bulk", a)
        D = a.shape[2]
        if self.boundary_op is not None:
            b = linalg.as_cmatrix(self.boundary_op)
            if b.shape != (D, D):
                raise linalg.ShapeError("boundary operator must be D x D")
            object.__setattr__(self, "boundary_op", b)
        else:
            if self.left is None or self.right is None:
                raise linalg.ShapeError("give either (left, right) vectors or boundary_op")
            lv = np.asarray(self.left, dtype=complex).reshape(-1)
            rv = np.asarray(self.right, dtype=complex).reshape(-1)
            if lv.size != D or rv.size != D:
                raise linalg.ShapeError("boundary vectors must have length D")
            object.__setattr__(self, "left", lv)
            object.__setattr__(self, "right", rv)

    @property
    def d(self) -> int:
        return self.bulk.shape[0]

    @property
    def D(self) -> int:
        return self.bulk.shape[2]

    @property
    def is_open(self) -> bool:
        return self.boundary_op is None

    def chain(self, n_sites: int) -> MpoChain:
        if not self.is_open:
            raise ValidationError("convert b-form MPUs with boundary_to_open first")
        return MpoChain([self.bulk] * n_sites, self.left, self.right)

    def contract(self, n_sites: int, cap: int | None = None) -> np.ndarray:
        if self.is_open:
            return contract(self.chain(n_sites), cap)
        return traced_contract(self.bulk, self.boundary_op, n_sites, cap)


def _check_cap(dim: int, cap: int | None) -> None:
    limit = dim_cap() if cap is None else cap
    if dim > limit:
        raise ResourceError(f"dense dimension {dim} exceeds cap {limit}")


def _grow(acc: np.ndarray, a: np.ndarray) -> np.ndarray:
    # acc[I, J, m, n] with the open bond pair; append one site on the right.
    out = np.einsum("abmk,ijkn->aibjmn", acc, a)
    s = out.shape
    return out.reshape(s[0] * s[1], s[2] * s[3], s[4], s[5])


def contract(chain: MpoChain, cap: int | None = None) -> np.ndarray:
    """Dense ``d^N x d^N`` operator of an open chain."""
    _check_cap(int(np.prod(chain.phys_dims)), cap)
    v = chain.left.reshape(1, 1, -1)
    for a in chain.tensors:
        v = np.einsum("abm,ijmn->aibjn", v, a)
        s = v.shape
        v = v.reshape(s[0] * s[1], s[2] * s[3], s[4])
    return v @ chain.right


def traced_contract(bulk, b, n_sites: int, cap: int | None = None) -> np.ndarray:
    """``Tr[b A^{i1 j1} ... A^{iN jN}]`` as a dense matrix."""
    a = _as_tensor(bulk)
    _check_cap(a.shape[0] ** n_sites, cap)
    acc = a
    for _ in range(n_sites - 1):
        acc = _grow(acc, a)
    return np.einsum("ab,IJba->IJ", linalg.as_cmatrix(b), acc)


@dataclass(frozen=True)
class UnitarityReport:
    unitary: bool
    residual: float


def is_unitary(chain: MpoChain, tol: float = 1e-9, cap: int | None = None) -> UnitarityReport:
    u = contract(chain, cap)
    if u.shape[0] != u.shape[1]:
        return UnitarityReport(False, float("inf"))
    res = linalg.unitarity_residual(u)
    return UnitarityReport(res <= tol, res)


# -- Assumption 1 -----------------------------------------------------------------


def capped_left(mpu: UniformMpu, m: int = 1) -> np.ndarray:
    """Matrix with rows ``(I, J)`` over ``m`` sites and columns the open right bond of ``l A...A``."""
    x = mpu.left.reshape(1, 1, -1)
    for _ in range(m):
        x = np.einsum("abm,ijmn->aibjn", x, mpu.bulk)
        s = x.shape
        x = x.reshape(s[0] * s[1], s[2] * s[3], s[4])
    return x.reshape(-1, mpu.D)


def capped_right(mpu: UniformMpu, m: int = 1) -> np.ndarray:
    """Matrix with rows ``(I, J)`` over ``m`` sites and columns the open left bond of ``A...A r``."""
    y = mpu.right.reshape(1, 1, -1)
    for _ in range(m):
        y = np.einsum("ijmn,abn->iajbm", mpu.bulk, y)
        s = y.shape
        y = y.reshape(s[0] * s[1], s[2] * s[3], s[4])
    return y.reshape(-1, mpu.D)


def assumption1_ranks(mpu: UniformMpu, m: int = 1, tol: float = linalg.DEFAULT_TOL):
    if not mpu.is_open:
        raise ValidationError("Assumption 1 is checked on the open-boundary form")
    return (
        linalg.numerical_rank(capped_left(mpu, m), tol),
        linalg.numerical_rank(capped_right(mpu, m), tol),
    )


def check_assumption1(mpu: UniformMpu, tol: float = linalg.DEFAULT_TOL, m: int = 1) -> bool:
    """Full bond rank of the ``l``-capped and ``r``-capped tensors over ``m`` blocked sites."""
    rl, rr = assumption1_ranks(mpu, m, tol)
    return rl == mpu.D and rr == mpu.D


def minimal_blocking(mpu: UniformMpu, max_m: int = 3, tol: float = linalg.DEFAULT_TOL) -> int | None:
    """Smallest blocking length ``m <= max_m`` for which Assumption 1 holds, else ``None``."""
    for m in range(1, max_m + 1):
        if check_assumption1(mpu, tol, m):
            return m
    return None


# -- boundary operator to open boundary ---------------------------------------


def bond_blocks(bulk, tol: float = 0.0) -> list[list[int]]:
    """Connected components of the bond graph with an edge ``m-n`` whenever some ``A^{ij}_{mn}`` is nonzero."""
    a = _as_tensor(bulk)
    D = a.shape[2]
    adj = np.abs(a).max(axis=(0, 1)) > tol
    adj = adj | adj.T
    seen = [False] * D
    blocks = []
    for start in range(D):
        if seen[start]:
            continue
        stack, comp = [start], []
        seen[start] = True
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in np.nonzero(adj[v])[0]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(int(w))
        blocks.append(sorted(comp))
    return blocks


def boundary_to_open(mpu: UniformMpu, block_diagonal: bool = False, tol: float = 0.0) -> UniformMpu:
    """Rewrite ``Tr[b A...A]`` as ``l A~...A~ r``.

    The default doubles the bond: ``A~ = 1_D (x) A``, ``l_(a,b) = b_ab``, ``r_(a,b) = delta_ab``.
    With ``block_diagonal`` the bond is first split into the connected blocks of ``A``,
    each block ``k`` gets its own ``1_{D_k} (x) A_k`` copy and blocks on which ``b`` vanishes
    are dropped; the resulting bond dimension is ``sum_k D_k^2``.
    """
    if mpu.is_open:
        return mpu
    a, b = mpu.bulk, mpu.boundary_op
    d_out, d_in, D, _ = a.shape
    blocks = bond_blocks(a, tol) if block_diagonal else [list(range(D))]
    pieces = []
    for idx in blocks:
        ak = a[:, :, idx][:, :, :, idx]
        bk = b[np.ix_(idx, idx)]
        if block_diagonal and np.abs(bk).max() <= tol:
            continue
        k = len(idx)
        at = np.einsum("ab,ijmn->ijambn", np.eye(k), ak).reshape(d_out, d_in, k * k, k * k)
        pieces.append((at, bk.reshape(-1), np.eye(k).reshape(-1)))
    if not pieces:
        raise ValidationError("boundary operator annihilates every block")
    total = sum(p[0].shape[2] for p in pieces)
    bulk = np.zeros((d_out, d_in, total, total), dtype=complex)
    off = 0
    for at, _, _ in pieces:
        k = at.shape[2]
        bulk[:, :, off : off + k, off : off + k] = at
        off += k
    left = np.concatenate([p[1] for p in pieces])
    right = np.concatenate([p[2] for p in pieces]).astype(complex)
    return UniformMpu(bulk, left, right, name=mpu.name)


# -- canonical form ------------------------------------------------------------


@dataclass(frozen=True)
class SchmidtData:
    """Per-cut Schmidt values of the normalized Choi state and the canonical chain.

    ``schmidt[k]`` holds the values across the cut between sites ``k`` and ``k + 1``
    (0-based sites).  The canonical chain contracts to the same operator; every bond of
    it is in the Schmidt basis, so its left environments are identities and its right
    environments are ``diag(s^2)``.
    """

    schmidt: tuple[np.ndarray, ...]
    canonical: MpoChain
    norm: float = 1.0

    @property
    def s_min(self) -> float:
        if not self.schmidt:
            return 1.0
        return float(min(s.min() for s in self.schmidt))

    @property
    def bond_dims(self) -> list[int]:
        return [s.size for s in self.schmidt]


def _truncate(s: np.ndarray, tol: float) -> int:
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > tol * s[0]))


def choi_canonicalize(chain: MpoChain, tol: float = linalg.DEFAULT_TOL) -> SchmidtData:
    n = chain.n_sites
    dims = [(t.shape[0], t.shape[1]) for t in chain.tensors]
    # MPS tensors B[p, m, n] with p = (i, j); each site carries d_in^{-1/2}.
    mps = [
        t.reshape(t.shape[0] * t.shape[1], t.shape[2], t.shape[3]) / np.sqrt(t.shape[1])
        for t in chain.tensors
    ]
    mps[0] = np.einsum("m,pmn->pn", chain.left, mps[0])[:, None, :]
    mps[-1] = np.einsum("pmn,n->pm", mps[-1], chain.right)[:, :, None]

    # Right-orthonormalize from the right end, dropping null directions.
    for k in range(n - 1, 0, -1):
        p, dl, dr = mps[k].shape
        mat = mps[k].transpose(1, 0, 2).reshape(dl, p * dr)
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
        keep = max(_truncate(s, tol), 1)
        mps[k] = vh[:keep].reshape(keep, p, dr).transpose(1, 0, 2)
        mps[k - 1] = np.einsum("pmn,nk->pmk", mps[k - 1], u[:, :keep] * s[:keep])

    # Left sweep: SVD at each cut yields Schmidt values and a left-orthonormal tensor.
    values = []
    for k in range(n - 1):
        p, dl, dr = mps[k].shape
        mat = mps[k].transpose(1, 0, 2).reshape(dl * p, dr)
        u, s, vh = np.linalg.svd(mat, full_matrices=False)
        keep = _truncate(s, tol)
        if keep == 0:
            raise ValidationError("chain has zero norm; cannot canonicalize")
        mps[k] = u[:, :keep].reshape(dl, p, keep).transpose(1, 0, 2)
        values.append(s[:keep])
        mps[k + 1] = np.einsum("k,kn,pnm->pkm", s[:keep], vh[:keep], mps[k + 1])
    norm = float(np.linalg.norm(mps[-1]))
    if norm == 0.0:
        raise ValidationError("chain has zero norm; cannot canonicalize")
    values = [s / norm for s in values]
    tensors = [
        np.sqrt(dj) * b.reshape(di, dj, b.shape[1], b.shape[2]) for b, (di, dj) in zip(mps, dims)
    ]
    canonical = MpoChain(tensors, np.ones(1), np.ones(1))
    return SchmidtData(tuple(values), canonical, norm)


@dataclass(frozen=True)
class QBound:
    q: float
    bound: float
    per_cut: tuple[float, ...] = field(default_factory=tuple)


def schmidt_bound_q(data: SchmidtData) -> QBound:
    """Canonical-choice conditioning ``max_k sqrt(sum_i s_ki^-2)`` and the bound ``sqrt(D)/s_min``."""
    per_cut = tuple(float(np.sqrt(np.sum(s**-2.0))) for s in data.schmidt)
    q = max(per_cut, default=1.0)
    D = max(data.bond_dims, default=1)
    bound = float(np.sqrt(D) / data.s_min)
    if q > bound * (1 + 1e-12):
        raise ArithmeticError(f"conditioning {q} exceeds sqrt(D)/s_min = {bound}")
    return QBound(q, bound, per_cut)


def choi_schmidt_dense(u, d: int, cut: int) -> np.ndarray:
    """Schmidt values of the normalized Choi vector of ``u`` across ``cut`` sites (reference oracle)."""
    a = linalg.as_cmatrix(u)
    n = round(np.log(a.shape[0]) / np.log(d))
    t = a.reshape([d] * (2 * n))
    order = [x for k in range(n) for x in (k, n + k)]
    psi = t.transpose(order).reshape(d ** (2 * cut), -1) / d ** (n / 2)
    return np.linalg.svd(psi, compute_uv=False)


# -- JSON ------------------------------------------------------------------------


def _encode(arr) -> list[list[float]]:
    flat = np.asarray(arr, dtype=complex).reshape(-1)
    return [[float(z.real), float(z.imag)] for z in flat]


def _decode(entries) -> np.ndarray:
    a = np.asarray(entries, dtype=float)
    if a.size == 0:
        return np.zeros(0, dtype=complex)
    if a.ndim != 2 or a.shape[1] != 2:
        raise ValidationError("complex entries must be [re, im] pairs")
    return a[:, 0] + 1j * a[:, 1]


def chain_to_dict(chain: MpoChain) -> dict:
    sites = []
    for t in chain.tensors:
        do, di, dl, dr = t.shape
        sites.append({"d_out": do, "d_in": di, "D_left": dl, "D_right": dr, "entries": _encode(t)})
    return {"sites": sites, "l": _encode(chain.left), "r": _encode(chain.right)}


def chain_from_dict(data: dict) -> MpoChain:
    try:
        tensors = []
        for site in data["sites"]:
            shape = (site["d_out"], site["d_in"], site["D_left"], site["D_right"])
            vals = _decode(site["entries"])
            if vals.size != int(np.prod(shape)):
                raise ValidationError("site entry count does not match its shape")
            tensors.append(vals.reshape(shape))
        return MpoChain(tensors, _decode(data["l"]), _decode(data["r"]))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed chain JSON: {exc}") from exc
    except linalg.ShapeError as exc:
        raise ValidationError(str(exc)) from exc


def save_chain(chain: MpoChain, path: str | Path) -> None:
    Path(path).write_text(json.dumps(chain_to_dict(chain)))


def load_chain(path: str | Path) -> MpoChain:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    return chain_from_dict(data)
