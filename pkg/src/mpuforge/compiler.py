"""Tree-merge synthesis of matrix-product unitaries.

Leaves are unitary dilations of single-site isometries acting on
``(p_k, bL_k, bR_k)``; each tree level merges neighbouring blocks with
:func:`amplification.build_merge_plan`.  A merged block's circuit is
``Sequence(Parallel(left, right), U, G^l)``; the children reappear inside ``G`` through
the reflection ``R_Psi``, so the emitted tree is a DAG with shared sub-circuits.

Register order of the emitted circuit: physical sites, then ``bL_1, bR_1, ..., bL_N,
bR_N``, then LCU ancillas in creation order, then pad qubits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import circuit as ir
from . import linalg
from .amplification import MergePlan, build_merge_plan
from .errors import UnsupportedMpuError, ValidationError, dim_cap
from .isometry import CapPair, build_isometry, compute_caps_uniform, conditioning
from .lcu import LcuDecomposition, PaddingPlan, lcu_decompose, merge_operator_from, plan_padding
from .mpu import (
    MpoChain,
    UniformMpu,
    assumption1_ranks,
    boundary_to_open,
    check_assumption1,
    choi_canonicalize,
    contract,
    minimal_blocking,
)


@dataclass
class CompileOptions:
    mode: str = "uniform"
    blocking_m: int | None = None
    max_blocking: int = 3
    tol: float = linalg.DEFAULT_TOL
    unitarity_tol: float = 1e-9
    dim_cap: int | None = None
    sigma: np.ndarray | None = None
    tau: np.ndarray | None = None
    lcu_scheme: str = "reflection"
    check_sites: int = 3

    def __post_init__(self):
        if self.mode not in ("uniform", "nonuniform"):
            raise ValidationError(f"unknown compile mode {self.mode!r}")
        if self.blocking_m is not None and self.blocking_m < 1:
            raise ValidationError("blocking length must be positive")


@dataclass(frozen=True)
class MergeRecord:
    sites: tuple[int, int]
    cut: int
    level: int
    C: float
    padded_C: float
    rotations: int
    n_pads: int
    plan: MergePlan = field(repr=False, compare=False)


@dataclass
class Block:
    sites: tuple[int, int]
    node: ir.Node
    left_bond: ir.Register
    right_bond: ir.Register
    fixed: tuple[ir.Register, ...]


@dataclass
class CompileResult:
    circuit: ir.Circuit
    ancillas: list[ir.Register]
    q_report: dict
    depth: ir.DepthReport
    merges: list[MergeRecord]
    blocks_by_level: list[list[Block]] = field(repr=False, default_factory=list)

    @property
    def physical(self) -> list[ir.Register]:
        return self.circuit.by_kind("physical")


# -- shared machinery ------------------------------------------------------------------


def leaf_dilation(v: np.ndarray, d_in: int, fixed_dim: int) -> np.ndarray:
    """Unitary on ``(p, bL, bR)`` whose columns ``(j, 0, 0)`` are those of the isometry ``v``."""
    full = linalg.complete_unitary(v)
    n = full.shape[0]
    if n != d_in * fixed_dim:
        raise ValidationError("leaf isometry output must match (physical, bond, bond) dimension")
    data_cols = np.arange(d_in) * fixed_dim
    other_cols = np.setdiff1d(np.arange(n), data_cols)
    out = np.empty_like(full)
    out[:, data_cols] = full[:, :d_in]
    out[:, other_cols] = full[:, d_in:]
    return out


def _bond_registers(bond_dims: list[int]) -> tuple[list[ir.Register], list[ir.Register]]:
    n = len(bond_dims) - 1
    left = [ir.Register(f"bL{k + 1}", "bond", bond_dims[k]) for k in range(n)]
    right = [ir.Register(f"bR{k + 1}", "bond", bond_dims[k + 1]) for k in range(n)]
    return left, right


@dataclass
class _MergeSource:
    """Per-cut merge operator data; ``cut`` is the 1-based bond index."""

    lcu: dict[int, LcuDecomposition]
    pad: dict[int, PaddingPlan]


def _tree(
    leaves: list[Block],
    source: _MergeSource,
    order: list[ir.Register],
) -> tuple[Block, list[MergeRecord], list[list[Block]]]:
    records: list[MergeRecord] = []
    nested_anc: list[ir.Register] = []
    nested_pads: list[ir.Register] = []
    levels = [leaves]
    blocks = leaves
    level = 0
    while len(blocks) > 1:
        level += 1
        nxt = []
        for a in range(0, len(blocks) - 1, 2):
            x, y = blocks[a], blocks[a + 1]
            cut = x.sites[1]
            child = ir.Parallel([x.node, y.node], label=f"V[{x.sites[0]}-{y.sites[1]}]")
            fixed = x.fixed + y.fixed
            ids = {r.id for r in child.registers}
            plan = build_merge_plan(
                source.lcu[cut],
                source.pad[cut],
                child,
                targets=(x.right_bond, y.left_bond),
                fixed=fixed,
                tag=f"{x.sites[0]}-{y.sites[1]}",
                system_order=[r for r in order + nested_anc + nested_pads if r.id in ids],
            )
            nested_anc.extend(plan.ancillas)
            nested_pads.extend(plan.pads)
            node = ir.Sequence([child, plan.amplify], label=f"block[{x.sites[0]}-{y.sites[1]}]")
            nxt.append(
                Block(
                    (x.sites[0], y.sites[1]),
                    node,
                    x.left_bond,
                    y.right_bond,
                    fixed + plan.ancillas + plan.pads,
                )
            )
            records.append(
                MergeRecord(
                    (x.sites[0], y.sites[1]),
                    cut,
                    level,
                    plan.lcu.C,
                    plan.padding.padded_C,
                    plan.rotations,
                    plan.padding.n_pads,
                    plan,
                )
            )
        if len(blocks) % 2:
            nxt.append(blocks[-1])
        blocks = nxt
        levels.append(blocks)
    return blocks[0], records, levels


def _assemble(
    n_sites: int,
    phys: list[ir.Register],
    bl: list[ir.Register],
    br: list[ir.Register],
    leaf_mats: list[np.ndarray],
    source: _MergeSource,
    metadata: dict,
    q_report: dict,
) -> CompileResult:
    leaves = []
    for k in range(n_sites):
        node = ir.Dense(leaf_mats[k], [phys[k], bl[k], br[k]], label=f"leaf{k + 1}")
        leaves.append(Block((k + 1, k + 1), node, bl[k], br[k], (bl[k], br[k])))
    bonds = [r for pair in zip(bl, br) for r in pair]
    base_order = phys + bonds
    root, records, levels = _tree(leaves, source, base_order)
    ancillas = [a for rec in records for a in rec.plan.ancillas]
    pads = [p for rec in records for p in rec.plan.pads]
    registers = phys + bonds + ancillas + pads
    circ = ir.Circuit(root.node, registers, metadata)
    memo: dict[int, int] = {}
    per_level = [max(ir.node_depth(b.node, memo) for b in lvl) for lvl in levels]
    q = q_report.get("q")
    rep = ir.DepthReport(
        ir.node_depth(root.node, memo),
        per_level,
        q,
        None if q is None else 1.0 + math.log2(max(q, 1.0)),
    )
    return CompileResult(circ, bonds + ancillas + pads, q_report, rep, records, levels)


def _check_unitary_small(op_fn, d: int, n_sites: int, opts: CompileOptions) -> None:
    cap = opts.dim_cap or dim_cap()
    n = min(n_sites, opts.check_sites)
    while n > 1 and d**n > cap:
        n -= 1
    u = op_fn(n)
    res = linalg.unitarity_residual(u)
    if res > opts.unitarity_tol:
        raise ValidationError(f"input is not unitary at N={n} (residual {res:.3e})")


# -- uniform ---------------------------------------------------------------------------


def prepare_uniform(mpu: UniformMpu, opts: CompileOptions) -> tuple[UniformMpu, int, CapPair]:
    """Open-boundary form, blocking length and caps for the uniform path."""
    if not mpu.is_open:
        mpu = boundary_to_open(mpu, block_diagonal=True)
    _check_unitary_small(lambda n: mpu.contract(n, cap=opts.dim_cap), mpu.d, opts.check_sites, opts)
    if opts.blocking_m is not None:
        m = opts.blocking_m
        if not check_assumption1(mpu, opts.tol, m):
            rl, rr = assumption1_ranks(mpu, m, opts.tol)
            raise UnsupportedMpuError(
                f"Assumption 1 fails at blocking m={m}: ranks (l: {rl}, r: {rr}) < D = {mpu.D}"
            )
    else:
        m = minimal_blocking(mpu, opts.max_blocking, opts.tol)
        if m is None:
            ranks = [assumption1_ranks(mpu, k, opts.tol) for k in range(1, opts.max_blocking + 1)]
            raise UnsupportedMpuError(
                f"Assumption 1 fails for m = 1..{opts.max_blocking}: ranks (l, r) {ranks} < D = {mpu.D}"
            )
    caps = compute_caps_uniform(mpu, m, opts.sigma, opts.tau, opts.tol)
    return mpu, m, caps


def compile_uniform(mpu: UniformMpu, n_sites: int, opts: CompileOptions | None = None) -> CompileResult:
    opts = opts or CompileOptions()
    if n_sites < 1:
        raise ValidationError("need at least one site")
    mpu_open, m, caps = prepare_uniform(mpu, opts)
    a = mpu_open.bulk
    d, D = mpu_open.d, mpu_open.D
    q = conditioning(caps.L, caps.R, opts.tol)

    mop = merge_operator_from(caps.R, caps.L, opts.tol)
    lcu = lcu_decompose(mop, opts.lcu_scheme)
    pad = plan_padding(lcu.C)
    source = _MergeSource({k: lcu for k in range(1, n_sites)}, {k: pad for k in range(1, n_sites)})

    bond_dims = [1] + [D] * (n_sites - 1) + [1]
    phys = [ir.Register(f"p{k + 1}", "physical", d) for k in range(n_sites)]
    bl, br = _bond_registers(bond_dims)
    cache: dict[tuple[bool, bool], np.ndarray] = {}
    leaf_mats = []
    for k in range(n_sites):
        key = (k == 0, k == n_sites - 1)
        if key not in cache:
            lc = mpu_open.left[None, :] if key[0] else caps.L
            rc = mpu_open.right[None, :] if key[1] else caps.R
            v = build_isometry([a], lc, rc).dense_v
            cache[key] = leaf_dilation(v, a.shape[1], lc.shape[0] * rc.shape[0])
        leaf_mats.append(cache[key])
    meta = {"mode": "uniform", "n_sites": n_sites, "d": d, "bond_dim": D, "blocking_m": m,
            "name": mpu.name}
    q_report = {"q": q, "q_unif": q, "blocking_m": m, "C": lcu.C,
                "padded_C": pad.padded_C, "rotations": pad.rotations, "n_pads": pad.n_pads}
    return _assemble(n_sites, phys, bl, br, leaf_mats, source, meta, q_report)


# -- nonuniform ------------------------------------------------------------------------


def compile_nonuniform(chain: MpoChain, opts: CompileOptions | None = None) -> CompileResult:
    opts = opts or CompileOptions(mode="nonuniform")
    n_sites = chain.n_sites
    cap = opts.dim_cap or dim_cap()
    if int(np.prod(chain.phys_dims)) <= cap:
        res = linalg.unitarity_residual(contract(chain, cap=cap))
        if res > opts.unitarity_tol:
            raise ValidationError(f"input is not unitary (residual {res:.3e})")
    data = choi_canonicalize(chain, opts.tol)
    canon = data.canonical
    bond_dims = canon.bond_dims

    R = {k: np.diag(data.schmidt[k - 1]).astype(complex) for k in range(1, n_sites)}
    L = {k: np.eye(bond_dims[k], dtype=complex) for k in range(1, n_sites)}
    lcus, pads, q_cut = {}, {}, {}
    for k in range(1, n_sites):
        lcus[k] = lcu_decompose(merge_operator_from(R[k], L[k], opts.tol), opts.lcu_scheme)
        pads[k] = plan_padding(lcus[k].C)
        q_cut[k] = conditioning(L[k], R[k], opts.tol)

    phys = [ir.Register(f"p{k + 1}", "physical", canon.phys_dims[k]) for k in range(n_sites)]
    bl, br = _bond_registers(bond_dims)
    leaf_mats = []
    for k in range(n_sites):
        lc = canon.left[None, :] if k == 0 else L[k]
        rc = canon.right[None, :] if k == n_sites - 1 else R[k + 1]
        v = build_isometry([canon.tensors[k]], lc, rc).dense_v
        leaf_mats.append(leaf_dilation(v, canon.tensors[k].shape[1], lc.shape[0] * rc.shape[0]))
    q = max(q_cut.values(), default=1.0)
    meta = {"mode": "nonuniform", "n_sites": n_sites, "bond_dims": bond_dims}
    q_report = {
        "q": q,
        "q_k": [q_cut[k] for k in sorted(q_cut)],
        "s_min": data.s_min,
        "bound": float(np.sqrt(max(bond_dims)) / data.s_min),
    }
    return _assemble(n_sites, phys, bl, br, leaf_mats, _MergeSource(lcus, pads), meta, q_report)


def compile_mpu(source, n_sites: int | None = None, opts: CompileOptions | None = None) -> CompileResult:
    """Dispatch on the input form: a :class:`UniformMpu` needs ``n_sites``; a chain does not."""
    opts = opts or CompileOptions()
    if isinstance(source, UniformMpu):
        if opts.mode == "nonuniform":
            src = source if source.is_open else boundary_to_open(source, block_diagonal=True)
            return compile_nonuniform(src.chain(n_sites), opts)
        return compile_uniform(source, n_sites, opts)
    if opts.mode == "uniform":
        uni = as_uniform(source)
        if uni is None:
            raise ValidationError("chain is not translation invariant; use nonuniform mode")
        return compile_uniform(uni, source.n_sites, opts)
    return compile_nonuniform(source, opts)


def as_uniform(chain: MpoChain) -> UniformMpu | None:
    """Recognize a chain with identical bulk tensors as a uniform MPU."""
    first = chain.tensors[0]
    if first.shape[2] != first.shape[3]:
        return None
    if all(t.shape == first.shape and np.array_equal(t, first) for t in chain.tensors[1:]):
        return UniformMpu(first, chain.left, chain.right)
    return None


# -- verification helpers ----------------------------------------------------------------


def physical_action(result: CompileResult, inputs=None) -> tuple[np.ndarray, float]:
    """Simulate the circuit on physical basis inputs with every ancilla in ``|0>``.

    Returns the matrix whose column ``J`` is the ancilla-``|0>`` component of the output
    for input ``|J>``, and the maximum leaked weight outside that component.
    """
    return block_action(result.circuit.root, result.circuit.registers, inputs)


def block_action(node: ir.Node, order, inputs=None, cap: int = 2**24) -> tuple[np.ndarray, float]:
    order = list(order)
    phys_axes = [k for k, r in enumerate(order) if r.kind == "physical"]
    dims = [r.dim for r in order]
    pdims = [dims[k] for k in phys_axes]
    pdim = int(np.prod(pdims))
    cols = list(range(pdim)) if inputs is None else list(inputs)
    total = int(np.prod(dims))
    state = np.zeros(dims + [len(cols)], dtype=complex)
    for c, j in enumerate(cols):
        idx = [0] * len(dims)
        for ax, val in zip(phys_axes, np.unravel_index(j, pdims)):
            idx[ax] = val
        state[tuple(idx) + (c,)] = 1.0
    out = ir.apply_state(node, state.reshape(total, len(cols)), order, cap=cap)
    out = out.reshape(dims + [len(cols)])
    sl = tuple(slice(None) if k in phys_axes else 0 for k in range(len(dims)))
    kept = out[sl].reshape(pdim, len(cols))
    weights = np.einsum("ij,ij->j", kept.conj(), kept).real
    leak = float(np.max(1.0 - weights)) if len(cols) else 0.0
    return kept, max(leak, 0.0)


def equivalence(result: CompileResult, target: np.ndarray) -> tuple[float, float]:
    """``(1 - |Tr(U^dagger V)|/dim, leakage)`` over all physical basis inputs."""
    v, leak = physical_action(result)
    return linalg.phase_invariant_distance(target, v), leak


# -- depth scaling -------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingRow:
    n_sites: int
    depth: int
    model: float
    ratio: float


@dataclass(frozen=True)
class ScalingReport:
    name: str
    q: float
    exponent: float
    rows: tuple[ScalingRow, ...]

    @property
    def spread(self) -> float:
        ratios = [r.ratio for r in self.rows]
        return max(ratios) / min(ratios)

    def bounded(self, constant: float = 4.0) -> bool:
        return self.spread <= constant


def _depth_only(args) -> tuple[int, int, float]:
    mpu, n, opts = args
    res = compile_uniform(mpu, n, opts)
    return n, res.depth.depth, res.q_report["q"]


def depth_scaling_report(
    mpu: UniformMpu, n_list, opts: CompileOptions | None = None, jobs: int = 1
) -> ScalingReport:
    """Depth from the IR against ``N^{1 + log2 q}``; nothing is simulated."""
    opts = opts or CompileOptions()
    work = [(mpu, int(n), opts) for n in n_list]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_depth_only, work))
    else:
        out = [_depth_only(w) for w in work]
    q = out[0][2]
    exponent = 1.0 + math.log2(max(q, 1.0))
    rows = tuple(ScalingRow(n, d, float(n**exponent), d / n**exponent) for n, d, _ in out)
    return ScalingReport(mpu.name or "mpu", q, exponent, rows)
