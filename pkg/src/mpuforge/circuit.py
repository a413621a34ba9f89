"""Hierarchical circuit IR over typed qudit registers.

Nodes are immutable.  Children act in list order (the first child acts first).  A node
may be shared by several parents; inverses are cached so that ``inv(inv(x)) is x``.

Depth model: every primitive costs 1, ``Sequence`` adds, ``Parallel`` takes the
maximum and ``Repeat`` multiplies its body by the repetition count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import linalg
from .errors import DEFAULT_STATE_CAP, ResourceError, ValidationError, dim_cap

KINDS = ("physical", "bond", "lcu_ancilla", "pad")
FORMAT_VERSION = "v1"


@dataclass(frozen=True)
class Register:
    id: str
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown register kind {self.kind!r}")
        if self.dim < 1:
            raise ValidationError("register dimension must be positive")


class Node:
    _inverse: Node | None = None

    @property
    def registers(self) -> frozenset[Register]:
        raise NotImplementedError

    def inverse(self) -> Node:
        if self._inverse is None:
            inv = self._make_inverse()
            self._inverse = inv
            if inv is not self:
                inv._inverse = self
        return self._inverse

    def _make_inverse(self) -> Node:
        raise NotImplementedError

    def apply(self, t: np.ndarray, axes: dict[str, int]) -> np.ndarray:
        raise NotImplementedError


# -- primitives ---------------------------------------------------------------------


class Primitive(Node):
    targets: tuple[Register, ...] = ()

    @cached_property
    def registers(self) -> frozenset[Register]:
        return frozenset(self.all_registers())

    def all_registers(self) -> tuple[Register, ...]:
        return self.targets

    @property
    def dim(self) -> int:
        return int(np.prod([r.dim for r in self.all_registers()]))

    @property
    def cost(self) -> int:
        """Depth charged to this primitive."""
        return 1

    def matrix(self) -> np.ndarray:
        """Dense unitary on ``all_registers()`` in listed order."""
        regs = self.all_registers()
        eye = np.eye(self.dim, dtype=complex).reshape([r.dim for r in regs] + [self.dim])
        out = self.apply(eye, {r.id: k for k, r in enumerate(regs)})
        return out.reshape(self.dim, self.dim)


def _front(t: np.ndarray, axes: list[int]) -> tuple[np.ndarray, tuple[int, ...]]:
    moved = np.moveaxis(t, axes, list(range(len(axes))))
    return moved, moved.shape


def _back(t: np.ndarray, shape, axes: list[int]) -> np.ndarray:
    return np.moveaxis(t.reshape(shape), list(range(len(axes))), axes)


class Dense(Primitive):
    """An explicit unitary on an ordered register list."""

    def __init__(self, matrix, targets, label: str = "", adjoint: bool = False, check_tol=1e-10):
        self.base = np.asarray(matrix, dtype=complex)
        self.targets = tuple(targets)
        self.label = label
        self.adjoint = adjoint
        d = int(np.prod([r.dim for r in self.targets]))
        if self.base.shape != (d, d):
            raise ValidationError(
                f"{label or 'primitive'}: matrix shape {self.base.shape} does not match registers ({d})"
            )
        if check_tol is not None and linalg.unitarity_residual(self.base) > check_tol:
            raise ValidationError(f"{label or 'primitive'}: matrix is not unitary")

    def matrix(self) -> np.ndarray:
        return self.base.conj().T if self.adjoint else self.base

    def _make_inverse(self) -> Node:
        return Dense(self.base, self.targets, self.label, not self.adjoint, check_tol=None)

    def apply(self, t, axes):
        ax = [axes[r.id] for r in self.targets]
        moved, shape = _front(t, ax)
        d = int(np.prod(shape[: len(ax)]))
        out = self.matrix() @ moved.reshape(d, -1)
        return _back(out, shape, ax)


class Select(Primitive):
    """``sum_i W_i (x) |i><i|_control``: applies ``unitaries[i]`` to the targets when the control reads ``i``."""

    def __init__(self, unitaries, targets, control: Register, label: str = "", adjoint=False):
        self.base = tuple(np.asarray(u, dtype=complex) for u in unitaries)
        self.targets = tuple(targets)
        self.control = control
        self.label = label
        self.adjoint = adjoint
        d = int(np.prod([r.dim for r in self.targets]))
        if len(self.base) != control.dim:
            raise ValidationError("select needs one unitary per control value")
        for u in self.base:
            if u.shape != (d, d):
                raise ValidationError("select unitary does not match its target registers")

    def all_registers(self):
        return self.targets + (self.control,)

    def _make_inverse(self):
        return Select(self.base, self.targets, self.control, self.label, not self.adjoint)

    def apply(self, t, axes):
        ax = [axes[self.control.id]] + [axes[r.id] for r in self.targets]
        moved, shape = _front(t, ax)
        d = int(np.prod(shape[1 : len(ax)]))
        blocks = moved.reshape(shape[0], d, -1)
        out = np.empty_like(blocks)
        for i, u in enumerate(self.base):
            out[i] = (u.conj().T if self.adjoint else u) @ blocks[i]
        return _back(out, shape, ax)


class PhaseFlag(Primitive):
    """Diagonal sign flip.

    The sign is ``-1`` exactly when every control register reads 0 and the targets are
    all zero (``flip_zero``) or not all zero (otherwise).  ``PhaseFlag(A)`` is the
    reflection ``2|0><0|_A - 1``; ``PhaseFlag(A, flip_zero=True)`` is its negative.
    """

    def __init__(self, targets, controls=(), flip_zero: bool = False, label: str = ""):
        self.targets = tuple(targets)
        self.controls = tuple(controls)
        self.flip_zero = flip_zero
        self.label = label

    def all_registers(self):
        return self.targets + self.controls

    def _make_inverse(self):
        return self

    @property
    def cost(self) -> int:
        # a multi-controlled phase over w nontrivial registers is charged depth w
        return max(1, sum(1 for r in self.all_registers() if r.dim > 1))

    def sign_mask(self) -> np.ndarray:
        tshape = [r.dim for r in self.targets]
        zero_t = np.zeros(tshape, dtype=bool)
        zero_t[(0,) * len(tshape)] = True
        flip = zero_t if self.flip_zero else ~zero_t
        cshape = [r.dim for r in self.controls]
        zero_c = np.zeros(cshape, dtype=bool)
        zero_c[(0,) * len(cshape)] = True
        mask = np.logical_and.outer(zero_c, flip) if cshape else flip
        return np.where(mask, -1.0, 1.0)

    def apply(self, t, axes):
        regs = self.controls + self.targets
        ax = [axes[r.id] for r in regs]
        moved, shape = _front(t, ax)
        sign = self.sign_mask().reshape(shape[: len(ax)] + (1,) * (moved.ndim - len(ax)))
        return np.moveaxis(moved * sign, list(range(len(ax))), ax)


# -- composites ---------------------------------------------------------------------


class Sequence(Node):
    def __init__(self, children, label: str = ""):
        self.children = tuple(children)
        self.label = label

    @cached_property
    def registers(self):
        return frozenset().union(*(c.registers for c in self.children))

    def _make_inverse(self):
        return Sequence([c.inverse() for c in reversed(self.children)], self.label)

    def apply(self, t, axes):
        for c in self.children:
            t = c.apply(t, axes)
        return t


class Parallel(Node):
    def __init__(self, children, label: str = ""):
        self.children = tuple(children)
        self.label = label
        seen: set[Register] = set()
        for c in self.children:
            if seen & c.registers:
                raise ValidationError("parallel children must act on disjoint registers")
            seen |= c.registers

    @cached_property
    def registers(self):
        return frozenset().union(*(c.registers for c in self.children))

    def _make_inverse(self):
        return Parallel([c.inverse() for c in self.children], self.label)

    def apply(self, t, axes):
        for c in self.children:
            t = c.apply(t, axes)
        return t


class Repeat(Node):
    def __init__(self, body: Node, times: int, label: str = ""):
        if times < 0:
            raise ValidationError("repeat count must be non-negative")
        self.body = body
        self.times = int(times)
        self.label = label

    @property
    def registers(self):
        return self.body.registers

    def _make_inverse(self):
        return Repeat(self.body.inverse(), self.times, self.label)

    def apply(self, t, axes):
        for _ in range(self.times):
            t = self.body.apply(t, axes)
        return t


def children_of(node: Node) -> tuple[Node, ...]:
    if isinstance(node, (Sequence, Parallel)):
        return node.children
    if isinstance(node, Repeat):
        return (node.body,)
    return ()


# -- depth ----------------------------------------------------------------------------


@dataclass
class DepthReport:
    depth: int
    per_level: list[int] = field(default_factory=list)
    q_used: float | None = None
    fitted_exponent: float | None = None


def node_depth(node: Node, memo: dict[int, int] | None = None) -> int:
    memo = {} if memo is None else memo
    key = id(node)
    if key in memo:
        return memo[key]
    if isinstance(node, Primitive):
        val = node.cost
    elif isinstance(node, Sequence):
        val = sum(node_depth(c, memo) for c in node.children)
    elif isinstance(node, Parallel):
        val = max((node_depth(c, memo) for c in node.children), default=0)
    elif isinstance(node, Repeat):
        val = node.times * node_depth(node.body, memo)
    else:
        raise ValidationError(f"malformed circuit node {type(node).__name__}")
    memo[key] = val
    return val


def depth(node: Node) -> DepthReport:
    return DepthReport(node_depth(node))


# -- simulation -----------------------------------------------------------------------


def _axes(register_order) -> dict[str, int]:
    ids = [r.id for r in register_order]
    if len(set(ids)) != len(ids):
        raise ValidationError("register ids must be unique")
    return {rid: k for k, rid in enumerate(ids)}


def _check_covered(node: Node, register_order) -> None:
    missing = {r.id for r in node.registers} - {r.id for r in register_order}
    if missing:
        raise ValidationError(f"register order misses {sorted(missing)}")


FUSE_DIM = 1024


def _fused_matrix(node: Node, fuse_dim: int) -> tuple[np.ndarray, tuple[Register, ...]]:
    cached = node.__dict__.get("_fused")
    if cached is None:
        inv = node._inverse
        if inv is not None and "_fused" in inv.__dict__:
            m, regs = inv.__dict__["_fused"]
            cached = (m.conj().T, regs)
        else:
            regs = tuple(sorted(node.registers, key=lambda r: r.id))
            n = int(np.prod([r.dim for r in regs]))
            eye = np.eye(n, dtype=complex).reshape([r.dim for r in regs] + [n])
            out = _apply(node, eye, {r.id: k for k, r in enumerate(regs)}, fuse_dim, top=True)
            cached = (out.reshape(n, n), regs)
        node.__dict__["_fused"] = cached
    return cached


def _apply(node: Node, t: np.ndarray, axes: dict[str, int], fuse_dim: int, top: bool = False) -> np.ndarray:
    if isinstance(node, Primitive):
        return node.apply(t, axes)
    if not top and fuse_dim and int(np.prod([r.dim for r in node.registers])) <= fuse_dim:
        m, regs = _fused_matrix(node, fuse_dim)
        ax = [axes[r.id] for r in regs]
        moved, shape = _front(t, ax)
        return _back(m @ moved.reshape(m.shape[0], -1), shape, ax)
    if isinstance(node, Repeat):
        for _ in range(node.times):
            t = _apply(node.body, t, axes, fuse_dim)
        return t
    for c in children_of(node):
        t = _apply(c, t, axes, fuse_dim)
    return t


def apply_state(
    node: Node, state, register_order, cap: int = DEFAULT_STATE_CAP, fuse_dim: int = FUSE_DIM
) -> np.ndarray:
    """Apply ``node`` to a state vector (or a matrix whose columns are states).

    Composite nodes acting on at most ``fuse_dim`` basis states are contracted once to a
    dense matrix and cached on the node; ``fuse_dim=0`` walks the tree gate by gate.
    """
    register_order = list(register_order)
    _check_covered(node, register_order)
    dims = [r.dim for r in register_order]
    total = int(np.prod(dims))
    psi = np.asarray(state, dtype=complex)
    batch = psi.ndim == 2
    cols = psi.shape[1] if batch else 1
    if psi.shape[0] != total:
        raise ValidationError(f"state has {psi.shape[0]} entries, registers need {total}")
    if total * cols > cap:
        raise ResourceError(f"state size {total * cols} exceeds cap {cap}")
    t = psi.reshape(dims + [cols])
    t = _apply(node, t, _axes(register_order), fuse_dim)
    out = t.reshape(total, cols)
    return out if batch else out[:, 0]


def to_unitary(node: Node, register_order, cap: int | None = None) -> np.ndarray:
    register_order = list(register_order)
    total = int(np.prod([r.dim for r in register_order]))
    limit = dim_cap() if cap is None else cap
    if total > limit:
        raise ResourceError(f"dimension {total} exceeds cap {limit}")
    return apply_state(node, np.eye(total, dtype=complex), register_order, cap=max(total * total, 1))


# -- serialization ----------------------------------------------------------------


@dataclass
class Circuit:
    """A root node together with its register declaration order and free-form metadata."""

    root: Node
    registers: list[Register]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        _check_covered(self.root, self.registers)

    def by_kind(self, kind: str) -> list[Register]:
        return [r for r in self.registers if r.kind == kind]


def _enc(a: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(a).reshape(-1)]


def _dec(entries, n: int) -> np.ndarray:
    a = np.asarray(entries, dtype=float).reshape(-1, 2)
    return (a[:, 0] + 1j * a[:, 1]).reshape(n, n)


def circuit_to_dict(circ: Circuit) -> dict:
    nodes: list[dict] = []
    arrays: list[dict] = []
    node_ids: dict[int, int] = {}
    array_ids: dict[int, int] = {}

    def arr(a: np.ndarray) -> int:
        key = id(a)
        if key not in array_ids:
            array_ids[key] = len(arrays)
            arrays.append({"n": a.shape[0], "entries": _enc(a)})
        return array_ids[key]

    def visit(node: Node) -> int:
        key = id(node)
        if key in node_ids:
            return node_ids[key]
        if isinstance(node, Dense):
            rec = {"type": "dense", "targets": [r.id for r in node.targets],
                   "array": arr(node.base), "adjoint": node.adjoint}
        elif isinstance(node, Select):
            rec = {"type": "select", "targets": [r.id for r in node.targets],
                   "control": node.control.id, "arrays": [arr(u) for u in node.base],
                   "adjoint": node.adjoint}
        elif isinstance(node, PhaseFlag):
            rec = {"type": "phase_flag", "targets": [r.id for r in node.targets],
                   "controls": [r.id for r in node.controls], "flip_zero": node.flip_zero}
        elif isinstance(node, (Sequence, Parallel)):
            rec = {"type": "sequence" if isinstance(node, Sequence) else "parallel",
                   "children": [visit(c) for c in node.children]}
        elif isinstance(node, Repeat):
            rec = {"type": "repeat", "body": visit(node.body), "times": node.times}
        else:
            raise ValidationError(f"cannot serialize {type(node).__name__}")
        rec["label"] = getattr(node, "label", "")
        node_ids[key] = len(nodes)
        nodes.append(rec)
        return node_ids[key]

    root = visit(circ.root)
    return {
        "version": FORMAT_VERSION,
        "registers": [{"id": r.id, "kind": r.kind, "dim": r.dim} for r in circ.registers],
        "arrays": arrays,
        "nodes": nodes,
        "root": root,
        "metadata": circ.metadata,
    }


def circuit_from_dict(data: dict) -> Circuit:
    if data.get("version") != FORMAT_VERSION:
        raise ValidationError(f"unsupported circuit format {data.get('version')!r}")
    try:
        regs = [Register(r["id"], r["kind"], int(r["dim"])) for r in data["registers"]]
        by_id = {r.id: r for r in regs}
        arrays = [_dec(a["entries"], int(a["n"])) for a in data["arrays"]]
        built: list[Node] = []
        for rec in data["nodes"]:
            kind, label = rec["type"], rec.get("label", "")
            if kind == "dense":
                node = Dense(arrays[rec["array"]], [by_id[i] for i in rec["targets"]], label,
                             rec["adjoint"], check_tol=None)
            elif kind == "select":
                node = Select([arrays[i] for i in rec["arrays"]], [by_id[i] for i in rec["targets"]],
                              by_id[rec["control"]], label, rec["adjoint"])
            elif kind == "phase_flag":
                node = PhaseFlag([by_id[i] for i in rec["targets"]],
                                 [by_id[i] for i in rec["controls"]], rec["flip_zero"], label)
            elif kind == "sequence":
                node = Sequence([built[i] for i in rec["children"]], label)
            elif kind == "parallel":
                node = Parallel([built[i] for i in rec["children"]], label)
            elif kind == "repeat":
                node = Repeat(built[rec["body"]], rec["times"], label)
            else:
                raise ValidationError(f"unknown node type {kind!r}")
            built.append(node)
        return Circuit(built[data["root"]], regs, data.get("metadata", {}))
    except (KeyError, IndexError, TypeError) as exc:
        raise ValidationError(f"malformed circuit JSON: {exc}") from exc


def save_circuit(circ: Circuit, path: str | Path) -> None:
    Path(path).write_text(json.dumps(circuit_to_dict(circ)))


def load_circuit(path: str | Path) -> Circuit:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    return circuit_from_dict(data)
