"""Deterministic merging: LCU prepare/select plus subspace amplitude amplification.

For a merge with LCU ``M' = sum_i c_i W_i`` (pads included) and padded normalization
``C'``:

* ``U = B^dagger W^ctrl B`` with ``B|0> = C'^{-1/2} sum_i sqrt(c_i) |i>``;
* ``R_Phi = 1 (x) (2|0><0|_A - 1)``;
* ``R_Psi = R_Phi . V~ F V~^dagger`` where ``V~`` is the child circuit and ``F`` flips
  the sign when ``A`` reads 0 while some fixed input of ``V~`` does not;
* ``G = -U R_Psi U^dagger R_Phi``, applied ``l`` times after ``U``.

The pad factors ``cos(phi) 1 + i sin(phi) Z`` are realized as a two-term LCU on their
own ancilla qubit, so ``B`` and ``W^ctrl`` factor over the ancilla registers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import circuit as ir
from . import linalg
from .errors import PreconditionError
from .lcu import LcuDecomposition, PaddingPlan

SUBSPACE_TOL = 1e-8

_IZ = np.diag([1j, -1j])


@dataclass(frozen=True)
class MergePlan:
    lcu: LcuDecomposition
    padding: PaddingPlan
    child: ir.Node
    targets: tuple[ir.Register, ...]
    fixed: tuple[ir.Register, ...]
    ancillas: tuple[ir.Register, ...]
    pads: tuple[ir.Register, ...]
    prepare: ir.Node
    select: ir.Node
    U: ir.Node
    R_phi: ir.Node
    R_psi: ir.Node
    G: ir.Node
    amplify: ir.Node
    system_order: tuple[ir.Register, ...]

    @property
    def rotations(self) -> int:
        return self.padding.rotations

    @property
    def register_order(self) -> list[ir.Register]:
        return list(self.system_order) + list(self.pads) + list(self.ancillas)

    @property
    def prepare_vector(self) -> np.ndarray:
        """``B|0>`` over the joint ancilla register (first ancilla most significant)."""
        vec = np.sqrt(self.lcu.coefficients / self.lcu.C)
        for phi in self.padding.phases:
            w = np.array([math.cos(phi), math.sin(phi)])
            vec = np.kron(vec, np.sqrt(w / w.sum()))
        return vec.astype(complex)

    def prepare_matrix(self) -> np.ndarray:
        return ir.to_unitary(self.prepare, self.ancillas)


def build_merge_plan(
    lcu: LcuDecomposition,
    pad: PaddingPlan,
    child: ir.Node,
    targets,
    fixed,
    tag: str = "m",
    system_order=None,
) -> MergePlan:
    """Assemble the merge circuit pieces around the child circuit ``V~``.

    ``targets`` are the registers ``M`` acts on; ``fixed`` are the child's inputs that
    must read 0 for its output to lie in the merge subspace.
    """
    targets = tuple(targets)
    fixed = tuple(fixed)
    if system_order is None:
        system_order = sorted(child.registers, key=lambda r: r.id)
    tdim = int(np.prod([r.dim for r in targets]))
    if lcu.dim != tdim:
        raise PreconditionError(f"LCU dimension {lcu.dim} does not match target registers ({tdim})")

    anc = ir.Register(f"anc[{tag}]", "lcu_ancilla", lcu.n_terms)
    pads, pad_anc = [], []
    for k, _ in enumerate(pad.phases):
        pads.append(ir.Register(f"pad[{tag}].{k}", "pad", 2))
        pad_anc.append(ir.Register(f"anc[{tag}].{k}", "lcu_ancilla", 2))
    ancillas = (anc, *pad_anc)

    b_main = linalg.householder_unitary(np.sqrt(lcu.coefficients / lcu.C))
    prep = [ir.Dense(b_main, [anc], label=f"B[{tag}]")]
    sel = [ir.Select(lcu.unitaries, targets, anc, label=f"W[{tag}]")]
    for phi, p, a in zip(pad.phases, pads, pad_anc):
        w = np.array([math.cos(phi), math.sin(phi)])
        prep.append(ir.Dense(linalg.householder_unitary(np.sqrt(w / w.sum())), [a], label=f"B[{tag}]"))
        sel.append(ir.Select([np.eye(2), _IZ], [p], a, label=f"padW[{tag}]"))
    prepare = ir.Parallel(prep, label=f"prepare[{tag}]")
    select = ir.Parallel(sel, label=f"select[{tag}]")
    U = ir.Sequence([prepare, select, prepare.inverse()], label=f"U[{tag}]")

    R_phi = ir.PhaseFlag(ancillas, label=f"R_phi[{tag}]")
    minus_R_phi = ir.PhaseFlag(ancillas, flip_zero=True, label=f"-R_phi[{tag}]")
    F = ir.PhaseFlag(fixed, controls=ancillas, label=f"F[{tag}]")
    R_psi = ir.Sequence([child.inverse(), F, child, R_phi], label=f"R_psi[{tag}]")
    G = ir.Sequence([minus_R_phi, U.inverse(), *R_psi.children, U], label=f"G[{tag}]")
    steps = [U] if pad.rotations == 0 else [U, ir.Repeat(G, pad.rotations, label=f"G^l[{tag}]")]
    amplify = ir.Sequence(steps, label=f"amplify[{tag}]")
    return MergePlan(
        lcu=lcu,
        padding=pad,
        child=child,
        targets=targets,
        fixed=fixed,
        ancillas=ancillas,
        pads=tuple(pads),
        prepare=prepare,
        select=select,
        U=U,
        R_phi=R_phi,
        R_psi=R_psi,
        G=G,
        amplify=amplify,
        system_order=tuple(system_order),
    )


def grover_step(plan: MergePlan, cap: int | None = None) -> np.ndarray:
    """Dense ``G`` on ``plan.register_order``."""
    return ir.to_unitary(plan.G, plan.register_order, cap)


def _zero_mask(order, regs) -> np.ndarray:
    """Boolean mask over the state (in ``order``) selecting basis states with ``regs`` all zero."""
    dims = [r.dim for r in order]
    ids = {r.id for r in regs}
    mask = np.ones(dims, dtype=bool)
    for ax, r in enumerate(order):
        if r.id in ids:
            sl = [slice(None)] * len(dims)
            sl[ax] = slice(1, None)
            mask[tuple(sl)] = False
    return mask.reshape(-1)


def subspace_leakage(plan: MergePlan, state) -> float:
    """Weight of ``state`` outside ``S (x) |0>_A`` relative to its norm."""
    order = plan.register_order
    back = ir.apply_state(plan.child.inverse(), state, order)
    good = _zero_mask(order, plan.fixed + plan.ancillas + plan.pads)
    total = float(np.vdot(back, back).real)
    return float(np.vdot(back[~good], back[~good]).real / total) if total else 0.0


def deterministic_merge(plan: MergePlan, state) -> np.ndarray:
    """``G^l U`` applied to ``|psi>_S |0>_A``; the result is ``(M'|psi>) |0>_A``."""
    psi = np.asarray(state, dtype=complex)
    leak = subspace_leakage(plan, psi)
    if leak > SUBSPACE_TOL:
        raise PreconditionError(f"input leaves the merge subspace (weight {leak:.2e})")
    return ir.apply_state(plan.amplify, psi, plan.register_order)


def ancilla_zero_weight(plan: MergePlan, state) -> float:
    """Squared norm of the ancilla-``|0>`` component of ``state``."""
    mask = _zero_mask(plan.register_order, plan.ancillas)
    s = np.asarray(state)
    return float(np.vdot(s[mask], s[mask]).real)
