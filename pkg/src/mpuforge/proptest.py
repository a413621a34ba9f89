"""Lemma-by-lemma property suites with replayable cases and JSON counterexample dumps.

A case is ``(tag, descriptor, seed, tol, kind)``; the descriptor names a corpus entry and
a size, e.g. ``"multicontrol-z:4"``.  Every check returns a non-negative defect that must
not exceed ``tol``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import circuit as ir
from . import corpus, linalg
from .amplification import ancilla_zero_weight, deterministic_merge
from .compiler import CompileOptions, CompileResult, compile_nonuniform, compile_uniform, equivalence
from .isometry import build_isometry, compute_caps_nonuniform, compute_caps_uniform, conditioning
from .lcu import lcu_decompose, merge_operator_from, plan_padding
from .mpu import MpoChain, UniformMpu, boundary_to_open, choi_canonicalize, contract, minimal_blocking

TAGS = ("S1", "S2", "S3", "S4", "S5", "S6", "Thm1", "Thm1'", "Thm2")
ALIASES = {"CorS4": "S4", "Cor.S4": "S4", "Thm1′": "Thm1'"}


@dataclass(frozen=True)
class PropertyCase:
    tag: str
    descriptor: str
    seed: int = 0
    tol: float = 1e-9
    kind: str = "derived"


@dataclass
class CaseResult:
    case: PropertyCase
    value: float
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value)) and self.value <= self.case.tol


@dataclass
class SuiteResult:
    tag: str
    results: list[CaseResult]
    dumped: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> list[CaseResult]:
        return [r for r in self.results if not r.passed]


# -- sources -----------------------------------------------------------------------------


def _parse(descriptor: str) -> tuple[str, int, list[str]]:
    name, *rest = descriptor.split(":")
    n = int(rest[0]) if rest else 2
    return name, n, rest[1:]


def source(descriptor: str, seed: int = 0):
    """``(object, n_sites)`` for a descriptor; Lee-Yang comes back in open form."""
    name, n, _ = _parse(descriptor)
    obj = corpus.corpus_entry(name, n, seed)
    return obj, (obj.n_sites if isinstance(obj, MpoChain) else n)


def source_chain(descriptor: str, seed: int = 0) -> MpoChain:
    obj, n = source(descriptor, seed)
    return obj.chain(n) if isinstance(obj, UniformMpu) else obj


@lru_cache(maxsize=32)
def compiled(descriptor: str, seed: int = 0, mode: str = "auto") -> CompileResult:
    obj, n = source(descriptor, seed)
    if mode == "nonuniform" or (mode == "auto" and isinstance(obj, MpoChain)):
        chain = obj.chain(n) if isinstance(obj, UniformMpu) else obj
        return compile_nonuniform(chain, CompileOptions(mode="nonuniform"))
    return compile_uniform(obj, n)


def _random_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _subspace_state(plan, rng: np.random.Generator) -> np.ndarray:
    """``V~ (|x> |0>)`` for a random physical input ``x``: a state in the merge subspace."""
    order = plan.register_order
    dims = [r.dim for r in order]
    phys = [k for k, r in enumerate(order) if r.kind == "physical"]
    pdims = [dims[k] for k in phys]
    x = _random_vector(int(np.prod(pdims)), rng).reshape(pdims)
    state = np.zeros(dims, dtype=complex)
    idx = tuple(slice(None) if k in phys else 0 for k in range(len(dims)))
    state[idx] = x
    return ir.apply_state(plan.child, state.reshape(-1), order)


# -- S1: nonuniform local isometries ---------------------------------------------------------


def _segment_residuals(chain: MpoChain, caps: dict[int, tuple[np.ndarray, np.ndarray]]) -> float:
    n = chain.n_sites
    worst = 0.0
    for j in range(1, n + 1):
        for k in range(j, n + 1):
            lc = chain.left[None, :] if j == 1 else caps[j - 1][0]
            rc = chain.right[None, :] if k == n else caps[k][1]
            v = build_isometry(chain.tensors[j - 1 : k], lc, rc).dense_v
            worst = max(worst, linalg.unitarity_residual(v))
    return worst


def check_s1(case: PropertyCase) -> CaseResult:
    chain = source_chain(case.descriptor, case.seed)
    _, _, extra = _parse(case.descriptor)
    if "gauge" in extra:
        return _gauge_case(case, chain)
    if "canonical" in extra:
        data = choi_canonicalize(chain)
        canon = data.canonical
        caps = {k: (np.eye(canon.bond_dims[k]), np.diag(data.schmidt[k - 1])) for k in range(1, canon.n_sites)}
        return CaseResult(case, _segment_residuals(canon, caps), {"caps": "canonical"})
    caps = {}
    for k in range(1, chain.n_sites):
        c = compute_caps_nonuniform(chain, k)
        caps[k] = (c.L, c.R)
    return CaseResult(case, _segment_residuals(chain, caps), {"caps": "environment"})


def _invertible(dim: int, rng: np.random.Generator) -> np.ndarray:
    x = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return np.eye(dim) + 0.3 * x / np.linalg.norm(x, 2)


def gauge_transform(chain: MpoChain, k: int, x: np.ndarray) -> MpoChain:
    """``A_k -> A_k X`` and ``A_{k+1} -> X^{-1} A_{k+1}`` on bond ``k`` (1-based)."""
    xi = np.linalg.inv(x)
    tensors = list(chain.tensors)
    tensors[k - 1] = np.einsum("ijmn,np->ijmp", tensors[k - 1], x)
    tensors[k] = np.einsum("pm,ijmn->ijpn", xi, tensors[k])
    return MpoChain(tensors, chain.left, chain.right)


def _q_cuts(chain: MpoChain) -> list[float]:
    out = []
    for k in range(1, chain.n_sites):
        c = compute_caps_nonuniform(chain, k)
        out.append(conditioning(c.L, c.R))
    return out


def _gauge_case(case: PropertyCase, chain: MpoChain) -> CaseResult:
    rng = np.random.default_rng(case.seed)
    before = _q_cuts(chain)
    gauged = chain
    for k in range(1, chain.n_sites):
        gauged = gauge_transform(gauged, k, _invertible(chain.bond_dims[k], rng))
    after = _q_cuts(gauged)
    rel = max((abs(a - b) / b for a, b in zip(after, before)), default=0.0)
    return CaseResult(case, rel, {"q_k": before, "q_k_gauged": after})


# -- S2: LCU optimality ----------------------------------------------------------------------


def check_s2(case: PropertyCase) -> CaseResult:
    name, n, extra = _parse(case.descriptor)
    scheme = extra[0] if extra else "reflection"
    if name == "random":
        rng = np.random.default_rng(case.seed)
        mats = []
        for _ in range(n):
            d = int(rng.integers(1, 17))
            mats.append(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
    elif name == "projector":
        mats = [np.diag([1.0] + [0.0] * (n - 1))]
    else:
        merges = compiled(f"{name}:{n}", case.seed).merges
        mats = [merge_matrix(f"{name}:{n}", case.seed, k) for k in range(len(merges))]
    worst = 0.0
    for m in mats:
        dec = lcu_decompose(m, scheme)
        worst = max(worst, abs(dec.C - linalg.trace_norm(m)), np.abs(dec.reconstruct() - m).max())
    return CaseResult(case, worst, {"matrices": len(mats), "scheme": scheme})


def merge_matrix(descriptor: str, seed: int, index: int) -> np.ndarray:
    """The merge operator of merge ``index`` rebuilt from the compile's caps."""
    res = compiled(descriptor, seed)
    rec = res.merges[index]
    if res.circuit.metadata["mode"] == "uniform":
        obj, _ = source(descriptor, seed)
        mpu = obj if obj.is_open else boundary_to_open(obj, block_diagonal=True)
        caps = compute_caps_uniform(mpu, res.q_report["blocking_m"])
        return merge_operator_from(caps.R, caps.L)
    data = choi_canonicalize(source_chain(descriptor, seed))
    s = data.schmidt[rec.cut - 1]
    return merge_operator_from(np.diag(s), np.eye(s.size))


# -- S3 / S4: amplification --------------------------------------------------------------------


def _pick_merges(res: CompileResult, which: str):
    if which == "top":
        return [res.merges[-1]]
    return list(res.merges)


def check_s3(case: PropertyCase) -> CaseResult:
    """``R_Psi`` fixes ``|Psi>`` and negates ``|Psi_perp>``; ``G`` rotates by ``2 theta``."""
    name, n, extra = _parse(case.descriptor)
    res = compiled(f"{name}:{n}", case.seed)
    rng = np.random.default_rng(case.seed)
    worst, thetas = 0.0, []
    for rec in _pick_merges(res, extra[0] if extra else "all"):
        plan = rec.plan
        order = plan.register_order
        psi = _subspace_state(plan, rng)
        worst = max(worst, np.abs(ir.apply_state(plan.R_psi, psi, order) - psi).max())
        out = ir.apply_state(plan.U, psi, order)
        mask = _anc_zero(plan)
        good = np.where(mask, out, 0)
        bad = out - good
        sin_t = np.linalg.norm(good)
        theta = math.asin(min(sin_t, 1.0))
        thetas.append(theta)
        worst = max(worst, abs(sin_t - 1.0 / plan.padding.padded_C))
        if 1e-12 < sin_t < 1 - 1e-12:
            phi, phi_perp = good / sin_t, bad / math.cos(theta)
            perp = ir.apply_state(plan.U.inverse(), math.cos(theta) * phi - sin_t * phi_perp, order)
            worst = max(worst, np.abs(ir.apply_state(plan.R_psi, perp, order) + perp).max())
            state = out
            for j in range(1, plan.rotations + 1):
                state = ir.apply_state(plan.G, state, order)
                expect = math.sin((2 * j + 1) * theta)
                worst = max(worst, abs(np.linalg.norm(np.where(mask, state, 0)) - abs(expect)))
    return CaseResult(case, float(worst), {"theta": thetas})


def _anc_zero(plan) -> np.ndarray:
    dims = [r.dim for r in plan.register_order]
    ids = {r.id for r in plan.ancillas}
    mask = np.ones(dims, dtype=bool)
    for ax, r in enumerate(plan.register_order):
        if r.id in ids:
            sl = [slice(None)] * len(dims)
            sl[ax] = slice(1, None)
            mask[tuple(sl)] = False
    return mask.reshape(-1)


def check_s4(case: PropertyCase) -> CaseResult:
    name, n, extra = _parse(case.descriptor)
    if name == "padding":
        rng = np.random.default_rng(case.seed)
        worst = 0.0
        for c in rng.uniform(1.0, 50.0, n):
            pad = plan_padding(float(c))
            lift = np.prod([math.cos(p) + math.sin(p) for p in pad.phases]) if pad.phases else 1.0
            worst = max(worst, abs(math.sin((2 * pad.rotations + 1) * math.asin(1 / pad.padded_C)) - 1),
                        abs(c * lift - pad.padded_C) / pad.padded_C)
        return CaseResult(case, worst, {"samples": n})
    res = compiled(f"{name}:{n}", case.seed, extra[0] if extra else "auto")
    rng = np.random.default_rng(case.seed)
    worst, amps = 0.0, []
    for rec in res.merges:
        plan = rec.plan
        psi = _subspace_state(plan, rng)
        out = deterministic_merge(plan, psi)
        w = ancilla_zero_weight(plan, out)
        amps.append(w)
        worst = max(worst, abs(1.0 - math.sqrt(max(w, 0.0))))
    return CaseResult(case, worst, {"success_weight": amps})


# -- S5: merging-lemma depth inequality ----------------------------------------------------------

S5_SITE_CONST = 7


def check_s5(case: PropertyCase) -> CaseResult:
    """``T(V_jl) <= ceil(q_k) (2 T(child) + c (l-j+1) + c')`` on counted IR."""
    name, n, extra = _parse(case.descriptor)
    res = compiled(f"{name}:{n}", case.seed, extra[0] if extra else "auto")
    memo: dict[int, int] = {}
    worst, rows = 0.0, []
    for rec in res.merges:
        plan = rec.plan
        t_child = ir.node_depth(plan.child, memo)
        t_block = t_child + ir.node_depth(plan.amplify, memo)
        c_prime = 2 * ir.node_depth(plan.U, memo) + 2 * plan.R_phi.cost + 3
        q_k = plan.lcu.C
        width = rec.sites[1] - rec.sites[0] + 1
        bound = math.ceil(q_k - 1e-9) * (2 * t_child + S5_SITE_CONST * width + c_prime)
        rows.append({"sites": rec.sites, "T": t_block, "bound": bound, "q_k": q_k, "c_prime": c_prime})
        worst = max(worst, max(0, t_block - bound) / bound)
    return CaseResult(case, worst, {"c": S5_SITE_CONST, "merges": rows})


# -- S6: uniform isometries for all n ----------------------------------------------------------


def check_s6(case: PropertyCase) -> CaseResult:
    obj, _ = source(case.descriptor, case.seed)
    _, n_max, _ = _parse(case.descriptor)
    mpu = obj if obj.is_open else boundary_to_open(obj, block_diagonal=True)
    m = minimal_blocking(mpu) or 1
    caps = compute_caps_uniform(mpu, m)
    worst = 0.0
    for n in range(1, n_max + 1):
        block = [mpu.bulk] * n
        for lc, rc in ((caps.L, caps.R), (mpu.left[None, :], caps.R), (caps.L, mpu.right[None, :])):
            worst = max(worst, linalg.unitarity_residual(build_isometry(block, lc, rc).dense_v))
    return CaseResult(case, worst, {"blocking_m": m, "n_max": n_max})


# -- theorems ------------------------------------------------------------------------------------


def check_thm1(case: PropertyCase) -> CaseResult:
    res = compiled(case.descriptor, case.seed, "uniform")
    obj, n = source(case.descriptor, case.seed)
    metric, leak = equivalence(res, obj.contract(n))
    return CaseResult(case, max(abs(metric), leak), {"metric": metric, "leakage": leak})


def check_thm1_resources(case: PropertyCase) -> CaseResult:
    """Bond registers are exactly ``2N``; pads at most 2 per merge; ancillas ``O(N)``; ``ceil(log2 N)`` levels."""
    res = compiled(case.descriptor, case.seed, "uniform")
    _, n = source(case.descriptor, case.seed)
    bonds = res.circuit.by_kind("bond")
    anc = res.circuit.by_kind("lcu_ancilla") + res.circuit.by_kind("pad")
    defects = [
        abs(len(bonds) - 2 * n),
        max((max(0, r.n_pads - 2) for r in res.merges), default=0),
        max(0, len(anc) - 5 * (n - 1)),
        abs(len(res.depth.per_level) - 1 - math.ceil(math.log2(n))),
    ]
    return CaseResult(case, float(max(defects)),
                      {"bonds": len(bonds), "ancillas": len(anc), "levels": len(res.depth.per_level) - 1})


def check_thm2(case: PropertyCase) -> CaseResult:
    res = compiled(case.descriptor, case.seed, "nonuniform")
    target = contract(source_chain(case.descriptor, case.seed))
    metric, leak = equivalence(res, target)
    return CaseResult(case, max(abs(metric), leak), {"metric": metric, "leakage": leak})


# -- registry ------------------------------------------------------------------------------------

CHECKS = {
    "S1": check_s1,
    "S2": check_s2,
    "S3": check_s3,
    "S4": check_s4,
    "S5": check_s5,
    "S6": check_s6,
    "Thm1": check_thm1,
    "Thm1'": check_thm1_resources,
    "Thm2": check_thm2,
}

_T, _D = "trivial", "derived"

CASES: dict[str, list[PropertyCase]] = {
    "S1": [
        PropertyCase("S1", "product:3", 1, 1e-9, _T),
        PropertyCase("S1", "multicontrol-z:4", 0, 1e-9, _D),
        PropertyCase("S1", "perturbed-multicontrol-z:4", 2, 1e-9, _D),
        PropertyCase("S1", "two-site-random:2", 3, 1e-9, _D),
        PropertyCase("S1", "perturbed-multicontrol-z:4:canonical", 4, 1e-9, _D),
        PropertyCase("S1", "product:3:gauge", 5, 1e-10, _T),
        PropertyCase("S1", "multicontrol-z:4:gauge", 6, 1e-10, _D),
        PropertyCase("S1", "perturbed-multicontrol-z:4:gauge", 7, 1e-10, _D),
        PropertyCase("S1", "two-site-random:2:gauge", 8, 1e-10, _D),
    ],
    "S2": [
        PropertyCase("S2", "projector:3", 0, 1e-10, _T),
        PropertyCase("S2", "random:100", 11, 1e-10, _D),
        PropertyCase("S2", "random:100:fourier", 12, 1e-10, _D),
        PropertyCase("S2", "multicontrol-z:4", 0, 1e-10, _D),
        PropertyCase("S2", "lee-yang:2", 0, 1e-10, _D),
        PropertyCase("S2", "perturbed-multicontrol-z:4", 2, 1e-10, _D),
    ],
    "S3": [
        PropertyCase("S3", "identity:2", 0, 1e-10, _T),
        PropertyCase("S3", "multicontrol-z:3", 1, 1e-10, _D),
        PropertyCase("S3", "perturbed-multicontrol-z:3", 2, 1e-10, _D),
        PropertyCase("S3", "two-site-random:2", 3, 1e-10, _D),
    ],
    "S4": [
        PropertyCase("S4", "identity:3", 0, 1e-10, _T),
        PropertyCase("S4", "padding:1000", 21, 1e-12, _D),
        PropertyCase("S4", "multicontrol-z:4", 1, 1e-10, _D),
        PropertyCase("S4", "perturbed-multicontrol-z:4", 2, 1e-10, _D),
        PropertyCase("S4", "two-site-random:2", 3, 1e-10, _D),
        PropertyCase("S4", "lee-yang:2", 4, 1e-10, _D),
    ],
    "S5": [
        PropertyCase("S5", "identity:8", 0, 0.0, _T),
        PropertyCase("S5", "multicontrol-z:16", 0, 0.0, _D),
        PropertyCase("S5", "perturbed-multicontrol-z:4", 2, 0.0, _D),
        PropertyCase("S5", "lee-yang:8", 0, 0.0, _D),
    ],
    "S6": [
        PropertyCase("S6", "identity:3", 0, 1e-9, _T),
        PropertyCase("S6", "multicontrol-z:3", 0, 1e-9, _D),
        PropertyCase("S6", "lee-yang:3", 0, 1e-9, _D),
    ],
    "Thm1": [
        PropertyCase("Thm1", "identity:3", 0, 1e-9, _T),
        PropertyCase("Thm1", "multicontrol-z:3", 0, 1e-9, _D),
        PropertyCase("Thm1", "multicontrol-z:4", 0, 1e-9, _D),
        PropertyCase("Thm1", "lee-yang:2", 0, 1e-8, _D),
    ],
    "Thm1'": [
        PropertyCase("Thm1'", "identity:5", 0, 0.0, _T),
        PropertyCase("Thm1'", "multicontrol-z:8", 0, 0.0, _D),
        PropertyCase("Thm1'", "multicontrol-z:7", 0, 0.0, _D),
        PropertyCase("Thm1'", "lee-yang:16", 0, 0.0, _D),
    ],
    "Thm2": [
        PropertyCase("Thm2", "product:4", 1, 1e-8, _T),
        PropertyCase("Thm2", "perturbed-multicontrol-z:3", 2, 1e-9, _D),
        PropertyCase("Thm2", "perturbed-multicontrol-z:4", 3, 1e-8, _D),
        PropertyCase("Thm2", "two-site-random:2", 4, 1e-8, _D),
        PropertyCase("Thm2", "multicontrol-z:3", 0, 1e-9, _D),
    ],
}


def canonical_tag(tag: str) -> str:
    tag = ALIASES.get(tag, tag)
    if tag not in CHECKS:
        raise KeyError(f"unknown lemma tag {tag!r}; choose from {TAGS}")
    return tag


def run_case(case: PropertyCase) -> CaseResult:
    try:
        return CHECKS[canonical_tag(case.tag)](case)
    except Exception as exc:  # a crash is a counterexample too
        return CaseResult(case, math.inf, {"error": f"{type(exc).__name__}: {exc}"})


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def run_lemma_suite(tag: str, dump_dir: str | Path | None = None, cases=None) -> SuiteResult:
    """Run every case registered for ``tag``; failures are written as JSON to ``dump_dir``."""
    tag = canonical_tag(tag)
    results = [run_case(c) for c in (CASES[tag] if cases is None else cases)]
    suite = SuiteResult(tag, results)
    if dump_dir is not None:
        out = Path(dump_dir)
        for k, r in enumerate(suite.failures):
            out.mkdir(parents=True, exist_ok=True)
            path = out / f"{tag.replace(chr(39), 'p')}-{k}.json"
            path.write_text(json.dumps(_jsonable({"case": asdict(r.case), "value": r.value, "detail": r.detail}),
                                       indent=2))
            suite.dumped.append(str(path))
    return suite
