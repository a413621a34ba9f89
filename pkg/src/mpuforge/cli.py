"""``mpuforge`` command line: verify, compile, simulate, bench.

Exit codes: 0 success, 2 validation or I/O failure, 3 resource cap, 4 unsupported MPU.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import circuit as ir
from . import corpus, linalg
from .compiler import (
    CompileOptions,
    as_uniform,
    block_action,
    compile_mpu,
    depth_scaling_report,
    prepare_uniform,
)
from .errors import MpuForgeError, UnsupportedMpuError, ValidationError
from .isometry import conditioning
from .lcu import merge_operator_from
from .mpu import MpoChain, UniformMpu, choi_canonicalize, contract, is_unitary, load_chain, schmidt_bound_q

EXIT_OK = 0
EXIT_VALIDATION = 2


@dataclass(frozen=True)
class RunConfig:
    command: str
    corpus: str | None
    input: str | None
    n_sites: int
    tol: float
    dim_cap: int | None
    blocking_m: int | None
    seed: int
    alpha: float
    beta: float
    fmt: str
    output: str | None

    def __post_init__(self):
        if self.dim_cap is not None and self.dim_cap <= 0:
            raise ValidationError("--dim-cap must be positive")
        if self.n_sites < 1:
            raise ValidationError("--n must be positive")

    @property
    def source(self) -> dict:
        if self.input is not None:
            return {"input": str(self.input), "n_sites": self.n_sites}
        return {"corpus": self.corpus, "n_sites": self.n_sites, "seed": self.seed,
                "alpha": self.alpha, "beta": self.beta}


def load_source(spec: dict):
    """Rebuild the MPU described by a source spec: ``(object, n_sites)``."""
    n = int(spec.get("n_sites", 2))
    if spec.get("input"):
        try:
            chain = load_chain(spec["input"])
        except OSError as exc:
            raise ValidationError(f"cannot read {spec['input']}: {exc}") from exc
        return chain, chain.n_sites
    obj = corpus.corpus_entry(
        spec["corpus"], n, int(spec.get("seed", 0)), float(spec.get("alpha", math.pi / 2)),
        float(spec.get("beta", 0.0)),
    )
    return obj, (obj.n_sites if isinstance(obj, MpoChain) else n)


def _chain_of(obj, n: int) -> MpoChain:
    return obj.chain(n) if isinstance(obj, UniformMpu) else obj


def target_unitary(spec: dict, cap: int | None = None) -> np.ndarray:
    obj, n = load_source(spec)
    return contract(_chain_of(obj, n), cap=cap)


# -- commands ----------------------------------------------------------------------------


def cmd_verify(cfg: RunConfig, dump_caps: bool = False) -> tuple[dict, int]:
    obj, n = load_source(cfg.source)
    chain = _chain_of(obj, n)
    uni = obj if isinstance(obj, UniformMpu) else as_uniform(obj)
    unit = is_unitary(chain, 1e-9, cap=cfg.dim_cap)
    report: dict = {"n_sites": n, "unitary_residual": unit.residual, "unitary": unit.unitary}
    if not unit.unitary:
        return report, EXIT_VALIDATION
    data = choi_canonicalize(chain, cfg.tol)
    qb = schmidt_bound_q(data)
    report.update(
        schmidt=[s.tolist() for s in data.schmidt],
        s_min=data.s_min,
        q_canonical=qb.q,
        q_per_cut=list(qb.per_cut),
        bound=qb.bound,
        q=qb.q,
    )
    if uni is not None:
        opts = CompileOptions(blocking_m=cfg.blocking_m, tol=cfg.tol, dim_cap=cfg.dim_cap)
        try:
            _, m, caps = prepare_uniform(uni, opts)
        except UnsupportedMpuError as exc:
            report.update(assumption1=False, assumption1_detail=str(exc))
        else:
            q_unif = conditioning(caps.L, caps.R, cfg.tol)
            mop = merge_operator_from(caps.R, caps.L, cfg.tol)
            report.update(assumption1=True, blocking_m=m, q_unif=q_unif, q=q_unif,
                          trace_norm_M=linalg.trace_norm(mop))
            if dump_caps:
                report["caps"] = {"L": _cplx(caps.L), "R": _cplx(caps.R)}
    return report, EXIT_OK


def _cplx(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def cmd_compile(cfg: RunConfig, mode: str | None = None, lcu_scheme: str = "reflection") -> tuple[dict, int]:
    obj, n = load_source(cfg.source)
    if mode is None:
        mode = "uniform" if isinstance(obj, UniformMpu) else "nonuniform"
    opts = CompileOptions(mode=mode, blocking_m=cfg.blocking_m, tol=cfg.tol, dim_cap=cfg.dim_cap,
                          lcu_scheme=lcu_scheme)
    t0 = time.perf_counter()
    res = compile_mpu(obj, n, opts)
    elapsed = time.perf_counter() - t0
    res.circuit.metadata["source"] = cfg.source
    report = {
        "mode": mode,
        "n_sites": n,
        "depth": res.depth.depth,
        "depth_per_level": res.depth.per_level,
        "q": res.q_report,
        "ancillas": [r.id for r in res.ancillas],
        "merges": [
            {"sites": list(m.sites), "cut": m.cut, "level": m.level, "C": m.C, "padded_C": m.padded_C,
             "rotations": m.rotations, "pads": m.n_pads}
            for m in res.merges
        ],
        "seconds": elapsed,
    }
    if cfg.output:
        try:
            ir.save_circuit(res.circuit, cfg.output)
        except OSError as exc:
            raise ValidationError(f"cannot write {cfg.output}: {exc}") from exc
        report["output"] = cfg.output
    return report, EXIT_OK


def cmd_simulate(circuit_path: str, cfg: RunConfig | None = None, inputs=None) -> tuple[dict, int]:
    try:
        circ = ir.load_circuit(circuit_path)
    except OSError as exc:
        raise ValidationError(f"cannot read {circuit_path}: {exc}") from exc
    spec = cfg.source if cfg is not None and (cfg.corpus or cfg.input) else circ.metadata.get("source")
    kept, leak = block_action(circ.root, circ.registers, inputs)
    report: dict = {"ancilla_leakage": leak, "columns": kept.shape[1]}
    if spec is not None:
        target = target_unitary(spec, cap=cfg.dim_cap if cfg else None)
        cols = list(range(target.shape[1])) if inputs is None else list(inputs)
        t = target[:, cols]
        overlap = abs(np.vdot(t, kept)) / len(cols)
        report["equivalence_metric"] = float(1.0 - overlap)
        report["target"] = spec
    return report, EXIT_OK


def cmd_bench(names, n_list, cfg: RunConfig, jobs: int = 1, bound: float = 4.0) -> tuple[dict, int]:
    t0 = time.perf_counter()
    tables = []
    for name in names:
        obj, _ = load_source({"corpus": name, "n_sites": 2, "seed": cfg.seed,
                              "alpha": cfg.alpha, "beta": cfg.beta})
        if not isinstance(obj, UniformMpu):
            raise ValidationError(f"bench needs a uniform corpus entry, got {name!r}")
        opts = CompileOptions(blocking_m=cfg.blocking_m, tol=cfg.tol, dim_cap=cfg.dim_cap)
        rep = depth_scaling_report(obj, n_list, opts, jobs=jobs)
        tables.append({
            "name": name,
            "q": rep.q,
            "exponent": rep.exponent,
            "rows": [{"N": r.n_sites, "depth": r.depth, "model": r.model, "ratio": r.ratio} for r in rep.rows],
            "spread": rep.spread,
            "bounded": rep.bounded(bound),
        })
    return {"bound": bound, "tables": tables, "seconds": time.perf_counter() - t0}, EXIT_OK


# -- formatting ----------------------------------------------------------------------------


def _text(report: dict) -> str:
    lines = []
    for key, val in report.items():
        if key == "tables":
            for tab in val:
                lines.append(f"{tab['name']}: q={tab['q']:.6g} exponent={tab['exponent']:.4f} "
                             f"spread={tab['spread']:.3f} bounded={tab['bounded']}")
                for row in tab["rows"]:
                    lines.append(f"  N={row['N']:<4d} depth={row['depth']:<16d} ratio={row['ratio']:.4f}")
        else:
            lines.append(f"{key}: {val}")
    return "\n".join(lines)


def _csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["name", "N", "depth", "model", "ratio"])
    for tab in report.get("tables", []):
        for row in tab["rows"]:
            w.writerow([tab["name"], row["N"], row["depth"], row["model"], row["ratio"]])
    return buf.getvalue()


def render(report: dict, fmt: str) -> str:
    if fmt == "text":
        return _text(report)
    if fmt == "csv":
        return _csv(report)
    return json.dumps(report, indent=2, default=str)


# -- argument parsing ----------------------------------------------------------------------


def _source_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--corpus", choices=corpus.UNIFORM_NAMES + corpus.CHAIN_NAMES)
    src.add_argument("--input", help="MpoChain JSON file")
    p.add_argument("--n", type=int, default=3, help="number of sites for uniform MPUs")
    p.add_argument("--alpha", type=float, default=math.pi / 2)
    p.add_argument("--beta", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=linalg.DEFAULT_TOL)
    common.add_argument("--dim-cap", type=int, default=None)
    common.add_argument("--blocking-m", type=int, default=None)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=("json", "text", "csv"), default="json")
    common.add_argument("--output", default=None)

    parser = argparse.ArgumentParser(prog="mpuforge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="unitarity, Assumption 1, Schmidt data and q")
    _source_args(p)
    p.add_argument("--dump-caps", action="store_true")

    p = sub.add_parser("compile", parents=[common], help="compile to circuit JSON")
    _source_args(p)
    p.add_argument("--mode", choices=("uniform", "nonuniform"), default=None)
    p.add_argument("--lcu-scheme", choices=("reflection", "fourier"), default="reflection")

    p = sub.add_parser("simulate", parents=[common], help="simulate a circuit against its target")
    p.add_argument("circuit")
    _source_args(p)
    p.add_argument("--basis", default=None, help="comma-separated input basis indices (default all)")

    p = sub.add_parser("bench", parents=[common], help="depth scaling table")
    p.add_argument("--corpus", nargs="+", default=["identity", "multicontrol-z", "lee-yang"],
                   choices=corpus.UNIFORM_NAMES)
    p.add_argument("--ns", default="4,8,16,32,64")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--bound", type=float, default=4.0)
    p.add_argument("--alpha", type=float, default=math.pi / 2)
    p.add_argument("--beta", type=float, default=0.0)
    return parser


def _config(args) -> RunConfig:
    corpus_name = getattr(args, "corpus", None)
    if isinstance(corpus_name, list):
        corpus_name = None
    inp = getattr(args, "input", None)
    if args.command in ("verify", "compile") and corpus_name is None and inp is None:
        raise ValidationError("give exactly one of --corpus or --input")
    return RunConfig(args.command, corpus_name, inp, getattr(args, "n", 2), args.tol, args.dim_cap,
                     args.blocking_m, args.seed, args.alpha, args.beta, args.format,
                     args.output)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        if args.command == "verify":
            report, code = cmd_verify(cfg, args.dump_caps)
        elif args.command == "compile":
            report, code = cmd_compile(cfg, args.mode, args.lcu_scheme)
        elif args.command == "simulate":
            basis = None if args.basis is None else [int(x) for x in args.basis.split(",")]
            report, code = cmd_simulate(args.circuit, cfg, basis)
        else:
            ns = [int(x) for x in args.ns.split(",")]
            report, code = cmd_bench(args.corpus, ns, cfg, args.jobs, args.bound)
    except MpuForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    text = render(report, args.format)
    if args.command != "compile" and args.output:
        Path(args.output).write_text(text)
    print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
