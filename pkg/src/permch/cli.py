"""Command-line front end: ``permch kernel|quantize|idcode|verify``."""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from fractions import Fraction

from .channel import Dmc, qncc_kernel
from .compositions import lattice_size
from .config import ENV_KERNEL_CAP, CapExceededError, kernel_cap
from .idcode import (
    IdCode,
    achievability_parameters,
    build_reliable_code,
    build_set_system,
    converse_tv_bound,
    deterministic_id_code,
    eval_id_errors,
    monte_carlo_id_errors,
    stochastic_id_code,
)
from .lattice_dist import LatticeDist
from .quantizer import binary_carries, cell_mass_error, quantize_binary, quantize_qary
from .verify import parse_n_grid, run_suite


def fmt(x) -> str:
    return f"{float(x):.12g}"


def _config(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _emit(args: argparse.Namespace, payload: dict) -> None:
    """Write the JSON payload (with the run config) to --out, or print it."""
    payload = {"config": _config(args), **payload}
    text = json.dumps(payload, indent=2, default=str)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _dmc(args: argparse.Namespace) -> Dmc:
    return Dmc.from_spec(args.U, args.q)


# ------------------------------------------------------------------ kernel


def cmd_kernel(args: argparse.Namespace) -> int:
    U = _dmc(args)
    K = qncc_kernel(U, args.n, jobs=args.jobs)
    if args.kernel_out:
        K.save(args.kernel_out)
    _emit(
        args,
        {
            "q": K.q,
            "n": K.n,
            "strictly_positive": U.strictly_positive,
            "rank": U.rank_r,
            "compositions": [list(c.counts) for c in K.compositions],
            "matrix": [[fmt(x) for x in row] for row in K.matrix],
        },
    )
    return 0


# ---------------------------------------------------------------- quantize


def _read_input(path: str, q: int, n: int):
    with open(path) as fh:
        obj = json.load(fh)
    if isinstance(obj, list):
        if q != 2:
            raise ValueError("a plain mass list is only accepted for q = 2 (indexed by weight)")
        if len(obj) != n + 1:
            raise ValueError(f"mass list has {len(obj)} entries, so n = {len(obj) - 1}, not {n}")
        return [float(x) for x in obj]
    Q = LatticeDist.from_json(json.dumps(obj))
    for p in Q:
        if len(p) != q or sum(p) != n:
            raise ValueError(f"point {list(p)} is not a composition with q={q}, n={n}")
    return Q


def cmd_quantize(args: argparse.Namespace) -> int:
    Q = _read_input(args.input, args.q, args.n)
    method = args.method
    if method == "auto":
        method = "binary" if args.q == 2 and args.c is None and args.a is None else "two-stage"
    report: list[tuple[str, str]] = []
    if method == "binary":
        if args.M is None:
            raise ValueError("the binary quantizer needs --M")
        mt = quantize_binary(Q, args.M)
        carries = binary_carries(Q, args.M)
        report += [("method", "binary"), ("M", str(args.M)), ("max_carry", fmt(max(carries, default=0)))]
        weights = [Fraction(mt.numerators.get((args.n - w, w), 0), args.M) for w in range(args.n + 1)]
        masses = [fmt(x) for x in weights]
    else:
        if isinstance(Q, list):
            Q = LatticeDist({(args.n - w, w): v for w, v in enumerate(Q) if v > 0})
        res = quantize_qary(Q, c=args.c, M=args.M, a=args.a)
        mt = res.mtype
        report += [
            ("method", "two-stage"),
            ("M", str(res.params.M)),
            ("a", str(res.params.a)),
            ("c", "" if args.c is None else fmt(args.c)),
            ("cells", str(len(res.order))),
            ("max_carry", fmt(max(res.carries, default=0))),
            ("stage1_cell_mass_error", fmt(cell_mass_error(res.input, res.stage1, res.partition))),
        ]
        if args.U and lattice_size(args.q, args.n) <= kernel_cap():
            d = res.distortion(qncc_kernel(_dmc(args), args.n))
            report += [("measured_tv", fmt(d.measured_tv)), ("chain_total", fmt(d.chain_total)), ("bound", fmt(d.bound))]
        masses = None
    if args.report:
        with open(args.report, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "value"])
            w.writerows(report)
    payload = json.loads(mt.to_json())
    if masses is not None:
        payload["masses_by_weight"] = masses
    _emit(args, payload)
    return 0


# ------------------------------------------------------------------ idcode


def _errors_payload(errs) -> dict:
    return {
        "lambda1": fmt(errs.lam1),
        "lambda2": fmt(errs.lam2),
        "matrix": [[fmt(x) for x in row] for row in errs.matrix],
    }


def cmd_idcode(args: argparse.Namespace) -> int:
    U = _dmc(args)
    K = qncc_kernel(U, args.n, jobs=args.jobs)
    if args.action in ("build-det", "build-stochastic"):
        rel = build_reliable_code(U, args.n, args.spacing, decoder=args.decoder, kernel=K)
        pe = rel.exact_pe(K)
        info = {"N": rel.N, "codewords": [list(c.counts) for c in rel.codewords], "pe_exact": fmt(pe)}
        if args.trials:
            mc = rel.monte_carlo(U, args.trials, seed=args.seed)
            info["pe_monte_carlo"] = fmt(mc.pe)
            info["pe_wilson_high"] = fmt(mc.high.max())
        if args.action == "build-det":
            code = deterministic_id_code(rel)
        else:
            sysm = build_set_system(rel.N, args.eps, args.lam, seed=args.seed, target=args.L)
            code = stochastic_id_code(rel, sysm)
            eps_p, lam_p = achievability_parameters(rel.N, U.rank_r, args.const, args.eps_n)
            info.update(
                {
                    "L": sysm.L,
                    "subsets": [sorted(s) for s in sysm.subsets],
                    "overlap_ratio": fmt(sysm.overlap_ratio()),
                    "eps_prime": fmt(eps_p),
                    "lambda2_prime": fmt(lam_p),
                }
            )
        info["errors"] = _errors_payload(eval_id_errors(code, K))
        if args.code_out:
            with open(args.code_out, "w") as fh:
                fh.write(code.to_json())
        _emit(args, info)
        return 0
    if not args.code:
        raise ValueError(f"idcode {args.action} needs --code")
    with open(args.code) as fh:
        code = IdCode.from_json(fh.read())
    if args.action == "eval":
        info = {"errors": _errors_payload(eval_id_errors(code, K))}
        if args.trials:
            mc, se = monte_carlo_id_errors(code, U, args.trials, seed=args.seed)
            info["monte_carlo"] = _errors_payload(mc)
            info["monte_carlo_max_se"] = fmt(se.max())
        _emit(args, info)
        return 0
    bound = converse_tv_bound(code, K)
    errs = eval_id_errors(code, K)
    ok = bound.value <= errs.lam1 + errs.lam2 + 1e-12
    _emit(
        args,
        {
            "bound": fmt(bound.value),
            "bound_unclamped": fmt(bound.raw),
            "min_tv": fmt(bound.min_tv),
            "pair": list(bound.pair),
            "lambda_sum": fmt(errs.lam1 + errs.lam2),
            "ok": ok,
        },
    )
    return 0 if ok else 1


# ------------------------------------------------------------------ verify


def cmd_verify(args: argparse.Namespace) -> int:
    U = _dmc(args)
    ns = parse_n_grid(args.n)
    res = run_suite(U, ns, seed=args.seed, suites=[args.suite])
    if args.report:
        res.write_csv(args.report)
    _emit(args, {**res.summary(), "rows": [
        {"check": r.check, "n": r.n, "param": r.param, "value": fmt(r.value), "bound": fmt(r.bound), "pass": r.passed}
        for r in res.rows
    ]})
    return 0 if res.ok else 1


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--q", type=int, default=2, help="alphabet size")
    common.add_argument("--U", default="identity", help="identity, bsc:p, uniform-mix:g, or a JSON matrix file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=0, help="Monte Carlo trials per message (0 = exact only)")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    common.add_argument("--out", help="write the JSON result here instead of stdout")
    common.add_argument("--kernel-cap", type=int, help=f"row cap for kernels (also via {ENV_KERNEL_CAP})")

    p = argparse.ArgumentParser(prog="permch", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    k = sub.add_parser("kernel", parents=[common], help="exact composition-channel kernel")
    k.add_argument("--n", type=int, required=True)
    k.add_argument("--kernel-out", help="save the kernel (.json or .npz)")
    k.set_defaults(func=cmd_kernel)

    qz = sub.add_parser("quantize", parents=[common], help="M-type quantization of a distribution")
    qz.add_argument("--n", type=int, required=True)
    qz.add_argument("--M", type=int)
    qz.add_argument("--c", type=float)
    qz.add_argument("--a", type=int)
    qz.add_argument("--method", choices=["auto", "binary", "two-stage"], default="auto")
    qz.add_argument("--input", required=True, help="distribution JSON, or a mass list by weight for q=2")
    qz.add_argument("--report", help="CSV of quantizer metrics")
    qz.set_defaults(func=cmd_quantize, U=None)

    ic = sub.add_parser("idcode", parents=[common], help="build and evaluate identification codes")
    ic.add_argument("action", choices=["build-stochastic", "build-det", "eval", "converse"])
    ic.add_argument("--n", type=int, required=True)
    ic.add_argument("--spacing", type=int, default=1)
    ic.add_argument("--decoder", choices=["ml", "nearest"], default="ml")
    ic.add_argument("--eps", type=float, default=0.15)
    ic.add_argument("--lam", type=float, default=0.85)
    ic.add_argument("--L", type=int, help="number of subsets to search for")
    ic.add_argument("--const", type=float, default=1.0, help="reliable-code constant used in the achievability parameters")
    ic.add_argument("--eps-n", type=float, default=0.0, help="vanishing rate term of the achievability parameters")
    ic.add_argument("--code", help="IdCode JSON for eval/converse")
    ic.add_argument("--code-out", help="save the built IdCode JSON")
    ic.set_defaults(func=cmd_idcode)

    v = sub.add_parser("verify", parents=[common], help="run the verification sweeps")
    v.add_argument("--suite", choices=["all", "single-shift", "distance", "weight-transfer", "collision"], default="all")
    v.add_argument("--n", default="8..64", help="n grid: 8..64 (doubling) or 8,12,20")
    v.add_argument("--report", help="CSV with one row per check")
    v.set_defaults(func=cmd_verify)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    saved = os.environ.get(ENV_KERNEL_CAP)
    if args.kernel_cap is not None:
        os.environ[ENV_KERNEL_CAP] = str(args.kernel_cap)
    try:
        return args.func(args)
    except (ValueError, CapExceededError, OSError, RuntimeError) as exc:
        print(f"permch: error: {exc}", file=sys.stderr)
        return 2
    finally:
        if saved is None:
            os.environ.pop(ENV_KERNEL_CAP, None)
        else:
            os.environ[ENV_KERNEL_CAP] = saved


if __name__ == "__main__":
    sys.exit(main())
