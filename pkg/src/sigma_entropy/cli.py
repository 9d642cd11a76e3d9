"""Command line front end.

Every subcommand prints one report (JSON or CSV) and exits with

* 0 when every checked relation holds,
* 2 when some relation fails; the report then lists each violation with its
  inputs, both sides and the gap,
* 1 on malformed input, with the offending JSON path on stderr.

Global flags can also be set through the environment: ``SIGMA_ENTROPY_TOL``,
``SIGMA_ENTROPY_SEED``, ``SIGMA_ENTROPY_THREADS``, ``SIGMA_ENTROPY_OUT`` and
``SIGMA_ENTROPY_FORMAT``.  An explicit flag wins over the environment.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import boundary as bd
from . import io
from .config import ENV_PREFIX, env_value
from .entropy import builtin_phi, ent, ent_layer_cake, h_phi, quant_bound_check, sandwich_check
from .errors import SigmaEntropyError, SpaceMismatch
from .kudo import kudo_limits, semicontinuity_experiment, verify_sigma_membership
from .measure_core import Density, _check_same_space, abs_moment, alpha_many, dominates_second_order
from .partitions import cond_exp
from .verify import SUITES, run_suite

EXIT_OK, EXIT_INPUT, EXIT_VIOLATION = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # usage errors are malformed input, not violations
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("common options")
    g.add_argument("--tol", type=float, help="tolerance override (env SIGMA_ENTROPY_TOL)")
    g.add_argument("--seed", type=int, help="RNG seed, required by randomized commands "
                                             "(env SIGMA_ENTROPY_SEED)")
    g.add_argument("--threads", type=int, help="worker threads (env SIGMA_ENTROPY_THREADS)")
    g.add_argument("--out", help="write the report here instead of stdout (env SIGMA_ENTROPY_OUT)")
    g.add_argument("--format", choices=("json", "csv"),
                   help="report format, default json (env SIGMA_ENTROPY_FORMAT)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sigma-entropy", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("entropy", help="Phi-entropy, layer-cake cross-check and sandwich bound")
    p.add_argument("--density", required=True, help="density JSON")
    p.add_argument("--phi", default="standard", help="standard | power(p)  [standard]")
    p.add_argument("--delta", type=float, help="sandwich cut, in (0, t_o)  [t_o/2]")
    p.add_argument("--partition", help="optional partition JSON; adds H^Phi_rho(A)")
    _common(p)

    p = sub.add_parser("alpha", help="survival integral alpha_f(t) and dominance")
    p.add_argument("--density", required=True)
    p.add_argument("--t", type=float, action="append", help="threshold (repeatable); "
                   "default: 0 and every value of f")
    p.add_argument("--against", help="second density g on the same space; reports whether "
                   "alpha_f <= alpha_g everywhere")
    _common(p)

    p = sub.add_parser("condexp", help="conditional expectation onto a partition")
    p.add_argument("--density", required=True, help="density (or signed function) JSON")
    p.add_argument("--partition", required=True)
    p.add_argument("--signed", action="store_true", help="treat values as a signed function")
    _common(p)

    p = sub.add_parser("kudo", help="Kudo limits of an eventually periodic sequence")
    p.add_argument("--sequence", required=True)
    p.add_argument("--rho", help="bounded density for the semicontinuity check")
    p.add_argument("--phi", default="standard")
    p.add_argument("--family", choices=("all_events", "sampled"), default="all_events",
                   help="norm-test family; 'sampled' needs --seed")
    _common(p)

    p = sub.add_parser("walk", help="free-group walk: boundary entropy and kernel checks")
    p.add_argument("--config", help="walk JSON (k, mu, L, K, seed, samples, ...)")
    p.add_argument("--k", type=int)
    p.add_argument("--L", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--method", default="exact",
                   choices=("exact", "monte_carlo", "identity", "kernel", "all"))
    _common(p)

    p = sub.add_parser("verify", help="run a randomized verification suite")
    p.add_argument("suite", choices=sorted(SUITES) + ["all"])
    p.add_argument("--count", type=int, help="instances (samples for furstenberg)")
    _common(p)
    return parser


def _resolve(args) -> None:
    for name, conv in (("tol", float), ("seed", int), ("threads", int),
                       ("out", str), ("format", str)):
        if getattr(args, name, None) is None:
            raw = env_value(name)
            if raw is not None:
                try:
                    setattr(args, name, conv(raw))
                except ValueError:
                    raise io.InputError(f"${ENV_PREFIX}{name.upper()}",
                                        f"cannot parse {raw!r}") from None
    if args.format is None:
        args.format = "json"
    if args.format not in ("json", "csv"):
        raise io.InputError(f"${ENV_PREFIX}FORMAT", f"unknown format {args.format!r}")
    if args.threads is None:
        args.threads = 1


def _need_seed(args, what: str) -> int:
    if args.seed is None:
        raise UsageError(f"{what} is randomized: pass --seed or set {ENV_PREFIX}SEED")
    return args.seed


def _phi(name: str, path: str):
    try:
        return builtin_phi(name)
    except SigmaEntropyError as exc:
        raise io.InputError(path, str(exc)) from None


def _density_input(f: Density) -> dict:
    return {"space": io.space_to_json(f.space), "values": f.values.tolist()}


def _violation(check: str, inputs: dict, lhs: float, rhs: float, **extra) -> dict:
    return {"check": check, "inputs": inputs, "lhs": lhs, "rhs": rhs, "gap": lhs - rhs, **extra}


# --------------------------------------------------------------------------
# subcommands; each returns (report, violations)


def cmd_entropy(args):
    tol = 1e-9 if args.tol is None else args.tol
    f = io.load_density(args.density, "$density")
    phi = _phi(args.phi, "--phi")
    delta = 0.5 * phi.t_o if args.delta is None else args.delta
    if not 0 < delta < phi.t_o:
        raise io.InputError("--delta", f"must lie in (0, {phi.t_o!r})")
    rep = sandwich_check(phi, f, delta, slack=tol)
    report = {"phi": phi.name, **rep.as_dict()}
    inputs = {"density": _density_input(f), "phi": phi.name, "delta": delta}
    viol = []
    if abs(rep.ent - rep.layer_cake) > tol:
        viol.append(_violation("layer_cake", inputs, abs(rep.ent - rep.layer_cake), tol))
    gap = abs(rep.ent - rep.middle)
    if not rep.ok:
        viol.append(_violation("sandwich", inputs, gap, rep.bound))
    if not rep.sharp_ok:
        viol.append(_violation("sandwich_sharp", inputs, gap, rep.sharp_bound))
    if phi.kind == "standard":
        lhs = f.space.l1_norm(f.values - 1.0)
        rhs = math.sqrt(2.0 * max(rep.ent, 0.0))
        report["pck"] = {"lhs": lhs, "rhs": rhs, "ok": lhs <= rhs + tol}
        if lhs > rhs + tol:
            viol.append(_violation("pck", inputs, lhs, rhs))
    if args.partition:
        A = io.load_partition(args.partition, "$partition", space=f.space)
        report["h_phi"] = h_phi(phi, f, A)
        report["partition"] = io.partition_to_json(A)
    return report, viol


def cmd_alpha(args):
    tol = 1e-10 if args.tol is None else args.tol
    f = io.load_density(args.density, "$density")
    ts = np.array(args.t if args.t else np.unique(np.concatenate(([0.0], f.values))), dtype=float)
    if np.any(ts < 0):
        raise io.InputError("--t", "thresholds must be >= 0")
    vals = alpha_many(f, ts)
    mean = f.space.integral(f.values)
    viol = []
    rows = []
    for t, a in zip(ts, vals):
        lhs = abs_moment(f, float(t))
        rhs = 2 * a - mean + t
        rows.append({"t": float(t), "alpha": float(a), "abs_moment": lhs})
        if abs(lhs - rhs) > tol:
            viol.append(_violation("abs_moment_identity", {"density": _density_input(f), "t": float(t)},
                                   lhs, rhs))
    report = {"alpha": rows}
    if args.against:
        g = io.load_density(args.against, "$against")
        try:
            _check_same_space(f.space, g.space)
        except SpaceMismatch as exc:
            raise io.InputError("$against.space", str(exc)) from None
        report["dominated_by_against"] = dominates_second_order(f, g)
    return report, viol


def cmd_condexp(args):
    tol = 1e-12 if args.tol is None else args.tol
    if args.signed:
        obj, base = io._load(args.density, "$density", None)
        space = io.load_space(io._require(obj, "space", "$density"), "$density.space", base)
        values = io.load_function(obj, "$density", base, space=space)
    else:
        f = io.load_density(args.density, "$density")
        space, values = f.space, f.values
    A = io.load_partition(args.partition, "$partition", space=space)
    proj = cond_exp(A, values)
    report = {"partition": io.partition_to_json(A), "values": proj.tolist(),
              "block_means": [float(proj[A.block_of == b][0]) for b in range(A.n_blocks)]}
    inputs = {"values": values.tolist(), "space": io.space_to_json(space),
              "partition": io.partition_to_json(A)}
    viol = []
    m0, m1 = space.integral(values), space.integral(proj)
    if abs(m0 - m1) > max(tol, 1e-12 * abs(m0)):
        viol.append(_violation("mean_preserved", inputs, m1, m0))
    n0, n1 = space.l1_norm(values), space.l1_norm(proj)
    report["l1_norm"] = {"before": n0, "after": n1}
    if n1 > n0 + tol:
        viol.append(_violation("l1_contraction", inputs, n1, n0))
    if not args.signed:
        dom = dominates_second_order(Density(space, proj), f, tol=tol)
        report["dominated_by_input"] = dom
        if not dom:
            viol.append(_violation("conditioning_dominance", inputs, 1.0, 0.0))
    return report, viol


def cmd_kudo(args):
    tol = 1e-12 if args.tol is None else args.tol
    seq = io.load_sequence(args.sequence, "$sequence")
    rng = None
    if args.family == "sampled":
        rng = np.random.default_rng(_need_seed(args, "--family sampled"))
    lim = kudo_limits(seq)
    up = verify_sigma_membership(seq, lim.A_plus, "upper", args.family, rng, tol=tol)
    lo = verify_sigma_membership(seq, lim.A_minus, "lower", args.family, rng, tol=tol)
    report = {"A_plus": io.partition_to_json(lim.A_plus),
              "A_minus": io.partition_to_json(lim.A_minus),
              "converges": lim.converges, "upper_certified": up, "lower_certified": lo}
    seq_in = {"sequence": str(args.sequence)}
    viol = []
    if not up:
        viol.append(_violation("upper_limit_membership", seq_in, 1.0, 0.0))
    if not lo:
        viol.append(_violation("lower_limit_membership", seq_in, 1.0, 0.0))
    if args.rho:
        rho = io.load_density(args.rho, "$rho")
        try:
            _check_same_space(seq.space, rho.space)
        except SpaceMismatch as exc:
            raise io.InputError("$rho.space", str(exc)) from None
        phi = _phi(args.phi, "--phi")
        sc = semicontinuity_experiment(phi, rho, seq, slack=1e-10 if args.tol is None else args.tol)
        report["semicontinuity"] = {"phi": phi.name, **sc.as_dict()}
        inputs = {**seq_in, "rho": _density_input(rho), "phi": phi.name}
        if not sc.lower_ok:
            viol.append(_violation("lower_semicontinuity", inputs, sc.h_minus, sc.h_period_min))
        if not sc.upper_ok:
            viol.append(_violation("upper_semicontinuity", inputs, sc.h_period_max, sc.h_plus))
        if phi.kind == "standard" and rho.min > 0:
            qb = quant_bound_check(rho, lim.A_plus, seq.period)
            report["quantitative_bound"] = qb.as_dict()
            if not qb.ok:
                viol.append(_violation("quantitative_bound", inputs, qb.max_gap, qb.bound))
    return report, viol


def cmd_walk(args):
    overrides = {"k": args.k, "L": args.L, "K": args.K, "samples": args.samples,
                 "threads": args.threads}
    raw = {}
    if args.config:
        raw, _ = io._load(args.config, "$config", None)
    if args.seed is not None:
        overrides["seed"] = args.seed
    cfg = io.load_walk(raw if args.config else {}, "$config", **overrides)
    methods = ("exact", "monte_carlo", "identity", "kernel") if args.method == "all" else (args.method,)
    if "monte_carlo" in methods and args.seed is None and "seed" not in raw:
        _need_seed(args, "--method monte_carlo")
    tol = 1e-9 if args.tol is None else args.tol
    report = {"k": cfg.k, "uniform": cfg.uniform, "L": cfg.L, "K": cfg.K}
    viol = []
    inputs = {"k": cfg.k, "mu": None if cfg.uniform else {bd.letter_name(x): p for x, p in cfg.law.items()},
              "L": cfg.L, "K": cfg.K}
    if "exact" in methods:
        report["h"] = bd.furstenberg_entropy(cfg, "exact_cylinder")
    if "monte_carlo" in methods:
        mc = bd.furstenberg_entropy(cfg, "monte_carlo")
        report["monte_carlo"] = mc.as_dict()
        report["monte_carlo"]["seed"] = cfg.seed
    if "identity" in methods:
        rep = bd.entropy_identity_check(cfg, tol=tol)
        report["identity"] = rep.as_dict()
        for j, lhs, rhs, ok in rep.layers:
            if not ok:
                viol.append(_violation(f"entropy_identity_layer_{j}", inputs, lhs, rhs))
    if "kernel" in methods:
        rep = bd.kernel_condition_check(cfg)
        report["kernel"] = rep.as_dict()
        if not rep.dense:
            viol.append(_violation("kernel_density", inputs, rep.rank, rep.atoms))
        if not rep.bounded:
            viol.append(_violation("kernel_boundedness", inputs, rep.max_lambda_ratio, 1.0))
    return report, viol


def cmd_verify(args):
    seed = _need_seed(args, "verify")
    names = [n for n in SUITES] if args.suite == "all" else [args.suite]
    results = [run_suite(n, seed, args.count) for n in names]
    viol = []
    for r in results:
        for v in r.violations[:20]:
            viol.append({"suite": r.name, **v})
    report = {"seed": seed, "suites": [r.as_dict() for r in results]}
    return report, viol


COMMANDS = {"entropy": cmd_entropy, "alpha": cmd_alpha, "condexp": cmd_condexp,
            "kudo": cmd_kudo, "walk": cmd_walk, "verify": cmd_verify}


def run(argv=None) -> tuple[int, str, str | None]:
    """Parse ``argv`` and return ``(exit_code, rendered_report, out_path)``."""
    args = build_parser().parse_args(argv)
    _resolve(args)
    report, viol = COMMANDS[args.command](args)
    status = "violation" if viol else "ok"
    out = {"command": args.command, "status": status, "report": report, "violations": viol}
    return (EXIT_VIOLATION if viol else EXIT_OK), io.render(out, args.format), args.out


def main(argv=None) -> int:
    try:
        code, text, out = run(argv)
    except io.InputError as exc:
        print(f"input error at {exc.path}: {exc.message}", file=sys.stderr)
        return EXIT_INPUT
    except (UsageError, SigmaEntropyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
