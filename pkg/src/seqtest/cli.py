"""Command-line front end.

Subcommands: ``design`` builds a plan and writes its document; ``oc``
evaluates exact operating characteristics onto CSV; ``tune`` re-runs the
risk-scale bisection and updates the document; ``certify`` produces
branch-and-bound risk certificates for two-sample plans; ``simulate``
and ``compare`` run seeded Monte Carlo studies.

Exit codes: 0 on success, 1 when a design is infeasible, a certificate
fails, or a document is invalid, 2 on command-line usage errors.  CSV
output is comma-separated with a header row and LF line endings, and is
byte-identical across runs for the same inputs.  The environment
variable ``SEQTEST_THREADS`` caps the worker threads used by grid
evaluation.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import __version__
from .conflimits import family_by_tag
from .errors import SeqTestError
from .models import model_by_name
from .plans import build_multihyp_plan, build_one_sided_plan
from .ocexact import oc_curve
from .plandoc import load_plan, plan_to_doc, dump_doc
from .sim import compare as sim_compare
from .sim import simulate as sim_simulate
from .sim import _summarize, _trial_rng
from .sprt import SprtSpec
from .tuning import tune_zeta
from .twoprop import (TwoPropPlan, build_two_prop_plan, certify_risk,
                      exact_oc, run_two_prop, tune_two_prop)

_FMT = repr  # shortest round-trip decimals in CSV and reports


def _parse_grid(text: str, what: str):
    parts = text.split(":")
    try:
        if len(parts) != 3:
            raise ValueError
        a, b, step = (float(x) for x in parts)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"{what} must look like start:stop:step, got {text!r}") from None
    if step <= 0 or b < a:
        raise argparse.ArgumentTypeError(f"bad {what} range {text!r}")
    count = int(np.floor((b - a) / step + 1e-9)) + 1
    return np.round(a + step * np.arange(count), 12)


def _parse_floats(text: str, what: str):
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"{what} must be a comma-separated list of numbers, got {text!r}"
        ) from None
    if not vals:
        raise argparse.ArgumentTypeError(f"{what} must be nonempty")
    return vals


def _parse_zones(text: str):
    los, his = [], []
    for part in text.split(","):
        ends = part.split(":")
        try:
            if len(ends) != 2:
                raise ValueError
            lo, hi = float(ends[0]), float(ends[1])
        except ValueError:
            raise argparse.ArgumentTypeError(
                f"zones must look like lo:hi[,lo:hi...], got {text!r}") from None
        los.append(lo)
        his.append(hi)
    return tuple(los), tuple(his)


def _parse_ints(text: str, what: str):
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"{what} must be a comma-separated list of integers, got {text!r}"
        ) from None


def _write_text(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _family_from_args(args):
    width = args.approx_width if args.limits == "approx" else None
    return family_by_tag(args.limits, width)


def _sizing_from_args(args) -> dict:
    if args.stage_ns is not None:
        return {"stage_ns": list(args.stage_ns)}
    sizing = {"stages": args.stages, "schedule": args.schedule}
    if getattr(args, "fully_sequential", False):
        sizing["fully_sequential"] = True
    return sizing


def _cmd_design(args, parser) -> int:
    if args.kind == "one-sided":
        for flag in ("theta0", "theta1", "alpha", "beta"):
            if getattr(args, flag) is None:
                parser.error(f"design --kind one-sided requires --{flag}")
        plan = build_one_sided_plan(
            model_by_name(args.model), _family_from_args(args),
            args.theta0, args.theta1, args.alpha, args.beta, args.zeta,
            stage_ns=args.stage_ns, stages=args.stages, schedule=args.schedule,
            fully_sequential=args.fully_sequential, tiebreak=args.tiebreak,
        )
        extra = f", sample cap {plan.sample_cap}" if plan.sample_cap else ""
    elif args.kind == "multi":
        if args.zones is None:
            parser.error("design --kind multi requires --zones")
        lo, hi = args.zones
        plan = build_multihyp_plan(
            model_by_name(args.model), _family_from_args(args), lo, hi,
            args.zeta, base_alphas=args.alphas, base_betas=args.betas,
            stage_ns=args.stage_ns, stages=args.stages, schedule=args.schedule,
        )
        extra = ""
    else:
        if args.zones is None:
            parser.error("design --kind two-prop requires --zones")
        lo, hi = args.zones
        plan = build_two_prop_plan(
            lo, hi, args.zeta, base_alphas=args.alphas, base_betas=args.betas,
            stage_ns=args.stage_ns, stages=args.stages, schedule=args.schedule,
        )
        extra = ""
    doc = plan_to_doc(plan, build=_sizing_from_args(args))
    _write_text(args.out, dump_doc(doc))
    sizes = (plan.stage_sizes if isinstance(plan, TwoPropPlan)
             else plan.stage_ns)
    print(f"{args.kind} plan, stage sizes {list(sizes)}{extra} -> {args.out}")
    return 0


def _two_prop_oc_csv(plan: TwoPropPlan, grid_x, grid_y) -> str:
    head = ["p_x", "p_y"]
    head += [f"accept_h{i}" for i in range(plan.m)]
    head += ["asn_x", "asn_y"]
    lines = [",".join(head)]
    for px in grid_x:
        for py in grid_y:
            acc, ax, ay = exact_oc(plan, float(px), float(py))
            row = [_FMT(float(px)), _FMT(float(py))]
            row += [_FMT(float(a)) for a in acc]
            row += [_FMT(float(ax)), _FMT(float(ay))]
            lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _cmd_oc(args, parser) -> int:
    plan, _ = load_plan(args.plan)
    if isinstance(plan, TwoPropPlan):
        if args.grid_x is None or args.grid_y is None:
            parser.error("oc on a two-prop document requires --grid-x and --grid-y")
        text = _two_prop_oc_csv(plan, args.grid_x, args.grid_y)
    else:
        if args.grid is None:
            parser.error("oc requires --grid for one-sample documents")
        text = oc_curve(plan, args.grid).to_csv()
    _write_text(args.out, text)
    if args.out:
        print(f"operating characteristics -> {args.out}")
    return 0


def _cmd_tune(args, parser) -> int:
    plan, doc = load_plan(args.plan)
    build = doc.get("build") or {"stage_ns": [st["n_x"] if "n_x" in st else st["n"]
                                              for st in doc["stages"]]}
    sizing = {k: v for k, v in build.items()
              if k in ("stage_ns", "stages", "schedule", "fully_sequential")}
    deltas = args.deltas
    if isinstance(plan, TwoPropPlan):
        if deltas is None:
            parser.error("tune on a two-prop document requires --deltas")
        if len(deltas) != plan.m:
            parser.error(f"need {plan.m} risk budgets, got {len(deltas)}")

        def fam(z):
            return build_two_prop_plan(plan.zone_lo, plan.zone_hi, z,
                                       base_alphas=plan.base_alphas,
                                       base_betas=plan.base_betas, **sizing)

        top = max(max(plan.base_alphas), max(plan.base_betas))
        res = tune_two_prop(fam, deltas, tol=args.tol,
                            zeta_max=args.zeta_max or 1.0 / top,
                            eta=args.eta, certify_tol=args.certify_tol,
                            budget=args.budget)
        trace_req = list(deltas)
    else:
        if plan.kind == "one-sided":
            if deltas is None:
                deltas = (plan.alpha, plan.beta)

            def fam(z):
                return build_one_sided_plan(plan.model, plan.family,
                                            plan.theta0, plan.theta1,
                                            plan.alpha, plan.beta, z,
                                            tiebreak=plan.tiebreak, **sizing)
        else:
            if deltas is None:
                parser.error("tune on a multi-hypothesis document requires --deltas")

            def fam(z):
                return build_multihyp_plan(plan.model, plan.family,
                                           plan.zone_lo, plan.zone_hi, z,
                                           base_alphas=plan.base_alphas,
                                           base_betas=plan.base_betas,
                                           c_policy=plan.c_policy, **sizing)

        if len(deltas) != plan.m:
            parser.error(f"need {plan.m} risk budgets, got {len(deltas)}")
        top = max(max(plan.base_alphas), max(plan.base_betas))
        res = tune_zeta(fam, deltas, tol=args.tol,
                        zeta_max=args.zeta_max or 1.0 / top)
        trace_req = list(deltas)
    trace = {"zeta": res.zeta, "bracket": list(res.bracket),
             "iterations": res.iterations, "tol": args.tol,
             "deltas": trace_req}
    out = args.out or args.plan
    _write_text(out, dump_doc(plan_to_doc(res.plan, build=build, tuning=trace)))
    print(f"tuned zeta {_FMT(res.zeta)} (bracket {_FMT(res.bracket[0])}.."
          f"{_FMT(res.bracket[1])}, {res.iterations} evaluations) -> {out}")
    return 0


def _cmd_certify(args, parser) -> int:
    plan, _ = load_plan(args.plan)
    if not isinstance(plan, TwoPropPlan):
        parser.error("certify applies to two-prop documents")
    if len(args.deltas) != plan.m:
        parser.error(f"need {plan.m} risk budgets, got {len(args.deltas)}")
    all_proved = True
    for i, delta in enumerate(args.deltas):
        cert = certify_risk(plan, i, delta, eta=args.eta, tol=args.tol,
                            budget=args.budget)
        print(f"hypothesis {i}: {cert.verdict} (risk budget {_FMT(delta)}, "
              f"max upper bound {_FMT(cert.max_upper)}, "
              f"{cert.explored} rectangles)")
        all_proved = all_proved and cert.proved
    return 0 if all_proved else 1


def _simulate_two_prop(plan: TwoPropPlan, p_x, p_y, trials, seed):
    last = plan.stages[-1]
    accepted = np.empty(trials, dtype=np.int64)
    nstop = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        rng = _trial_rng(seed, t)
        xs = (rng.random(last.n_x) < p_x).astype(np.int64)
        ys = (rng.random(last.n_y) < p_y).astype(np.int64)
        out = run_two_prop(plan, iter(xs.tolist()), iter(ys.tolist()))
        accepted[t] = out.accepted_index
        nstop[t] = out.sample_count
    return _summarize(p_x - p_y, trials, seed, accepted, nstop, plan.m, None)


def _sim_csv(names, reports, label_cols, labels) -> str:
    n_hyp = max(len(r.accept_freq) for r in reports)
    head = ["runner", *label_cols, "trials", "seed"]
    head += [f"accept_h{i}" for i in range(n_hyp)]
    head += [f"se_h{i}" for i in range(n_hyp)]
    head += ["asn", "asn_se", "stop_p50", "stop_p90", "stop_p99",
             "max_samples", "forced_rate"]
    lines = [",".join(head)]
    for name, rep, lab in zip(names, reports, labels):
        row = [name, *(_FMT(float(v)) for v in lab), str(rep.trials), str(rep.seed)]
        freq = list(rep.accept_freq) + [float("nan")] * (n_hyp - len(rep.accept_freq))
        ses = list(rep.accept_se) + [float("nan")] * (n_hyp - len(rep.accept_se))
        row += [_FMT(float(v)) for v in freq + ses]
        row += [_FMT(rep.asn), _FMT(rep.asn_se)]
        row += [_FMT(rep.stop_percentiles[q]) for q in (50, 90, 99)]
        row += [str(rep.max_samples), _FMT(rep.forced_rate)]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _cmd_simulate(args, parser) -> int:
    plan, _ = load_plan(args.plan)
    if isinstance(plan, TwoPropPlan):
        if args.theta_x is None or args.theta_y is None:
            parser.error("simulate on a two-prop document requires "
                         "--theta-x and --theta-y")
        rep = _simulate_two_prop(plan, args.theta_x, args.theta_y,
                                 args.trials, args.seed)
        text = _sim_csv(["two-prop"], [rep], ["p_x", "p_y"],
                        [(args.theta_x, args.theta_y)])
    else:
        if args.theta is None:
            parser.error("simulate requires --theta for one-sample documents")
        rep = sim_simulate(plan, args.theta, args.trials, args.seed)
        text = _sim_csv(["plan"], [rep], ["theta"], [(args.theta,)])
    _write_text(args.out, text)
    freq = ", ".join(f"h{i}={f:.4f}" for i, f in enumerate(rep.accept_freq))
    print(f"{args.trials} trials: accept {freq}; mean samples {rep.asn:.2f}; "
          f"max {rep.max_samples}")
    return 0


def _cmd_compare(args, parser) -> int:
    plan, _ = load_plan(args.plan)
    if isinstance(plan, TwoPropPlan):
        parser.error("compare runs on one-sample documents")
    runners = [plan]
    names = ["plan"]
    if args.sprt:
        if plan.kind != "one-sided":
            parser.error("--sprt requires a one-sided document")
        runners.append(SprtSpec(model=plan.model, theta0=plan.theta0,
                                theta1=plan.theta1, alpha=plan.alpha,
                                beta=plan.beta, cap=args.sprt_cap))
        names.append("sprt")
    report = sim_compare(runners, args.grid, args.trials, args.seed, names=names)
    _write_text(args.out, report.to_csv())
    if args.out:
        print(f"comparison over {len(args.grid)} parameter points, "
              f"{args.trials} trials each -> {args.out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seqtest",
        description="Design, evaluate, tune, certify, and simulate "
                    "confidence-limit-driven sequential tests.",
    )
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("design", help="build a plan and write its document")
    d.add_argument("--kind", choices=["one-sided", "multi", "two-prop"],
                   default="one-sided")
    d.add_argument("--model", choices=["bernoulli", "poisson"], default="bernoulli")
    d.add_argument("--limits", choices=["exact", "chernoff", "approx"],
                   default="exact")
    d.add_argument("--approx-width", type=float, default=0.5,
                   help="blend weight for the approx limit family")
    d.add_argument("--theta0", type=float)
    d.add_argument("--theta1", type=float)
    d.add_argument("--alpha", type=float)
    d.add_argument("--beta", type=float)
    d.add_argument("--zones", type=_parse_zones,
                   help="indifference zones as lo:hi[,lo:hi...]")
    d.add_argument("--alphas", type=lambda s: _parse_floats(s, "--alphas"),
                   help="base risk coefficients per zone boundary")
    d.add_argument("--betas", type=lambda s: _parse_floats(s, "--betas"))
    d.add_argument("--zeta", type=float, required=True)
    d.add_argument("--stages", type=int, default=1)
    d.add_argument("--schedule", choices=["arithmetic", "geometric"],
                   default="geometric")
    d.add_argument("--stage-ns", type=lambda s: _parse_ints(s, "--stage-ns"),
                   help="explicit stage sizes, overriding --stages/--schedule")
    d.add_argument("--fully-sequential", action="store_true")
    d.add_argument("--tiebreak", default="likelihood-ratio",
                   choices=["likelihood-ratio", "always-accept", "always-reject"])
    d.add_argument("--out", required=True)
    d.set_defaults(fn=_cmd_design)

    o = sub.add_parser("oc", help="exact operating characteristics to CSV")
    o.add_argument("--plan", required=True)
    o.add_argument("--grid", type=lambda s: _parse_grid(s, "--grid"),
                   help="parameter grid start:stop:step")
    o.add_argument("--grid-x", type=lambda s: _parse_grid(s, "--grid-x"))
    o.add_argument("--grid-y", type=lambda s: _parse_grid(s, "--grid-y"))
    o.add_argument("--out")
    o.set_defaults(fn=_cmd_oc)

    t = sub.add_parser("tune", help="bisect the risk scale, update the document")
    t.add_argument("--plan", required=True)
    t.add_argument("--tol", type=float, default=1e-3)
    t.add_argument("--deltas", type=lambda s: _parse_floats(s, "--deltas"),
                   help="risk budget per hypothesis")
    t.add_argument("--zeta-max", type=float)
    t.add_argument("--eta", type=float, default=0.01,
                   help="truncation loss per stage and side (two-prop)")
    t.add_argument("--certify-tol", type=float, default=1e-3)
    t.add_argument("--budget", type=int, default=20_000)
    t.add_argument("--out", help="output path (default: rewrite --plan)")
    t.set_defaults(fn=_cmd_tune)

    c = sub.add_parser("certify", help="branch-and-bound risk certificates")
    c.add_argument("--plan", required=True)
    c.add_argument("--deltas", required=True,
                   type=lambda s: _parse_floats(s, "--deltas"))
    c.add_argument("--eta", type=float, default=0.01)
    c.add_argument("--tol", type=float, default=1e-3)
    c.add_argument("--budget", type=int, default=20_000)
    c.set_defaults(fn=_cmd_certify)

    s = sub.add_parser("simulate", help="seeded Monte Carlo for one plan")
    s.add_argument("--plan", required=True)
    s.add_argument("--theta", type=float)
    s.add_argument("--theta-x", type=float)
    s.add_argument("--theta-y", type=float)
    s.add_argument("--trials", type=int, default=10_000)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out")
    s.set_defaults(fn=_cmd_simulate)

    m = sub.add_parser("compare", help="plan versus probability-ratio test")
    m.add_argument("--plan", required=True)
    m.add_argument("--grid", required=True,
                   type=lambda s: _parse_grid(s, "--grid"))
    m.add_argument("--trials", type=int, default=10_000)
    m.add_argument("--seed", type=int, required=True)
    m.add_argument("--sprt", action="store_true",
                   help="add the probability-ratio test at the design risks")
    m.add_argument("--sprt-cap", type=int)
    m.add_argument("--out")
    m.set_defaults(fn=_cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args, parser)
    except (SeqTestError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
