"""fedgov command line: validate, run, check and gen.

Exit codes: 0 pass, 1 check failure, 2 trace/spec error, 3 internal error.
"""

from __future__ import annotations

import argparse
import math
import shutil
import sys
from fractions import Fraction
from pathlib import Path

from .checks import fairness_report
from .engine import Engine, EngineConfig, RunLog
from .errors import InternalError, ScenarioError, TraceError
from .export import metrics_csv, report_json, state_json
from .scenario import ScenarioSpec, check_admissible, generate
from .trace import format_trace, read_trace

OK, CHECK_FAILED, INPUT_ERROR, INTERNAL_ERROR = 0, 1, 2, 3
DEFAULT_QUIET_TERMS = 300
DEFAULT_SAMPLES = 100

ARTIFACTS = ("trace.txt", "run_log.jsonl", "final_state.json", "metrics.csv", "fairness_report.json")


def _fraction(text: str) -> Fraction:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from exc
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _config(args, n: int, tau: int) -> EngineConfig:
    return EngineConfig(
        n,
        tau,
        child_min_pop_enforced=args.enforce_child_min,
        max_children=args.max_children,
        sortition_seed=getattr(args, "sortition", None),
    )


def _add_structure_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--enforce-child-min", action="store_true", help="non-leaf children need at least n+1 people")
    p.add_argument("--max-children", type=int, default=None, help="cap on children per community")


def cmd_validate(args) -> int:
    events = read_trace(args.trace)
    check_admissible(events, _config(args, args.n, args.tau))
    print(f"ok: {len(events)} events admissible")
    return OK


def _load_inputs(args):
    if args.trace:
        if args.n is None or args.tau is None:
            raise TraceError("--n and --tau are required with --trace")
        events = read_trace(args.trace)
        config = _config(args, args.n, args.tau)
        last = events[-1].t if events else 0
        horizon = args.horizon if args.horizon is not None else last + DEFAULT_QUIET_TERMS * config.tau
        return events, config, horizon, format_trace(events)
    spec = ScenarioSpec.load(args.gen)
    overrides = {k: v for k, v in (("n", args.n), ("tau", args.tau)) if v is not None}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        spec = ScenarioSpec.from_dict({**spec.to_dict(), **overrides})
    scenario = generate(spec)
    config = spec.engine_config(sortition_seed=args.sortition)
    horizon = args.horizon if args.horizon is not None else scenario.horizon
    return scenario.events, config, horizon, scenario.trace_text()


def cmd_run(args) -> int:
    out = Path(args.out)
    created = not out.exists()
    written: list[Path] = []
    try:
        events, config, horizon, trace_text = _load_inputs(args)
        every = args.sample_every or max(1, math.ceil(horizon / DEFAULT_SAMPLES))
        engine = Engine(config)
        log = engine.run(events, horizon, checkpoints=range(every, horizon + 1, every))
        report = fairness_report(log, args.epsilon)
        out.mkdir(parents=True, exist_ok=True)
        files = {
            "trace.txt": trace_text,
            "run_log.jsonl": log.to_jsonl(),
            "final_state.json": state_json(engine.state),
            "metrics.csv": metrics_csv(engine.samples),
            "fairness_report.json": report_json(report, passed=report.passed()),
        }
        for name in ARTIFACTS:
            path = out / name
            written.append(path)
            path.write_text(files[name], encoding="utf-8")
    except BaseException:
        if created:
            shutil.rmtree(out, ignore_errors=True)
        else:
            for path in written:
                path.unlink(missing_ok=True)
        raise
    print(f"run complete: {len(log)} log entries, fst={report.fst}, horizon={horizon}, artifacts in {out}")
    return OK


def cmd_check(args) -> int:
    try:
        log = RunLog.read(args.runlog)
        if "n" not in log.header:
            raise ValueError("header lacks n")
    except (OSError, ValueError) as exc:
        raise TraceError(f"cannot read run log {args.runlog}: {exc}") from exc
    want = {k: getattr(args, k) for k in ("pfr", "eep", "efr")}
    if not any(want.values()):
        want = dict.fromkeys(want, True)
    try:
        report = fairness_report(log, args.epsilon)
    except (KeyError, ValueError) as exc:
        raise TraceError(f"corrupt run log {args.runlog}: {exc}") from exc
    passed = report.passed(**want)
    text = report_json(report, passed=passed, requested=sorted(k for k, v in want.items() if v))
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if want["pfr"]:
        for v in report.pfr_violations:
            print(f"PFR violation t={v.t} f={v.community} v={v.child} seats={v.seats} floor={v.floor}", file=sys.stderr)
    if want["eep"]:
        for f, p in report.eep_failures:
            print(f"EEP gap above epsilon: f={f} p={p} gap={float(report.eep_gaps[(f, p)]):.6f}", file=sys.stderr)
    if want["efr"]:
        for f, v in report.efr_failures:
            print(f"EFR deficit above epsilon: f={f} v={v} deficit={float(report.efr_deficits[(f, v)]):.6f}", file=sys.stderr)
    return OK if passed else CHECK_FAILED


def cmd_gen(args) -> int:
    scenario = generate(ScenarioSpec.load(args.spec), seed=args.seed)
    text = scenario.trace_text()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedgov", description="Simulate fair assemblies in federations of communities.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check that a trace is admissible")
    p.add_argument("trace")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--tau", type=int, default=10)
    _add_structure_flags(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="run a trace or generated scenario and write artifacts")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--trace")
    src.add_argument("--gen", metavar="SPEC")
    p.add_argument("--n", type=int)
    p.add_argument("--tau", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--seed", type=int, help="scenario seed (with --gen)")
    p.add_argument("--sortition", type=int, help="seed for the tie-breaking person order")
    p.add_argument("--out", required=True)
    p.add_argument("--sample-every", type=int, help="metrics sampling period (default: horizon/100)")
    p.add_argument("--epsilon", type=_fraction, default=Fraction(1, 20))
    _add_structure_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("check", help="check a run log for PFR, EEP and EFR")
    p.add_argument("runlog")
    p.add_argument("--pfr", action="store_true")
    p.add_argument("--eep", action="store_true")
    p.add_argument("--efr", action="store_true")
    p.add_argument("--epsilon", type=_fraction, default=Fraction(1, 20))
    p.add_argument("--report", help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("gen", help="generate an admissible trace from a scenario spec")
    p.add_argument("spec")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TraceError, ScenarioError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERROR
    except InternalError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return INTERNAL_ERROR
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return INPUT_ERROR
    except Exception as exc:  # noqa: BLE001 - last-resort exit code
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return INTERNAL_ERROR


if __name__ == "__main__":
    sys.exit(main())
