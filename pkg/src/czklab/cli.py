"""Command-line entry point: ``czklab <command> [flags]``.

Exit codes: 0 ok, 1 a checked property was violated, 2 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings

from . import harness
from .gi import gen_instance
from .params import weight_params
from .prover import Verdict, decide, live_channel, run_attempt
from .protocol import ConfigurationError
from .simulators import make_simulator, measure_step_cap
from .stats import derive_seed, wilson

COMMANDS = ("attack", "estimate", "lemmas", "experiment", "blowup", "params")


class UsageError(Exception):
    pass


def _bool(text: str) -> bool:
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    env_seed = os.environ.get("CZKLAB_SEED")
    p.add_argument("--seed", type=int, default=int(env_seed) if env_seed else 0)
    p.add_argument("--k", type=int, default=None, help="number of nested sessions")
    p.add_argument("--m", type=int, default=None, help="copies per block")
    p.add_argument("--graph-size", type=int, default=6, dest="graph_size")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--simulator", choices=("witness", "rewinding"), default=None)
    p.add_argument("--cap", type=int, default=None, help="step cap N")
    p.add_argument("--iso", type=_bool, default=True)
    p.add_argument("--rho", type=str, default="0.1")
    p.add_argument("--max-attempts", type=int, default=100_000, dest="max_attempts")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--paper-faithful", action="store_true", dest="paper_faithful")
    p.add_argument("--out", default=None, help="report path (stdout when omitted)")
    p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
    p.add_argument("--config", default=None, help="key=value file mirroring the flags")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="czklab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "attack": "run the splicing prover / decider on generated instances",
        "estimate": "estimate succeed / fail / abort frequencies of single attempts",
        "lemmas": "tree checks, weight bounds, window tail and F-bound grid",
        "experiment": "compare splice-first and splice-after tree distributions",
        "blowup": "rewinding cost per number of sessions",
        "params": "print the height-weighting parameters",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def _read_config(path: str) -> dict[str, str]:
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for n, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise UsageError(f"{path}:{n}: expected key=value")
                key, val = (s.strip() for s in line.split("=", 1))
                out[key.replace("-", "_")] = val
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    return out


def parse(argv: list[str] | None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        explicit = set()
        for tok in argv or sys.argv[1:]:
            if tok.startswith("--"):
                explicit.add(tok[2:].split("=", 1)[0].replace("-", "_"))
        for key, val in _read_config(args.config).items():
            if not hasattr(args, key) or key in ("config", "command"):
                raise UsageError(f"unknown config key {key!r}")
            if key in explicit:
                continue
            # re-parse through the flag's own type
            sub = argparse.ArgumentParser(parents=[_common()], add_help=False)
            flag = "--" + key.replace("_", "-")
            try:
                if key == "paper_faithful":
                    setattr(args, key, _bool(val))
                else:
                    setattr(args, key, getattr(sub.parse_args([flag, val]), key))
            except SystemExit as exc:
                raise UsageError(f"bad config value for {key}: {val!r}") from exc
    return args


def _resolve(args: argparse.Namespace) -> None:
    if args.paper_faithful:
        if args.m is not None or args.k is not None:
            raise UsageError("--paper-faithful fixes k and m; drop --k/--m")
        args.k = min(args.graph_size, 4)
        args.m = args.k**3
        warnings.warn(f"paper-faithful profile: k={args.k}, m={args.m}", RuntimeWarning, stacklevel=2)
    defaults = {
        "attack": dict(k=3, m=2, trials=20, simulator="witness"),
        "estimate": dict(k=3, m=2, trials=200, simulator="rewinding"),
        "lemmas": dict(k=3, m=2, trials=100, simulator="rewinding"),
        "experiment": dict(k=2, m=1, trials=1000, simulator="rewinding"),
        "blowup": dict(k=5, m=1, trials=200, simulator="rewinding"),
        "params": dict(k=3, m=1, trials=1, simulator="rewinding"),
    }[args.command]
    for key, val in defaults.items():
        if getattr(args, key) is None:
            setattr(args, key, val)
    for key in ("k", "m", "trials", "graph_size", "workers", "max_attempts"):
        if getattr(args, key) < 1:
            raise UsageError(f"--{key.replace('_', '-')} must be positive")
    if args.cap is not None and args.cap < 1:
        raise UsageError("--cap must be positive")
    if args.command == "blowup" and args.m != 1:
        raise UsageError("blowup runs with m=1 only")
    if args.command == "estimate" and args.trials < 30:
        raise UsageError("estimate needs --trials >= 30")
    if args.command in ("params", "lemmas", "estimate", "attack", "experiment") and args.k < 2:
        raise UsageError("address weighting needs --k >= 2")
    if not 3 <= args.graph_size <= 12:
        raise UsageError("--graph-size must lie in [3, 12]")
    if not args.iso and args.graph_size > 8:
        raise UsageError("non-isomorphic instances need --graph-size <= 8")


def _cap(args, x, witness) -> int:
    if args.cap is not None:
        return args.cap
    sim = make_simulator(args.simulator, witness)
    return measure_step_cap(sim, x, args.k, args.m, 100, derive_seed(args.seed, "cap"))


def cmd_params(args) -> tuple[list[dict], int]:
    N = args.cap if args.cap is not None else 1
    wp = weight_params(args.k, N, args.m)
    rec = {
        "k": wp.k,
        "N": wp.N,
        "beta": wp.beta,
        "c": wp.c,
        "F_k": wp.F(wp.k),
        "level_probability": {str(i): wp.level_probability(i) for i in range(1, wp.k + 1)},
        "short_snake_threshold": wp.short_threshold(),
    }
    return [rec], 0


def cmd_attack(args) -> tuple[list[dict], int]:
    rows = []
    inl = 0
    for n in range(args.trials):
        pair, wit = gen_instance(args.graph_size, args.iso, derive_seed(args.seed, "attack-instance", n))
        x = pair.to_instance()
        N = _cap(args, x, wit)
        verdict, res = decide(
            pair, args.k, args.m, N, derive_seed(args.seed, "attack", n),
            simulator=args.simulator, witness=wit, max_attempts=args.max_attempts,
        )
        inl += verdict is Verdict.IN_L
        rows.append({"trial": n, "verdict": verdict.value, "attempts": res.attempts, "N": N})
    est = wilson(inl, args.trials)
    summary = {"summary": "attack", "iso": args.iso, "in_l": est.to_dict()}
    return rows + [summary], 0


def cmd_estimate(args) -> tuple[list[dict], int]:
    pair, wit = gen_instance(args.graph_size, args.iso, derive_seed(args.seed, "instance"))
    x = pair.to_instance()
    N = _cap(args, x, wit)
    wp = weight_params(args.k, N, args.m)
    counts = {"succeeded": 0, "failed": 0, "aborted": 0}
    for n in range(args.trials):
        s = derive_seed(args.seed, "estimate", n)
        out = run_attempt(x, wp, make_simulator(args.simulator, wit), live_channel(x, s), s, args.m)
        counts[out.operational.value] += 1
    rows = [{"outcome": k, **wilson(v, args.trials).to_dict()} for k, v in counts.items()]
    return rows, 0


def cmd_lemmas(args) -> tuple[list[dict], int]:
    pair, wit = gen_instance(args.graph_size, True, derive_seed(args.seed, "instance"))
    x = pair.to_instance()
    N = _cap(args, x, wit)
    recs = harness.tree_suite(
        x, args.k, args.m, args.trials, args.seed, N, args.simulator, wit, args.workers
    )
    rows: list[dict] = []
    bad = 0
    for r in recs:
        if r.violations:
            bad += 1
            print(f"violation: seed={r.seed} trial={r.trial}: {r.violations[0]}", file=sys.stderr)
            rows.append({"check": "tree", **r.to_dict()})
    rows.append({"check": "tree-suite", "trials": len(recs), "violating_trials": bad, "N": N})
    grid = harness.f_bound_grid()
    rows.append({"check": "f-bound-grid", "h_max": 64, "beta_max": 12, "failures": grid})
    win = harness.check_binomial_window(args.k**3, args.rho, args.k)
    rows.append({"check": "window", **win.to_dict(), "below_0.01": win.holds()})
    return rows, 1 if bad or grid else 0


def cmd_experiment(args) -> tuple[list[dict], int]:
    pair, wit = gen_instance(args.graph_size, True, derive_seed(args.seed, "instance"))
    x = pair.to_instance()
    N = _cap(args, x, wit)
    wp = weight_params(args.k, N, args.m)
    cmp = harness.compare_experiments(x, wp, args.m, args.trials, args.seed, args.simulator, args.workers)
    return [{"check": "experiment-order", "N": N, **cmp.to_dict()}], 0 if cmp.p_value >= 0.01 else 1


def cmd_blowup(args) -> tuple[list[dict], int]:
    pair, wit = gen_instance(args.graph_size, True, derive_seed(args.seed, "instance"))
    x = pair.to_instance()
    ks = range(1, args.k + 1)
    rows = harness.blowup_bench(x, ks, args.trials, args.seed, 1, args.simulator, wit, args.workers)
    base = harness.blowup_bench(x, ks, min(args.trials, 20), args.seed, 1, "witness", wit)
    return [vars(r) for r in rows + base], 0


HANDLERS = {
    "attack": cmd_attack,
    "estimate": cmd_estimate,
    "lemmas": cmd_lemmas,
    "experiment": cmd_experiment,
    "blowup": cmd_blowup,
    "params": cmd_params,
}


def render(rows: list[dict], fmt: str) -> str:
    return harness.render_csv(rows) if fmt == "csv" else harness.render_jsonl(rows)


def main(argv: list[str] | None = None) -> int:
    try:
        args = parse(argv)
        _resolve(args)
        rows, code = HANDLERS[args.command](args)
    except SystemExit as exc:  # argparse usage errors
        return 2 if exc.code else 0
    except (UsageError, ConfigurationError) as exc:
        print(f"czklab: error: {exc}", file=sys.stderr)
        return 2
    text = render(rows, args.format)
    if args.out:
        harness.write_report(args.out, text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
