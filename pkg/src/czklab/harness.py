"""Experiment drivers: suites of tree checks, estimates, window tails, benches."""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .gi import GraphPair, Witness, gen_instance
from .kernels import binomial_outside_mass
from .params import WeightParams, f_bound_holds, weight_params
from .prover import (
    Outcome,
    experiment_splice_after,
    experiment_splice_first,
    live_channel,
    run_attempt,
    sample_addresses,
)
from .protocol import ConfigurationError, Instance
from .simulators import fresh_verifier, make_simulator, quantile, run_simulator
from .stats import Estimate, chi2_gof, derive_seed, two_sample_chi2, wilson
from .tree import (
    build_tree,
    check_fail_bound,
    check_snake_decomposition,
    check_weight_bounds,
    classes,
    decompose_snakes,
    weights,
)

EXACT_WINDOW_MAX_M = 5000
KERNEL_WINDOW_MAX_M = 100_000


@dataclass
class ExperimentConfig:
    k: int = 3
    m: int = 2
    v: int = 6
    simulator: str = "rewinding"
    trials: int = 1000
    seed: int = 0
    cap: int | None = None
    max_attempts: int = 100_000
    workers: int = 1

    def __post_init__(self) -> None:
        for name in ("k", "m", "v", "trials", "max_attempts", "workers"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive")

    @classmethod
    def paper_faithful(cls, v: int = 6, **kw) -> "ExperimentConfig":
        k = min(v, 4)
        warnings.warn(
            f"paper-faithful profile: k={k}, m={k ** 3}; runs may be very slow",
            RuntimeWarning,
            stacklevel=2,
        )
        return cls(k=k, m=k**3, v=v, **kw)


def parallel_map(fn: Callable, items: Sequence, workers: int = 1) -> list:
    """Order-preserving map; a process pool when ``workers`` > 1."""
    if workers <= 1 or len(items) < 2:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


def mc_estimate(event: Callable[[int], bool], trials: int, seed: int, label: str = "event") -> Estimate:
    """Wilson estimate of Pr[event(derived seed)] over ``trials`` seeds."""
    if trials < 30:
        raise ConfigurationError("mc_estimate needs at least 30 trials")
    hits = sum(bool(event(derive_seed(seed, label, n))) for n in range(trials))
    return wilson(hits, trials)


# binomial window ---------------------------------------------------------


@dataclass
class WindowResult:
    m: int
    rho: Fraction
    k: int
    lo: int  # smallest integer strictly inside
    hi: int  # largest integer strictly inside
    violation: float
    violation_exact: Fraction | None
    shifted_violation: float
    shifted_exact: Fraction | None
    chernoff: float
    method: str

    def holds(self, threshold: float = 0.01) -> bool:
        return self.violation < threshold and self.shifted_violation < threshold

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "rho": str(self.rho),
            "k": self.k,
            "window": [self.lo, self.hi],
            "violation": self.violation,
            "violation_exact": None if self.violation_exact is None else str(self.violation_exact),
            "shifted_violation": self.shifted_violation,
            "chernoff": self.chernoff,
            "method": self.method,
        }


def window_bounds(m: int, rho: Fraction, k: int) -> tuple[int, int]:
    """Integers l with (1-1/k) rho m < l < (1+1/k) rho m, as an inclusive range."""
    lower = (1 - Fraction(1, k)) * rho * m
    upper = (1 + Fraction(1, k)) * rho * m
    lo = math.floor(lower) + 1
    hi = math.ceil(upper) - 1
    return lo, hi


def _exact_inside(n: int, rho: Fraction, lo: int, hi: int) -> Fraction:
    a, b = rho.numerator, rho.denominator
    num = 0
    for l in range(max(lo, 0), min(hi, n) + 1):
        num += math.comb(n, l) * a**l * (b - a) ** (n - l)
    return Fraction(num, b**n)


def check_binomial_window(m: int, rho, k: int, backend: str | None = None) -> WindowResult:
    """Mass of Binomial(m, rho) outside the window, and of the one-slot-replaced count.

    Replacing one uniformly chosen slot by a success gives 1 + Binomial(m-1, rho).
    """
    rho = rho if isinstance(rho, Fraction) else Fraction(str(rho))
    if not 0 < rho <= 1:
        raise ConfigurationError("rho must lie in (0, 1]")
    if m < 1 or k < 1:
        raise ConfigurationError("m and k must be positive")
    lo, hi = window_bounds(m, rho, k)
    chernoff = min(1.0, 2 * math.exp(-float(rho) * m / (3 * k * k)))
    if m <= EXACT_WINDOW_MAX_M:
        v_exact = 1 - _exact_inside(m, rho, lo, hi)
        s_exact = 1 - _exact_inside(m - 1, rho, lo - 1, hi - 1)
        return WindowResult(m, rho, k, lo, hi, float(v_exact), v_exact, float(s_exact), s_exact, chernoff, "exact")
    if m <= KERNEL_WINDOW_MAX_M:
        r = float(rho)
        v = binomial_outside_mass(m, r, lo, hi, backend)
        s = binomial_outside_mass(m - 1, r, lo - 1, hi - 1, backend)
        return WindowResult(m, rho, k, lo, hi, v, None, s, None, chernoff, "compensated-float")
    raise ConfigurationError(
        f"m={m} too large for summation; use the Chernoff bound mode instead ({chernoff:.3g})"
    )


# tree suites ---------------------------------------------------------------


@dataclass
class TreeCheckRecord:
    trial: int
    seed: int
    completed: bool
    tree_size: int
    snakes: int
    succeed: Fraction
    fail: Fraction
    interesting: Fraction
    violations: list[str]

    def to_dict(self) -> dict:
        return {
            "trial": self.trial,
            "seed": self.seed,
            "completed": self.completed,
            "tree_size": self.tree_size,
            "snakes": self.snakes,
            "succeed": str(self.succeed),
            "fail": str(self.fail),
            "interesting": str(self.interesting),
            "violations": self.violations,
        }


def check_one_tree(records, k: int, wp: WeightParams, completed: bool) -> tuple[list[str], dict]:
    tree = build_tree(records, k, wp.N)
    cls = classes(tree)
    out: list[str] = []
    try:
        snakes = decompose_snakes(tree, cls)
    except Exception as exc:  # structural violation is itself a finding
        return [f"decomposition: {exc}"], {"tree": tree, "snakes": [], "report": weights(tree, wp, cls)}
    report = weights(tree, wp, cls)
    for name, res in (
        ("snakes", check_snake_decomposition(tree, snakes, cls)),
        ("weights", check_weight_bounds(tree, snakes, wp, report)),
        ("fail-bound", check_fail_bound(tree, snakes, wp, report, completed)),
    ):
        out += [f"{name}: {v}" for v in res.violations]
    return out, {"tree": tree, "snakes": snakes, "report": report}


def _tree_trial(args) -> TreeCheckRecord:
    x, k, m, N, sim_kind, witness, seed, trial = args
    tseed = derive_seed(seed, "tree-trial", trial)
    ver = fresh_verifier(x, k, m, derive_seed(tseed, "hash"), N)
    run = run_simulator(make_simulator(sim_kind, witness), x, ver, derive_seed(tseed, "sim"), cap=N)
    wp = weight_params(k, N, m)
    violations, info = check_one_tree(run.trace, k, wp, run.completed)
    rep = info["report"]
    return TreeCheckRecord(
        trial, seed, run.completed, len(info["tree"]), len(info["snakes"]),
        rep.succeed, rep.fail, rep.interesting, violations,
    )


def tree_suite(
    x: Instance,
    k: int,
    m: int,
    trials: int,
    seed: int,
    N: int,
    simulator: str = "rewinding",
    witness: Witness | None = None,
    workers: int = 1,
) -> list[TreeCheckRecord]:
    args = [(x, k, m, N, simulator, witness, seed, n) for n in range(trials)]
    return parallel_map(_tree_trial, args, workers)


def f_bound_grid(h_max: int = 64, beta_max: int = 12) -> list[tuple[int, int]]:
    """(h, beta) pairs where F(h) < h^(beta+1)/(beta+1); empty when the bound holds."""
    return [
        (h, b) for b in range(1, beta_max + 1) for h in range(1, h_max + 1) if not f_bound_holds(h, b)
    ]


def address_chi2(wp: WeightParams, draws: int, seed: int) -> tuple[float, float, np.ndarray]:
    """Chi-square of vectorised address draws against c f(h)/N per address."""
    rng = np.random.default_rng(seed)
    addr = sample_addresses(wp, draws, rng)
    counts = np.zeros((wp.k, wp.N), dtype=np.int64)
    np.add.at(counts, (addr[:, 0] - 1, addr[:, 1] - 1), 1)
    probs = np.array(
        [[float(wp.address_weight(level))] * wp.N for level in range(1, wp.k + 1)]
    )
    stat, p = chi2_gof(counts.ravel(), probs.ravel() * draws)
    return stat, p, counts


# experiments ---------------------------------------------------------------


@dataclass
class ExperimentComparison:
    trials: int
    statistic: float
    dof: int
    p_value: float
    categories: int
    misplaced_first: int

    def to_dict(self) -> dict:
        return asdict(self)


def _exp_trial(args):
    which, x, wp, m, sim_kind, seed, n = args
    fn = experiment_splice_first if which == 1 else experiment_splice_after
    res = fn(x, wp, make_simulator(sim_kind), m, derive_seed(seed, f"experiment-{which}", n))
    return res.label(), res.misplaced


def compare_experiments(
    x: Instance,
    wp: WeightParams,
    m: int,
    trials: int,
    seed: int,
    simulator: str = "rewinding",
    workers: int = 1,
) -> ExperimentComparison:
    """Chi-square homogeneity of (tree fingerprint, class of the address) across the two orders."""
    a = parallel_map(_exp_trial, [(1, x, wp, m, simulator, seed, n) for n in range(trials)], workers)
    b = parallel_map(_exp_trial, [(2, x, wp, m, simulator, seed, n) for n in range(trials)], workers)
    la, lb = [r[0] for r in a], [r[0] for r in b]
    stat, dof, p = two_sample_chi2(la, lb)
    return ExperimentComparison(trials, stat, dof, p, len(set(la) | set(lb)), sum(r[1] for r in a))


@dataclass
class DirectionReport:
    trials: int
    succeeded: int
    failed: int
    aborted: int
    mean_succeed: float
    mean_fail: float
    sigma_succeed: float
    sigma_fail: float

    @property
    def p_succeeded(self) -> float:
        return self.succeeded / self.trials

    @property
    def p_failed(self) -> float:
        return self.failed / self.trials

    def succeed_ok(self, z: float = 4.0) -> bool:
        return self.p_succeeded >= self.mean_succeed - z * self.sigma_succeed

    def fail_ok(self, z: float = 4.0) -> bool:
        return self.p_failed <= self.mean_fail + z * self.sigma_fail

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(p_succeeded=self.p_succeeded, p_failed=self.p_failed)
        return d


def _direction_trial(args):
    x, wp, m, sim_kind, witness, seed, n = args
    aseed = derive_seed(seed, "direction", n)
    out = run_attempt(x, wp, make_simulator(sim_kind, witness), live_channel(x, aseed), aseed, m, analyze=True)
    rep = weights(out.tree, wp)
    return out.operational.value, float(rep.succeed), float(rep.fail)


def _paired_sd(hits: np.ndarray, w: np.ndarray) -> float:
    """Standard error of mean(hits - w); binomial at the mean weight when the sample is degenerate."""
    n = len(hits)
    sd = float(np.std(hits - w, ddof=1)) if n > 1 else 0.0
    if sd == 0.0:
        p = float(w.mean()) if n else 0.0
        sd = math.sqrt(p * (1 - p))
    return sd / math.sqrt(max(n, 1))


def outcome_direction(
    x: Instance,
    wp: WeightParams,
    m: int,
    trials: int,
    seed: int,
    simulator: str = "rewinding",
    witness: Witness | None = None,
    workers: int = 1,
) -> DirectionReport:
    """Matched attempts: operational outcome against the tree's own SUCCEED / FAIL weight."""
    rows = parallel_map(
        _direction_trial, [(x, wp, m, simulator, witness, seed, n) for n in range(trials)], workers
    )
    succ = np.array([r[0] == Outcome.SUCCEEDED.value for r in rows], dtype=float)
    fail = np.array([r[0] == Outcome.FAILED.value for r in rows], dtype=float)
    ws = np.array([r[1] for r in rows])
    wf = np.array([r[2] for r in rows])
    n = len(rows)
    # paired differences carry both sources of noise
    sd_s = _paired_sd(succ, ws)
    sd_f = _paired_sd(fail, wf)
    return DirectionReport(
        n, int(succ.sum()), int(fail.sum()), n - int(succ.sum()) - int(fail.sum()),
        float(ws.mean()), float(wf.mean()), sd_s, sd_f,
    )


# blowup --------------------------------------------------------------------


@dataclass
class BlowupRow:
    simulator: str
    k: int
    m: int
    trials: int
    mean_steps: float
    p50: int
    p90: int
    p99: int
    mean_tree_size: float
    mean_sibling_group: float
    mean_first_block_commits: float
    sd_first_block_commits: float


def _blowup_trial(args):
    x, k, m, sim_kind, witness, seed, n = args
    ver = fresh_verifier(x, k, m, derive_seed(seed, f"blowup-hash-{k}", n))
    run = run_simulator(make_simulator(sim_kind, witness), x, ver, derive_seed(seed, f"blowup-sim-{k}", n))
    tree = build_tree(run.trace, k)
    groups: dict = {}
    for v in tree.vertices.values():
        groups[v.parent] = groups.get(v.parent, 0) + 1
    mean_group = sum(groups.values()) / len(groups) if groups else 0.0
    return run.steps, len(tree), mean_group, run.commits[0]


def blowup_bench(
    x: Instance,
    ks: Iterable[int],
    trials: int,
    seed: int,
    m: int = 1,
    simulator: str = "rewinding",
    witness: Witness | None = None,
    workers: int = 1,
) -> list[BlowupRow]:
    rows = []
    for k in ks:
        res = parallel_map(
            _blowup_trial, [(x, k, m, simulator, witness, seed, n) for n in range(trials)], workers
        )
        steps = [r[0] for r in res]
        commits = [r[3] for r in res]
        rows.append(
            BlowupRow(
                simulator, k, m, trials,
                statistics.fmean(steps), quantile(steps, 0.5), quantile(steps, 0.9), quantile(steps, 0.99),
                statistics.fmean(r[1] for r in res), statistics.fmean(r[2] for r in res),
                statistics.fmean(commits), statistics.stdev(commits) if len(commits) > 1 else 0.0,
            )
        )
    return rows


# reports -------------------------------------------------------------------


def jsonable(obj: Any) -> Any:
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(f"{float(obj):.12g}")
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def render_jsonl(records: Iterable[dict]) -> str:
    return "".join(json.dumps(jsonable(r), sort_keys=True) + "\n" for r in records)


def render_csv(records: Sequence[dict]) -> str:
    if not records:
        return ""
    keys = sorted({k for r in records for k in r})
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in jsonable(r).items()})
    return buf.getvalue()


def write_report(path: str | Path | None, text: str) -> None:
    if path is None:
        return
    Path(path).write_text(text, encoding="utf-8")


def default_instance(v: int, isomorphic: bool, seed: int) -> tuple[GraphPair, Witness | None]:
    return gen_instance(v, isomorphic, seed)
