"""Command-line front end: ``evasim {sweep,mc,oracle,run}``.

Exit status is 0 on success, 1 for usage or config errors and 2 when the
oracle finds an extremality violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, Scenario, config_hash, load_config, with_overrides
from .estimation import GaussianEstimate
from .harness import McSummary, make_policy, run_mc, run_trial
from .oracle import DEFAULT_HORIZON_CAP, enumerate_bang_bang, grid_search, random_problem
from .policies import POLICY_NAMES
from .tse import TerminalSetBuilder, cost_sweep, select, shaping

EXIT_OK, EXIT_USAGE, EXIT_VIOLATION = 0, 1, 2

INIT_METHOD = (
    "truth x0 ~ N(0, P0); evader mean x0 + N(0, P0), cov P0; "
    "pursuer mean x0 + N(0, beta P0), cov beta P0"
)
TRACE_COLUMNS = ("k", "t", "xi", "xi_dot", "u_T", "u_M", "xi_hat_T", "xi_hat_M")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(v: float) -> str:
    return repr(float(v))


def _header(scenario: Scenario, **extra) -> list[str]:
    meta = {"tool": "evasim", "version": __version__, "config_hash": config_hash(scenario), **extra}
    return [f"# {k}={v}" for k, v in meta.items()]


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8", newline="\n")


# -- sweep ---------------------------------------------------------------------

def cmd_sweep(args) -> int:
    scenario = load_config(args.config)
    sw = scenario.sweep
    seed = sw.seed if args.seed is None else args.seed
    grid = sw.grid_points if args.grid_points is None else args.grid_points
    if grid < 2:
        raise ConfigError("--grid-points must be at least 2")
    cfg = scenario.trial
    if not 0 <= sw.step < cfg.n_steps:
        raise ConfigError(f"sweep.step must lie in [0, {cfg.n_steps})")
    # posterior of the evader in one trial, frozen at the sweep step
    trace = run_trial(cfg, seed, sw.policy, trace=True).trace
    n = sw.step
    est = GaussianEstimate(trace["mean_T"][n], trace["cov_T"][n])
    tse = make_policy(cfg, "tse")
    ts = tse.builder.build(est, tse.belief, n)
    rows = cost_sweep(ts, cfg.u_T_max, grid)
    u_star = select(ts, cfg.u_T_max)
    lines = _header(scenario, seed=seed, step=n, grid_points=grid, source_policy=sw.policy)
    lines.append("u,J")
    lines += [f"{_fmt(u)},{_fmt(J)}" for u, J in rows]
    _write(args.out, "\n".join(lines) + "\n")
    print(f"selected u={_fmt(u_star)} shaping={_fmt(shaping(ts))} "
          f"grid_argmax={_fmt(rows[int(np.argmax(rows[:, 1])), 0])}", file=sys.stderr)
    return EXIT_OK


# -- mc ----------------------------------------------------------------------

def _summary_doc(scenario: Scenario, results: dict[str, McSummary]) -> str:
    mc = scenario.mc
    rows = []
    for name, s in results.items():
        st = s.stats
        rows.append({
            "policy": name, "n": st.n, "mean": st.mean, "median": st.median,
            "p5": st.p5, "p20": st.p20, "p80": st.p80, "p95": st.p95,
            f"sskp@{s.radius:g}m": s.sskp,
        })
    doc = {
        "metadata": {
            "tool": "evasim",
            "version": __version__,
            "config_hash": config_hash(scenario),
            "master_seed": mc.seed,
            "n_trials": mc.trials,
            "pairing": "paired: policies share initial state, terminal index and noise per trial",
            "estimate_init": INIT_METHOD,
            "percentile_method": "linear interpolation",
        },
        "policies": rows,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _cdf_doc(scenario: Scenario, s: McSummary) -> str:
    lines = _header(scenario, policy=s.policy, master_seed=scenario.mc.seed, n=s.stats.n)
    lines.append("miss,cdf")
    lines += [f"{_fmt(v)},{_fmt(p)}" for v, p in s.cdf()]
    return "\n".join(lines) + "\n"


def cmd_mc(args) -> int:
    scenario = load_config(args.config)
    policies = None
    if args.policies is not None:
        policies = tuple(p.strip() for p in args.policies.split(",") if p.strip())
        bad = [p for p in policies if p not in POLICY_NAMES]
        if bad or not policies:
            raise ConfigError(f"invalid policy list {args.policies!r}; choose from {', '.join(POLICY_NAMES)}")
    if args.trials is not None and args.trials < 1:
        raise ConfigError("--trials must be at least 1")
    scenario = with_overrides(scenario, trials=args.trials, seed=args.seed, policies=policies)
    mc = scenario.mc
    workers = args.workers or os.cpu_count() or 1
    results = run_mc(scenario.trial, mc.trials, mc.seed, mc.policies, workers=workers, chunk=mc.chunk)
    out = Path(args.out)
    _write(str(out / "summary.json"), _summary_doc(scenario, results))
    for name, s in results.items():
        _write(str(out / f"cdf_{name}.csv"), _cdf_doc(scenario, s))
    print(f"{'policy':<8} {'mean':>8} {'median':>8} {'p5':>8} {'p95':>8} {'sskp':>6}")
    for name, s in results.items():
        st = s.stats
        print(f"{name:<8} {st.mean:8.3f} {st.median:8.3f} {st.p5:8.3f} {st.p95:8.3f} {s.sskp:6.3f}")
    return EXIT_OK


# -- oracle ------------------------------------------------------------------

def cmd_oracle(args) -> int:
    H = args.horizon
    if H > DEFAULT_HORIZON_CAP:
        raise ConfigError(f"horizon {H} exceeds the cap {DEFAULT_HORIZON_CAP}")
    if H < 1 or args.instances < 1:
        raise ConfigError("horizon and instance count must be at least 1")
    lines = [f"# tool=evasim", f"# version={__version__}", f"# seed={args.seed}",
             f"# horizon={H}", f"# grid_points={args.grid_points}",
             "instance,bang_bang_best,grid_best,margin,tse_agrees,status"]
    violations = 0
    for idx in range(args.instances):
        rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(idx,)))
        prob = random_problem(rng, H)
        bb = enumerate_bang_bang(prob, H)
        gb = grid_search(prob, H, args.grid_points)
        margin = bb.cost - gb
        ok = margin >= -1e-9 * max(1.0, abs(gb))
        agrees = ""
        if H == 1:
            builder = TerminalSetBuilder(prob.model, prob.modes, prob.pf, prob.Q, prob.C, prob.fim)
            u = select(builder.build(prob.est, prob.belief, prob.n), prob.u_max)
            agrees = str((u,) in bb.ties).lower()
            ok = ok and (u,) in bb.ties
        violations += not ok
        lines.append(f"{idx},{_fmt(bb.cost)},{_fmt(gb)},{_fmt(margin)},{agrees},{'ok' if ok else 'VIOLATION'}")
    lines.append(f"# violations={violations}/{args.instances}")
    _write(args.out, "\n".join(lines) + "\n")
    return EXIT_VIOLATION if violations else EXIT_OK


# -- run -----------------------------------------------------------------------

def cmd_run(args) -> int:
    scenario = load_config(args.config)
    policy = args.policy or scenario.policy
    if policy not in POLICY_NAMES:
        raise ConfigError(f"unknown policy {policy!r}; choose from {', '.join(POLICY_NAMES)}")
    seed = scenario.mc.seed if args.seed is None else args.seed
    res = run_trial(scenario.trial, seed, policy, trace=True)
    tr = res.trace
    lines = _header(scenario, seed=seed, policy=policy, f=res.f, miss=_fmt(res.miss))
    lines.append(",".join(TRACE_COLUMNS))
    for r in range(tr["k"].size):
        vals = [str(int(tr["k"][r]))] + [_fmt(tr[c][r]) for c in TRACE_COLUMNS[1:]]
        lines.append(",".join(vals))
    _write(args.out, "\n".join(lines) + "\n")
    print(f"policy={policy} seed={seed} f={res.f} miss={res.miss:.6f} m", file=sys.stderr)
    return EXIT_OK


# -- entry point -----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="evasim", description="Stochastic pursuit-evasion endgame simulator.")
    p.add_argument("--version", action="version", version=f"evasim {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sweep", help="single-step expected cost over the command interval")
    s.add_argument("--config", help="scenario YAML (default: shipped scenario)")
    s.add_argument("--out", help="CSV output path (default: stdout)")
    s.add_argument("--seed", type=int)
    s.add_argument("--grid-points", type=int)
    s.set_defaults(func=cmd_sweep)

    m = sub.add_parser("mc", help="paired Monte Carlo study")
    m.add_argument("--config")
    m.add_argument("--trials", type=int)
    m.add_argument("--seed", type=int)
    m.add_argument("--policies", help="comma-separated subset of " + ",".join(POLICY_NAMES))
    m.add_argument("--out", default="mc_out", help="output directory")
    m.add_argument("--workers", type=int, help="worker processes (default: all cores)")
    m.set_defaults(func=cmd_mc)

    o = sub.add_parser("oracle", help="bang-bang enumeration versus grid search")
    o.add_argument("--horizon", type=int, default=4)
    o.add_argument("--grid-points", type=int, default=7)
    o.add_argument("--instances", type=int, default=50)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--out", help="report path (default: stdout)")
    o.set_defaults(func=cmd_oracle)

    r = sub.add_parser("run", help="per-step trace of one trial")
    r.add_argument("--config")
    r.add_argument("--seed", type=int)
    r.add_argument("--policy")
    r.add_argument("--out", help="trace CSV path (default: stdout)")
    r.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"evasim: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"evasim: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
