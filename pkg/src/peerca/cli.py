"""Command-line front end: simulate, analyze, check, preset.

Exit codes: 0 success, 2 configuration error, 3 ledger invariant violation.
Configuration files are flat ``key = value`` text; probabilities are read
as decimal text so the simplex-sum check cannot be disturbed by binary
rounding.
"""

from __future__ import annotations

import argparse
import sys
from decimal import Decimal, InvalidOperation
from pathlib import Path

import numpy as np

from . import __version__
from .agents import adversarial_necessity_run, capped_softmax, certify
from .analysis import (
    converge_proportion,
    event_timeline,
    ledger_paths,
    regret_series,
    reports_from_trace,
)
from .engine import RunTrace, SimulationConfig, TraceSet, run_replications
from .ledger import InvariantViolation
from .presets import (
    ALGORITHM_KEYS,
    config_meta,
    make_policy,
    policy_label,
    run_bne_report,
    run_collusion_demo,
    run_errorbars,
    run_fig2,
    run_necessity_demo,
    write_csv,
)
from .signals import DEFAULT_DISTRIBUTION, DistributionError, validate_distribution

PRESETS = ("fig2", "errorbars", "collusion_demo", "necessity_demo", "bne_report")


class ConfigError(ValueError):
    pass


# --- config files ---------------------------------------------------------------

_DIST_KEYS = ("p11", "p00", "p10", "p01")
_INT_KEYS = {"rounds": "rounds", "runs": "replications", "master_seed": "master_seed"}
_AGENT_KEYS = ("algorithm", "beta", "noise_max", "ratio")
_BOOL_VALUES = {"1": True, "true": True, "yes": True, "0": False, "false": False, "no": False}


def _parse_flat_file(path: Path) -> dict[str, str]:
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith(";"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if key in entries:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        entries[key] = value.strip()
    return entries


def _agent_value(entries: dict[str, str], key: str, side: str) -> str | None:
    return entries.get(f"{key}_{side}", entries.get(key))


def _build_distribution(entries: dict[str, str], allow_unnormalized: bool):
    given = [k for k in _DIST_KEYS if k in entries]
    if not given:
        return DEFAULT_DISTRIBUTION
    if len(given) != 4:
        missing = [k for k in _DIST_KEYS if k not in entries]
        raise ConfigError(f"distribution needs all of p11,p00,p10,p01; missing {missing}")
    try:
        decimals = {k: Decimal(entries[k]) for k in _DIST_KEYS}
    except InvalidOperation as exc:
        raise ConfigError(f"distribution keys must be decimal text: {exc}") from exc
    total = sum(decimals.values())
    if not allow_unnormalized and abs(total - 1) > Decimal("1e-12"):
        raise ConfigError(
            f"keys p11,p00,p10,p01 sum to {total} (SumNotOne); "
            "pass --allow-unnormalized to renormalize"
        )
    return validate_distribution(
        *(float(decimals[k]) for k in _DIST_KEYS), allow_unnormalized=allow_unnormalized
    )


def load_config(path: Path, allow_unnormalized: bool = False) -> SimulationConfig:
    """Parse a flat key=value config file, applying documented defaults."""
    entries = _parse_flat_file(path)
    known = set(_DIST_KEYS) | set(_INT_KEYS) | {"trace", "invariant_checks"}
    for key in _AGENT_KEYS:
        known |= {key, f"{key}_a", f"{key}_b"}
    for key in entries:
        if key not in known:
            raise ConfigError(f"unknown key {key!r}")

    distribution = _build_distribution(entries, allow_unnormalized)

    kwargs = {}
    for key, attr in _INT_KEYS.items():
        if key in entries:
            try:
                kwargs[attr] = int(entries[key])
            except ValueError as exc:
                raise ConfigError(f"key {key!r} must be an integer: {entries[key]!r}") from exc
    if "trace" in entries:
        if entries["trace"] not in ("summary", "full"):
            raise ConfigError(f"key 'trace' must be summary or full, got {entries['trace']!r}")
        kwargs["trace_detail"] = entries["trace"]
    if "invariant_checks" in entries:
        flag = _BOOL_VALUES.get(entries["invariant_checks"].lower())
        if flag is None:
            raise ConfigError(f"key 'invariant_checks' must be boolean, got {entries['invariant_checks']!r}")
        kwargs["invariant_checks"] = flag

    policies = {}
    for side in ("a", "b"):
        algorithm = _agent_value(entries, "algorithm", side) or "hedge2"
        if algorithm not in ALGORITHM_KEYS:
            raise ConfigError(f"key 'algorithm_{side}' unknown value {algorithm!r}")
        params = {}
        for key in ("beta", "noise_max", "ratio"):
            value = _agent_value(entries, key, side)
            if value is not None:
                try:
                    params[key] = float(value)
                except ValueError as exc:
                    raise ConfigError(f"key {key!r} must be a number: {value!r}") from exc
        try:
            policies[side] = make_policy(algorithm, **params)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    try:
        return SimulationConfig(
            distribution=distribution, policy_a=policies["a"], policy_b=policies["b"], **kwargs
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# --- trace CSV round trip ---------------------------------------------------------

TRACE_COLUMNS = [
    "run", "t", "x", "y", "strat_a", "strat_b", "xhat", "yhat", "r", "s",
    "R1", "R2", "R3", "R4", "S1", "S2", "S3", "S4",
]


def write_trace_csv(path: Path, traceset: TraceSet) -> Path:
    meta = config_meta(traceset.config, "full trace") + [f"columns={','.join(TRACE_COLUMNS)}"]

    def rows():
        for trace in traceset.traces:
            xhat, yhat = reports_from_trace(trace)
            path_a, path_b = ledger_paths(trace)
            for t in range(trace.rounds):
                yield (
                    trace.run_index, t + 1,
                    trace.x[t], trace.y[t], trace.strat_a[t], trace.strat_b[t],
                    xhat[t], yhat[t], trace.r[t], trace.s[t],
                    *path_a[t], *path_b[t],
                )

    return write_csv(path, meta, TRACE_COLUMNS, rows())


def write_summary_csvs(out_dir: Path, traceset: TraceSet) -> tuple[Path, Path]:
    meta = config_meta(traceset.config, "per-round strategy pairs")
    strategies = write_csv(
        Path(out_dir) / "strategies.csv",
        meta,
        ["run", "t", "strat_a", "strat_b"],
        (
            (trace.run_index, t + 1, trace.strat_a[t], trace.strat_b[t])
            for trace in traceset.traces
            for t in range(trace.rounds)
        ),
    )
    meta2 = config_meta(traceset.config, "final ledgers")
    ledgers = write_csv(
        Path(out_dir) / "final_ledgers.csv",
        meta2,
        ["run", "R1", "R2", "R3", "R4", "S1", "S2", "S3", "S4"],
        (
            (trace.run_index, *trace.final_ledger_a, *trace.final_ledger_b)
            for trace in traceset.traces
        ),
    )
    return strategies, ledgers


def read_trace_csv(path: Path) -> tuple[TraceSet, list[str]]:
    """Rebuild traces from a full trace CSV (meta lines returned verbatim)."""
    meta = []
    header = None
    data = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if line.startswith("#"):
                meta.append(line[1:].strip())
                continue
            if header is None:
                header = line.split(",")
                continue
            data.append(line)
    if header is None or not data:
        raise ConfigError(f"{path}: no data rows")
    missing = [c for c in TRACE_COLUMNS[:10] if c not in header]
    if missing:
        raise ConfigError(f"{path}: missing columns {missing}")
    idx = {c: header.index(c) for c in header}
    table = np.array([row.split(",") for row in data], dtype=np.int64)
    runs = np.unique(table[:, idx["run"]])
    traces = []
    for run in runs:
        rows = table[table[:, idx["run"]] == run]
        rows = rows[np.argsort(rows[:, idx["t"]])]
        trace = RunTrace(
            run_index=int(run),
            x=rows[:, idx["x"]].astype(np.int8),
            y=rows[:, idx["y"]].astype(np.int8),
            strat_a=rows[:, idx["strat_a"]].astype(np.int8),
            strat_b=rows[:, idx["strat_b"]].astype(np.int8),
            r=rows[:, idx["r"]].astype(np.int8),
            s=rows[:, idx["s"]].astype(np.int8),
            final_ledger_a=tuple(int(v) for v in ledger_paths_final(rows, idx, "R")),
            final_ledger_b=tuple(int(v) for v in ledger_paths_final(rows, idx, "S")),
        )
        traces.append(trace)
    return TraceSet(config=SimulationConfig(), traces=traces), meta


def ledger_paths_final(rows: np.ndarray, idx: dict[str, int], prefix: str) -> list[int]:
    cols = [f"{prefix}{i}" for i in range(1, 5)]
    if all(c in idx for c in cols):
        return [int(rows[-1, idx[c]]) for c in cols]
    return [0, 0, 0, 0]


# --- subcommands --------------------------------------------------------------------


def _cmd_simulate(args) -> int:
    config = load_config(Path(args.config), allow_unnormalized=args.allow_unnormalized)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.rounds is not None:
        overrides["rounds"] = args.rounds
    if args.runs is not None:
        overrides["replications"] = args.runs
    if args.trace is not None:
        overrides["trace_detail"] = args.trace
    if args.no_invariant_checks:
        overrides["invariant_checks"] = False
    if overrides:
        config = SimulationConfig(
            **{
                **{f.name: getattr(config, f.name) for f in config.__dataclass_fields__.values()},
                **overrides,
            }
        )
    traceset = run_replications(config, threads=args.threads)
    out = Path(args.out)
    if config.trace_detail == "full":
        path = write_trace_csv(out / "trace.csv", traceset)
        print(path)
    else:
        for path in write_summary_csvs(out, traceset):
            print(path)
    return 0


def _cmd_analyze(args) -> int:
    traceset, meta = read_trace_csv(Path(args.trace_csv))
    label = "trace"
    for line in meta:
        if "policy_a=" in line:
            label = line.split("policy_a=", 1)[1].split(" ")[0]
    out = Path(args.out)
    src = [f"peerca {__version__} analysis of {Path(args.trace_csv).name}"] + meta
    report = converge_proportion(traceset)
    print(write_csv(
        out / "convergence.csv",
        src,
        ["algorithm", "t", "converge_proportion"],
        ((label, int(t), float(p)) for t, p in zip(report.rounds, report.proportion)),
    ))
    rounds = traceset.traces[0].rounds
    print(write_csv(
        out / "regret.csv",
        src,
        ["algorithm", "run", "T", "regret_a", "regret_b"],
        (
            (label, tr.run_index, rounds, regret_series(tr, "a")[-1], regret_series(tr, "b")[-1])
            for tr in traceset.traces
        ),
    ))
    print(write_csv(
        out / "events.csv",
        src + [f"c0={args.c0} u={args.u}"],
        ["run", "t", "state"],
        (
            (tr.run_index, t + 1, state)
            for tr in traceset.traces
            for t, state in enumerate(
                np.array(["mid", "bad12", "bad21", "good11", "good22"])[
                    event_timeline(tr, c0=args.c0, u=args.u).codes
                ]
            )
        ),
    ))
    return 0


_CHECKABLE = ("hedge1", "hedge2", "fpl", "ftl", "replicator", "capped_softmax")


def _cmd_check(args) -> int:
    if args.update_function not in _CHECKABLE:
        raise ConfigError(
            f"{args.update_function!r} is not a reward-based update function; "
            f"choose from {_CHECKABLE}"
        )
    if args.update_function == "capped_softmax":
        spec = capped_softmax(beta=args.beta, cap=0.9)
    else:
        policy = make_policy(
            args.update_function, beta=args.beta, noise_max=args.noise_max, ratio=args.ratio
        )
        spec = policy.spec
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(args.seed)))
    report = certify(spec, trials=args.trials, rng=rng)
    print(f"update_function: {spec.label}")
    for check in (report.exchangeability, report.order_preservation):
        status = "PASS" if check.passed else "FAIL"
        print(f"{check.name}: {status} (violations={check.violations}/{check.trials})")
    curve = report.full_exploitation
    status = "PASS" if curve.passed else "FAIL"
    print(f"full_exploitation: {status} (plateau={curve.plateau:.6f})")
    print("exploitation_curve: " + " ".join(f"{p.gap}:{p.prob:.6f}" for p in curve.points))
    reg = adversarial_necessity_run(
        spec, args.necessity_rounds, runs=args.necessity_runs, rng=rng
    )
    ratio = float(reg[:, -1].mean()) / args.necessity_rounds
    print(
        f"necessity_regret: T={args.necessity_rounds} mean Reg(T)/T={ratio:.6f} "
        f"({args.necessity_runs} runs)"
    )
    print(f"verdict: {'PASS' if report.passed else 'FAIL'}")
    return 0


def _cmd_preset(args) -> int:
    out = Path(args.out)
    kwargs = dict(seed=args.seed, threads=args.threads)
    if args.name == "fig2":
        result = run_fig2(
            out,
            rounds=args.rounds or 800,
            runs=args.runs or 400,
            invariant_checks=not args.no_invariant_checks,
            **kwargs,
        )
        print(result.convergence_csv)
        print(result.regret_csv)
        print(f"elapsed_seconds={result.elapsed_seconds:.1f}")
    elif args.name == "errorbars":
        path = run_errorbars(
            out,
            rounds=args.rounds or 800,
            runs=args.runs or 400,
            invariant_checks=not args.no_invariant_checks,
            **kwargs,
        )
        print(path)
    elif args.name == "collusion_demo":
        result = run_collusion_demo(
            out, rounds=args.rounds or 800, runs=args.runs or 400, **kwargs
        )
        print(result.convergence_csv)
        print(result.regret_csv)
        horizon = max(result.mean_regret)
        print(f"max_converge_proportion={result.proportion_max}")
        print(f"mean_regret_over_sqrt_T={result.sqrt_constant:.4f} (T={horizon})")
    elif args.name == "necessity_demo":
        path, summary = run_necessity_demo(
            out, seed=args.seed, rounds=args.rounds or 10_000, runs=args.runs or 100
        )
        print(path)
        for name, by_t in summary.items():
            horizon = max(by_t)
            print(f"{name}: mean Reg({horizon})/{horizon}={by_t[horizon] / horizon:.4f}")
    elif args.name == "bne_report":
        for path in run_bne_report(out):
            print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="peerca", description=__doc__)
    parser.add_argument("--version", action="version", version=f"peerca {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a config-driven experiment")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", default="out")
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--rounds", type=int, default=None)
    sim.add_argument("--runs", type=int, default=None)
    sim.add_argument("--trace", choices=("summary", "full"), default=None)
    sim.add_argument("--threads", type=int, default=1)
    sim.add_argument("--no-invariant-checks", action="store_true")
    sim.add_argument("--allow-unnormalized", action="store_true")
    sim.set_defaults(func=_cmd_simulate)

    ana = sub.add_parser("analyze", help="derive convergence/regret/event CSVs from a trace")
    ana.add_argument("trace_csv")
    ana.add_argument("--out", default="out")
    ana.add_argument("--c0", type=int, default=20)
    ana.add_argument("--u", type=int, default=10)
    ana.set_defaults(func=_cmd_analyze)

    chk = sub.add_parser("check", help="certify an update function against the family assumptions")
    chk.add_argument("update_function")
    chk.add_argument("--beta", type=float, default=1.0)
    chk.add_argument("--noise-max", dest="noise_max", type=float, default=1.0)
    chk.add_argument("--ratio", type=float, default=3.0)
    chk.add_argument("--trials", type=int, default=1000)
    chk.add_argument("--seed", type=int, default=0)
    chk.add_argument("--necessity-rounds", dest="necessity_rounds", type=int, default=2000)
    chk.add_argument("--necessity-runs", dest="necessity_runs", type=int, default=20)
    chk.set_defaults(func=_cmd_check)

    pre = sub.add_parser("preset", help="run a canned experiment end to end")
    pre.add_argument("name", choices=PRESETS)
    pre.add_argument("--out", default="out")
    pre.add_argument("--seed", type=int, default=0)
    pre.add_argument("--rounds", type=int, default=None)
    pre.add_argument("--runs", type=int, default=None)
    pre.add_argument("--threads", type=int, default=1)
    pre.add_argument("--no-invariant-checks", action="store_true")
    pre.set_defaults(func=_cmd_preset)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DistributionError, FileNotFoundError) as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except InvariantViolation as exc:
        print(f"error: invariant: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
