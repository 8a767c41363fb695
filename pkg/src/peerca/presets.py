"""Canned experiments and reproducible CSV emission.

Every CSV starts with ``#`` comment lines recording the tool version, the
resolved simulation config, and the master seed; re-running with those
values reproduces the file byte for byte.  Execution knobs (thread count,
output directory) deliberately stay out of the header since they do not
affect the data.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .agents import (
    AgentPolicy,
    CollusionPolicy,
    ConsistentPolicy,
    EpsilonGreedyPolicy,
    RewardBasedPolicy,
    UpdateFunctionSpec,
    adversarial_necessity_run,
    capped_softmax,
    fpl,
    ftl,
    hedge1,
    hedge2,
    replicator,
)
from .analysis import (
    ConsistentStrategy,
    ConvergenceReport,
    best_response_grid,
    bne_expected_payoff,
    converge_proportion,
    regret_series,
)
from .engine import SimulationConfig, TraceSet, run_replications
from .signals import DEFAULT_DISTRIBUTION, SignalDistribution

ALGORITHM_KEYS = ("hedge1", "hedge2", "fpl", "ftl", "replicator", "eps_greedy", "collude")

FIG2_ROSTER: dict[str, Callable[[], AgentPolicy]] = {
    "ftl": lambda: RewardBasedPolicy(ftl()),
    "fpl1": lambda: RewardBasedPolicy(fpl(1.0)),
    "fpl4": lambda: RewardBasedPolicy(fpl(4.0)),
    "fpl8": lambda: RewardBasedPolicy(fpl(8.0)),
    "hedge1": lambda: RewardBasedPolicy(hedge1()),
    "hedge2": lambda: RewardBasedPolicy(hedge2(1.0)),
    "eps_greedy": lambda: EpsilonGreedyPolicy(),
}

ERRORBAR_BATCHES = 10


def make_policy(
    algorithm: str, beta: float = 1.0, noise_max: float = 1.0, ratio: float = 3.0
) -> AgentPolicy:
    """Policy from its config key and parameters."""
    if algorithm == "hedge1":
        return RewardBasedPolicy(hedge1())
    if algorithm == "hedge2":
        return RewardBasedPolicy(hedge2(beta))
    if algorithm == "fpl":
        return RewardBasedPolicy(fpl(noise_max))
    if algorithm == "ftl":
        return RewardBasedPolicy(ftl())
    if algorithm == "replicator":
        return RewardBasedPolicy(replicator(ratio))
    if algorithm == "eps_greedy":
        return EpsilonGreedyPolicy()
    if algorithm == "collude":
        return CollusionPolicy()
    raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {ALGORITHM_KEYS}")


def policy_label(policy: AgentPolicy) -> str:
    if isinstance(policy, RewardBasedPolicy):
        return policy.spec.label
    if isinstance(policy, EpsilonGreedyPolicy):
        return "eps_greedy"
    if isinstance(policy, CollusionPolicy):
        return "collude"
    if isinstance(policy, ConsistentPolicy):
        return f"consistent(p0={policy.p0:g}, p1={policy.p1:g})"
    return repr(policy)


# --- CSV helpers ---------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def _seed_text(seed) -> str:
    if isinstance(seed, tuple):
        return ":".join(str(v) for v in seed)
    return str(seed)


def config_meta(config: SimulationConfig, subject: str) -> list[str]:
    d = config.distribution
    return [
        f"peerca {__version__} {subject}",
        f"master_seed={_seed_text(config.master_seed)} rounds={config.rounds} "
        f"runs={config.replications} trace={config.trace_detail} "
        f"invariant_checks={int(config.invariant_checks)}",
        f"distribution p11={d.p11!r} p00={d.p00!r} p10={d.p10!r} p01={d.p01!r}",
        f"policy_a={policy_label(config.policy_a)} policy_b={policy_label(config.policy_b)}",
    ]


def write_csv(path: Path, meta: list[str], columns: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in meta:
            fh.write(f"# {line}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


# --- preset runners -------------------------------------------------------------


@dataclass
class Fig2Result:
    tracesets: dict[str, TraceSet]
    reports: dict[str, ConvergenceReport]
    convergence_csv: Path
    regret_csv: Path
    elapsed_seconds: float


def _symmetric_config(policy: AgentPolicy, seed, rounds, runs, invariant_checks) -> SimulationConfig:
    return SimulationConfig(
        distribution=DEFAULT_DISTRIBUTION,
        policy_a=policy,
        policy_b=policy,
        rounds=rounds,
        replications=runs,
        master_seed=seed,
        invariant_checks=invariant_checks,
    )


def run_fig2(
    out_dir: Path,
    seed: int = 0,
    rounds: int = 800,
    runs: int = 400,
    threads: int = 1,
    invariant_checks: bool = True,
) -> Fig2Result:
    """The main convergence experiment: the full roster, symmetric agents.

    All algorithms share the master seed, so run i sees the same signal
    stream under every algorithm.
    """
    out_dir = Path(out_dir)
    tracesets: dict[str, TraceSet] = {}
    reports: dict[str, ConvergenceReport] = {}
    started = time.perf_counter()
    for label, factory in FIG2_ROSTER.items():
        config = _symmetric_config(factory(), seed, rounds, runs, invariant_checks)
        tracesets[label] = run_replications(config, threads=threads)
        reports[label] = converge_proportion(tracesets[label])
    elapsed = time.perf_counter() - started

    meta = [
        f"peerca {__version__} convergence summary",
        "preset=fig2",
        f"master_seed={_seed_text(seed)} rounds={rounds} runs={runs} "
        f"invariant_checks={int(invariant_checks)}",
        f"distribution p11={DEFAULT_DISTRIBUTION.p11!r} p00={DEFAULT_DISTRIBUTION.p00!r} "
        f"p10={DEFAULT_DISTRIBUTION.p10!r} p01={DEFAULT_DISTRIBUTION.p01!r}",
        f"algorithms={','.join(FIG2_ROSTER)}",
    ]
    conv_rows = (
        (label, int(t), float(p))
        for label, report in reports.items()
        for t, p in zip(report.rounds, report.proportion)
    )
    convergence_csv = write_csv(
        out_dir / "fig2_convergence.csv", meta, ["algorithm", "t", "converge_proportion"], conv_rows
    )

    regret_meta = meta.copy()
    regret_meta[0] = f"peerca {__version__} final regret"
    regret_rows = (
        (label, trace.run_index, rounds, regret_series(trace, "a")[-1], regret_series(trace, "b")[-1])
        for label, ts in tracesets.items()
        for trace in ts.traces
    )
    regret_csv = write_csv(
        out_dir / "fig2_regret.csv",
        regret_meta,
        ["algorithm", "run", "T", "regret_a", "regret_b"],
        regret_rows,
    )
    return Fig2Result(
        tracesets=tracesets,
        reports=reports,
        convergence_csv=convergence_csv,
        regret_csv=regret_csv,
        elapsed_seconds=elapsed,
    )


def run_errorbars(
    out_dir: Path,
    seed: int = 0,
    rounds: int = 800,
    runs: int = 400,
    batches: int = ERRORBAR_BATCHES,
    threads: int = 1,
    invariant_checks: bool = True,
) -> Path:
    """The fig2 experiment repeated in ``batches`` batches with distinct seeds."""
    out_dir = Path(out_dir)
    rows = []
    for batch in range(batches):
        batch_seed = (seed, batch)
        for label, factory in FIG2_ROSTER.items():
            config = _symmetric_config(factory(), batch_seed, rounds, runs, invariant_checks)
            report = converge_proportion(run_replications(config, threads=threads))
            rows.extend(
                (label, batch, int(t), float(p))
                for t, p in zip(report.rounds, report.proportion)
            )
    meta = [
        f"peerca {__version__} batched convergence summary",
        "preset=errorbars",
        f"master_seed={_seed_text(seed)} rounds={rounds} runs={runs} batches={batches} "
        f"invariant_checks={int(invariant_checks)}",
        f"distribution p11={DEFAULT_DISTRIBUTION.p11!r} p00={DEFAULT_DISTRIBUTION.p00!r} "
        f"p10={DEFAULT_DISTRIBUTION.p10!r} p01={DEFAULT_DISTRIBUTION.p01!r}",
        f"algorithms={','.join(FIG2_ROSTER)}",
    ]
    return write_csv(
        out_dir / "errorbars_convergence.csv",
        meta,
        ["algorithm", "batch", "t", "converge_proportion"],
        rows,
    )


@dataclass
class CollusionResult:
    traceset: TraceSet
    convergence_csv: Path
    regret_csv: Path
    proportion_max: float
    mean_regret: dict[int, float]  # horizon -> mean of both agents' Reg

    @property
    def sqrt_constant(self) -> float:
        horizon = max(self.mean_regret)
        return self.mean_regret[horizon] / np.sqrt(horizon)


def run_collusion_demo(
    out_dir: Path,
    seed: int = 0,
    rounds: int = 800,
    runs: int = 400,
    threads: int = 1,
) -> CollusionResult:
    """Colluding agents: no truthful convergence, yet sublinear regret."""
    out_dir = Path(out_dir)
    config = SimulationConfig(
        policy_a=CollusionPolicy(),
        policy_b=CollusionPolicy(),
        rounds=rounds,
        replications=runs,
        master_seed=seed,
    )
    traceset = run_replications(config, threads=threads)
    report = converge_proportion(traceset)
    meta = config_meta(config, "convergence summary") + ["preset=collusion_demo"]
    convergence_csv = write_csv(
        out_dir / "collusion_convergence.csv",
        meta,
        ["algorithm", "t", "converge_proportion"],
        (("collude", int(t), float(p)) for t, p in zip(report.rounds, report.proportion)),
    )
    horizons = sorted({rounds // 2, rounds})
    rows = []
    totals = {h: [] for h in horizons}
    for trace in traceset.traces:
        reg_a = regret_series(trace, "a")
        reg_b = regret_series(trace, "b")
        for h in horizons:
            rows.append(("collude", trace.run_index, h, int(reg_a[h - 1]), int(reg_b[h - 1])))
            totals[h].extend((int(reg_a[h - 1]), int(reg_b[h - 1])))
    regret_meta = config_meta(config, "regret at two horizons") + ["preset=collusion_demo"]
    regret_csv = write_csv(
        out_dir / "collusion_regret.csv",
        regret_meta,
        ["algorithm", "run", "T", "regret_a", "regret_b"],
        rows,
    )
    return CollusionResult(
        traceset=traceset,
        convergence_csv=convergence_csv,
        regret_csv=regret_csv,
        proportion_max=float(report.proportion.max()),
        mean_regret={h: float(np.mean(totals[h])) for h in horizons},
    )


NECESSITY_SPECS: dict[str, Callable[[], UpdateFunctionSpec]] = {
    "hedge2": lambda: hedge2(1.0),
    "ftl": ftl,
    "capped_softmax": lambda: capped_softmax(1.0, 0.9),
}


def run_necessity_demo(
    out_dir: Path,
    seed: int = 0,
    rounds: int = 10_000,
    runs: int = 100,
) -> tuple[Path, dict[str, dict[int, float]]]:
    """Mean regret on the fixed-reward environment at doubling horizons.

    Shows the split inside the family: full exploiters keep Reg(T)/T
    shrinking while the capped counterexample pays a constant per-round
    price.
    """
    out_dir = Path(out_dir)
    checkpoints = [rounds // 10, rounds // 4, rounds // 2, rounds]
    summary: dict[str, dict[int, float]] = {}
    rows = []
    for lane, (name, make_spec) in enumerate(NECESSITY_SPECS.items()):
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(seed, spawn_key=(lane,)))
        )
        series = adversarial_necessity_run(make_spec(), rounds, runs=runs, rng=rng)
        summary[name] = {}
        for t in checkpoints:
            mean_reg = float(series[:, t - 1].mean())
            summary[name][t] = mean_reg
            rows.append((name, t, mean_reg, mean_reg / t))
    meta = [
        f"peerca {__version__} fixed-environment regret",
        "preset=necessity_demo",
        f"master_seed={seed} rounds={rounds} runs={runs}",
        f"update_functions={','.join(NECESSITY_SPECS)}",
    ]
    path = write_csv(
        out_dir / "necessity_regret.csv",
        meta,
        ["update_function", "T", "mean_regret", "mean_regret_per_round"],
        rows,
    )
    return path, summary


BNE_PROFILES: dict[str, ConsistentStrategy] = {
    "truthful": ConsistentStrategy.truthful(),
    "flipping": ConsistentStrategy.flipping(),
    "uninformative": ConsistentStrategy.uninformative(1.0),
}


def run_bne_report(
    out_dir: Path,
    dist: SignalDistribution = DEFAULT_DISTRIBUTION,
    resolution: float = 0.05,
) -> tuple[Path, Path]:
    """Closed-form payoffs at the canonical profiles plus best-response grids."""
    out_dir = Path(out_dir)
    meta = [
        f"peerca {__version__} consistent-strategy equilibrium report",
        "preset=bne_report",
        f"distribution p11={dist.p11!r} p00={dist.p00!r} p10={dist.p10!r} p01={dist.p01!r}",
        f"resolution={resolution!r}",
    ]
    payoff_rows = []
    for name, profile in BNE_PROFILES.items():
        value, _ = bne_expected_payoff(dist, profile)
        payoff_rows.append(
            (name, profile.p0, profile.p1, profile.q0, profile.q1, value)
        )
    payoffs_csv = write_csv(
        out_dir / "bne_payoffs.csv",
        meta,
        ["profile", "p0", "p1", "q0", "q1", "expected_payoff"],
        payoff_rows,
    )
    br_rows = []
    for name, profile in BNE_PROFILES.items():
        grid = best_response_grid(dist, profile, resolution=resolution)
        points = ";".join(f"({p0:g},{p1:g})" for p0, p1 in grid.maximizers[:25])
        if len(grid.maximizers) > 25:
            points += ";..."
        br_rows.append((name, len(grid.maximizers), grid.best_payoff, points))
    br_csv = write_csv(
        out_dir / "bne_best_response.csv",
        meta,
        ["opponent", "n_maximizers", "best_payoff", "maximizers"],
        br_rows,
    )
    return payoffs_csv, br_csv
