"""Experiment orchestration: full games of N players against one environment.

A run wires one CollisionEnv to N agents in lockstep turns, accumulates the
max-min regret trace analytically (true means on the realized profile, noise
averaged out), and records per-epoch diagnostics. Batches aggregate many
seeded runs into mean/std regret curves plus convergence statistics.

Two drivers produce bit-identical traces: a naive per-turn loop, and a fast
driver that vectorizes exploration and skips outcome-independent stretches
(exploitation, and matching after the joint profile absorbs). Cumulative
regret is always accumulated by sequential float64 addition in turn order,
so the two drivers agree to the last bit.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .agent import Agent, AgentConfig, Phase
from .env import CollisionEnv, NoiseModel, expected_min_utility, load_matrix
from .oracle import gamma_star, is_gamma_matching

__all__ = [
    "ExperimentConfig",
    "Checkpoint",
    "EpochDiagnostic",
    "RunTrace",
    "BatchSummary",
    "run_single",
    "run_batch",
    "write_trace_csv",
    "write_summary_csv",
    "write_manifest",
    "epoch_count_bound",
]

# Environment stream tag; player n uses stream n + 1.
_ENV_STREAM = 0

_CHUNK = 1 << 22  # cap on the per-segment cumsum buffer


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved inputs of one experiment (single run or batch)."""

    matrix: str = "u1"
    noise: float = 0.05
    c1: float = 1000.0
    c2: float = 2000.0
    c3: float = 4000.0
    ci_scale: float = 0.01
    epsilon_scale: float = 0.2
    warm_start: bool = True
    use_collision_bit: bool = True
    horizon: int = 500_000
    runs: int = 100
    seed: int = 0
    stride: int = 1000

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")
        if self.runs < 1:
            raise ValueError(f"runs must be >= 1, got {self.runs}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")
        if self.noise < 0:
            raise ValueError(f"noise must be >= 0, got {self.noise}")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, object]) -> "ExperimentConfig":
        """Build from flat key-value pairs, rejecting unknown keys."""
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(mapping) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**dict(mapping))

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        """Load a flat JSON object of config keys."""
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError(f"config file {path} must hold a JSON object")
        return cls.from_mapping(data)

    def agent_config(self, n_arms: int) -> AgentConfig:
        return AgentConfig(
            n_arms=n_arms,
            c1=self.c1,
            c2=self.c2,
            c3=self.c3,
            ci_scale=self.ci_scale,
            epsilon_scale=self.epsilon_scale,
            warm_start=self.warm_start,
            use_collision_bit=self.use_collision_bit,
        )


@dataclass(frozen=True)
class Checkpoint:
    turn: int
    cumulative_regret: float
    epoch: int
    phase: str


@dataclass(frozen=True)
class EpochDiagnostic:
    """Outcome of one completed epoch, as seen by the harness."""

    epoch: int
    gamma: float
    succeeded: bool
    exploit_epoch: int
    exploit_optimal: bool


@dataclass(frozen=True)
class RunTrace:
    checkpoints: list[Checkpoint]
    epochs: list[EpochDiagnostic]
    final_regret: float
    n_turns: int


@dataclass(frozen=True)
class BatchSummary:
    """Per-checkpoint aggregate over a batch of runs."""

    turns: list[int]
    mean_regret: list[float]
    std_regret: list[float]
    convergence_epochs: list[int | None]
    n_runs: int

    @property
    def final_mean_regret(self) -> float:
        return self.mean_regret[-1]


def epoch_count_bound(horizon: int, c3: float) -> float:
    """Upper bound on the number of completed epochs within the horizon."""
    return math.log(horizon / (3.0 * c3) + 4.0 / 3.0, 4.0 / 3.0)


def derive_rng(master_seed: int, run_index: int, stream: int) -> np.random.Generator:
    """Documented seed scheme: stream 0 is the environment, n+1 is player n."""
    ss = np.random.SeedSequence(entropy=(master_seed, run_index, stream))
    return np.random.Generator(np.random.PCG64(ss))


class _RegretLedger:
    """Sequential-order cumulative regret with checkpoint capture.

    All additions happen in turn order via float64 chains, so any driver
    that feeds the same per-turn values produces identical checkpoints.
    """

    def __init__(self, stride: int) -> None:
        self.stride = stride
        self.cum = 0.0
        self.turn = 0
        self.rows: list[Checkpoint] = []

    def add(self, regrets: np.ndarray, epoch: int, phase: str) -> None:
        start = 0
        while start < len(regrets):
            chunk = regrets[start : start + _CHUNK]
            chain = np.cumsum(np.concatenate(([self.cum], chunk)))[1:]
            offsets = np.flatnonzero(
                (self.turn + 1 + np.arange(len(chunk))) % self.stride == 0
            )
            for off in offsets:
                self.rows.append(
                    Checkpoint(
                        self.turn + 1 + int(off), float(chain[off]), epoch, phase
                    )
                )
            self.cum = float(chain[-1])
            self.turn += len(chunk)
            start += len(chunk)

    def add_constant(self, regret: float, n_turns: int, epoch: int, phase: str) -> None:
        self.add(np.full(n_turns, regret), epoch, phase)

    def mark(self, epoch: int, phase: str) -> None:
        """Checkpoint the current turn (epoch boundary or horizon end)."""
        if self.rows and self.rows[-1].turn == self.turn:
            return
        self.rows.append(Checkpoint(self.turn, self.cum, epoch, phase))


def _min_utility_block(
    mu: np.ndarray, profiles: np.ndarray, collided: np.ndarray
) -> np.ndarray:
    """Per-turn min over players of true mean x no-collision indicator."""
    taken = mu[np.arange(mu.shape[0])[None, :], profiles]
    return np.where(collided, 0.0, taken).min(axis=1)


class _Game:
    """Shared state of one run: environment, agents, ledger, diagnostics."""

    def __init__(self, config: ExperimentConfig, run_index: int) -> None:
        self.config = config
        self.matrix = load_matrix(config.matrix)
        self.gamma_star = gamma_star(self.matrix).bottleneck
        n = self.matrix.n_players
        self.env = CollisionEnv(
            self.matrix,
            NoiseModel(config.noise),
            derive_rng(config.seed, run_index, _ENV_STREAM),
        )
        agent_cfg = config.agent_config(self.matrix.n_arms)
        self.agents = [
            Agent(agent_cfg, derive_rng(config.seed, run_index, 1 + i))
            for i in range(n)
        ]
        self.ledger = _RegretLedger(config.stride)
        self.epochs: list[EpochDiagnostic] = []

    def profile_regret(self, profile: Sequence[int]) -> float:
        return self.gamma_star - expected_min_utility(self.matrix, profile)

    def lead(self) -> Agent:
        return self.agents[0]

    def assert_lockstep(self) -> None:
        lead = self.lead()
        for a in self.agents[1:]:
            if a.phase is not lead.phase or a.phase_clock != lead.phase_clock:
                raise AssertionError("agents fell out of phase lockstep")

    def step_turn(self) -> tuple[list[int], bool]:
        """One full lockstep turn; returns (profile, epoch_completed)."""
        lead = self.lead()
        phase_before = lead.phase
        epoch_before = lead.epoch
        profile = [a.act() for a in self.agents]
        outcomes = self.env.step(profile)
        for agent, outcome in zip(self.agents, outcomes):
            agent.observe(outcome)
        self.ledger.add(
            np.array([self.profile_regret(profile)]),
            epoch_before,
            phase_before.value,
        )
        return profile, self._after_turn(phase_before, epoch_before)

    def _after_turn(self, phase_before: Phase, epoch_before: int) -> bool:
        """Record diagnostics on phase transitions; True at epoch end."""
        lead = self.lead()
        if phase_before is Phase.CONSENSUS and lead.phase is Phase.EXPLOIT:
            record = lead.history[-1]
            exploit_profile = [a.exploit_arm for a in self.agents]
            self.epochs.append(
                EpochDiagnostic(
                    epoch=epoch_before,
                    gamma=record.gamma,
                    succeeded=record.succeeded,
                    exploit_epoch=lead.exploit_epoch,
                    exploit_optimal=is_gamma_matching(
                        self.matrix, exploit_profile, self.gamma_star
                    ),
                )
            )
        if phase_before is Phase.EXPLOIT and lead.phase is Phase.EXPLORE:
            self.ledger.mark(epoch_before, Phase.EXPLOIT.value)
            return True
        return False

    def finish(self) -> RunTrace:
        lead = self.lead()
        self.ledger.mark(lead.epoch, lead.phase.value)
        bound = epoch_count_bound(self.config.horizon, self.config.c3)
        completed = len(self.epochs)
        assert completed <= bound + 1e-9, (
            f"{completed} completed epochs exceed the bound {bound:.3f}"
        )
        return RunTrace(
            checkpoints=self.ledger.rows,
            epochs=self.epochs,
            final_regret=self.ledger.cum,
            n_turns=self.ledger.turn,
        )


def _drive_naive(game: _Game) -> None:
    horizon = game.config.horizon
    while game.ledger.turn < horizon:
        game.step_turn()


def _drive_fast(game: _Game) -> None:
    horizon = game.config.horizon
    ledger = game.ledger
    mu = game.matrix.mu
    gs = game.gamma_star
    while ledger.turn < horizon:
        game.assert_lockstep()
        lead = game.lead()
        left = horizon - ledger.turn
        if lead.phase is Phase.EXPLORE:
            n = min(lead.phase_clock, left)
            profiles = np.stack(
                [a.act_explore_block(n) for a in game.agents], axis=1
            )
            rewards, collided = game.env.step_block(profiles)
            for i, agent in enumerate(game.agents):
                agent.observe_explore_block(rewards[:, i], collided[:, i])
            regrets = gs - _min_utility_block(mu, profiles, collided)
            ledger.add(regrets, lead.epoch, Phase.EXPLORE.value)
        elif lead.phase is Phase.MATCH:
            while lead.phase is Phase.MATCH and ledger.turn < horizon:
                profile, _ = game.step_turn()
                if lead.phase is not Phase.MATCH:
                    break
                counts = np.bincount(profile, minlength=game.matrix.n_arms)
                if counts.max() <= 1:
                    # Collision-free: every player holds from here on, so
                    # the rest of the phase is one constant, draw-free block.
                    skip = min(lead.phase_clock - 1, horizon - ledger.turn)
                    if skip > 0:
                        for agent in game.agents:
                            agent.skip(skip)
                        game.env.skip(skip)
                        ledger.add_constant(
                            game.profile_regret(profile),
                            skip,
                            lead.epoch,
                            Phase.MATCH.value,
                        )
        elif lead.phase is Phase.CONSENSUS:
            while lead.phase is Phase.CONSENSUS and ledger.turn < horizon:
                game.step_turn()
        else:
            # Exploitation ignores outcomes: skip all but the final turn,
            # which is played for real to fire the epoch transition.
            skip = min(lead.phase_clock - 1, left)
            if skip > 0:
                profile = [a.exploit_arm for a in game.agents]
                for agent in game.agents:
                    agent.skip(skip)
                game.env.skip(skip)
                ledger.add_constant(
                    game.profile_regret(profile),
                    skip,
                    lead.epoch,
                    Phase.EXPLOIT.value,
                )
            if ledger.turn < horizon:
                game.step_turn()


def run_single(
    config: ExperimentConfig, run_index: int = 0, driver: str = "fast"
) -> RunTrace:
    """Simulate one seeded run; deterministic in (config, run_index)."""
    game = _Game(config, run_index)
    if driver == "fast":
        _drive_fast(game)
    elif driver == "naive":
        _drive_naive(game)
    else:
        raise ValueError(f"unknown driver {driver!r}")
    return game.finish()


def convergence_epoch(trace: RunTrace) -> int | None:
    """First epoch from which every exploitation phase was optimal.

    None when the final completed epoch still failed to exploit a
    max-min optimal matching.
    """
    if not trace.epochs:
        return None
    last_bad = None
    for diag in trace.epochs:
        if not diag.exploit_optimal:
            last_bad = diag.epoch
    if last_bad is None:
        return trace.epochs[0].epoch
    if last_bad == trace.epochs[-1].epoch:
        return None
    return last_bad + 1


def run_batch(
    config: ExperimentConfig, driver: str = "fast"
) -> tuple[BatchSummary, list[RunTrace]]:
    """Run config.runs independent games and aggregate their traces."""
    traces = [run_single(config, r, driver) for r in range(config.runs)]
    turns = [cp.turn for cp in traces[0].checkpoints]
    for trace in traces[1:]:
        if [cp.turn for cp in trace.checkpoints] != turns:
            raise AssertionError("runs disagree on checkpoint turns")
    grid = np.array(
        [[cp.cumulative_regret for cp in t.checkpoints] for t in traces]
    )
    summary = BatchSummary(
        turns=turns,
        mean_regret=[float(v) for v in grid.mean(axis=0)],
        std_regret=[float(v) for v in grid.std(axis=0)],
        convergence_epochs=[convergence_epoch(t) for t in traces],
        n_runs=config.runs,
    )
    return summary, traces


def write_trace_csv(obj: RunTrace | BatchSummary, destination: str | Path) -> None:
    """Serialize a trace or summary as delimited text (see module docs)."""
    lines: list[str] = []
    if isinstance(obj, RunTrace):
        lines.append("turn,cumulative_regret,epoch,phase")
        for cp in obj.checkpoints:
            lines.append(
                f"{cp.turn},{cp.cumulative_regret!r},{cp.epoch},{cp.phase}"
            )
    else:
        lines.append("turn,mean_regret,std_regret")
        for turn, mean, std in zip(obj.turns, obj.mean_regret, obj.std_regret):
            lines.append(f"{turn},{mean!r},{std!r}")
    Path(destination).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_summary_csv(summary: BatchSummary, destination: str | Path) -> None:
    write_trace_csv(summary, destination)


def write_manifest(
    destination: str | Path,
    config: ExperimentConfig,
    extra: Mapping[str, object],
) -> dict:
    """Record resolved config, the seed scheme, and result headline values."""
    matrix = load_matrix(config.matrix)
    payload: dict[str, object] = {
        "version": __version__,
        "config": dataclasses.asdict(config),
        "matrix_name": matrix.name,
        "n_players": matrix.n_players,
        "n_arms": matrix.n_arms,
        "gamma_star": gamma_star(matrix).bottleneck,
        "seed_scheme": (
            "SeedSequence((seed, run_index, stream)); "
            "stream 0 drives the environment, stream n+1 drives player n"
        ),
    }
    payload.update(extra)
    with open(destination, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=False)
        fh.write("\n")
    return payload
