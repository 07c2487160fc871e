"""Decentralized player state machine for max-min fair matching.

Each player cycles through epochs of four phases: exploration (uniform
sampling to estimate its own arm means), matching (random resampling until
the joint profile is collision-free among arms believed to clear the
current search level), consensus (a collision-coded vote on whether the
matching succeeded), and exploitation (replaying the best confirmed
matching). The search level ratchets upward on every confirmed matching
and is periodically reset so that overshoots cannot wedge the system.

A player observes only its own rewards and collision indicators. It never
learns the number of players, the horizon, or anything about the other
players except through collisions.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .env import TurnOutcome

__all__ = [
    "AgentConfig",
    "Phase",
    "PhaseSchedule",
    "phase_lengths",
    "EpochRecord",
    "Agent",
]


class Phase(enum.Enum):
    """The four phases of an epoch, in order."""

    EXPLORE = "explore"
    MATCH = "match"
    CONSENSUS = "consensus"
    EXPLOIT = "exploit"


@dataclass(frozen=True)
class AgentConfig:
    """Knobs for one player.

    c1, c2, c3 scale the exploration, matching, and exploitation phase
    lengths. ci_scale multiplies the confidence radius used when deciding
    which arms clear the search level (1.0 is the conservative theoretical
    choice; far smaller values are usable in practice). epsilon_scale sets
    the numerator of the search-level step size. With warm_start a player
    opens each matching phase on its current exploitation arm instead of a
    random eligible arm. With use_collision_bit=False collisions are
    inferred from exactly-zero rewards instead of the explicit indicator.
    """

    n_arms: int
    c1: float = 1000.0
    c2: float = 2000.0
    c3: float = 4000.0
    ci_scale: float = 0.01
    epsilon_scale: float = 0.2
    warm_start: bool = True
    use_collision_bit: bool = True

    def __post_init__(self) -> None:
        if self.n_arms < 1:
            raise ValueError(f"n_arms must be >= 1, got {self.n_arms}")
        for name in ("c1", "c2", "c3"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.ci_scale <= 0:
            raise ValueError(f"ci_scale must be > 0, got {self.ci_scale}")
        if self.epsilon_scale <= 0:
            raise ValueError(
                f"epsilon_scale must be > 0, got {self.epsilon_scale}"
            )


@dataclass(frozen=True)
class PhaseSchedule:
    """Turn counts of the four phases of one epoch."""

    explore_len: int
    match_len: int
    consensus_len: int
    exploit_len: int

    @property
    def total(self) -> int:
        return (
            self.explore_len
            + self.match_len
            + self.consensus_len
            + self.exploit_len
        )


def phase_lengths(epoch: int, config: AgentConfig) -> PhaseSchedule:
    """Phase lengths for the given epoch (1-based).

    Exploration and matching grow logarithmically, consensus is exactly
    one sweep of the arms, and exploitation grows geometrically so that
    learning overhead vanishes as a fraction of total play.
    """
    if epoch < 1:
        raise ValueError(f"epoch must be >= 1, got {epoch}")
    log_term = math.log(epoch + 1)
    return PhaseSchedule(
        explore_len=math.ceil(config.c1 * log_term),
        match_len=math.ceil(config.c2 * log_term),
        consensus_len=config.n_arms,
        exploit_len=math.ceil(config.c3 * (4.0 / 3.0) ** epoch),
    )


@dataclass(frozen=True)
class EpochRecord:
    """What one epoch established: the level tried, whether the consensus
    sweep confirmed it, and the arm this player ended matching on."""

    gamma: float
    succeeded: bool
    arm: int


class Agent:
    """One player, driven by alternating act()/observe() calls.

    The caller owns the turn loop: every turn it asks each agent for an
    arm, steps the environment on the joint profile, and hands each agent
    its own outcome. Agents are mutually invisible; coordination arises
    only through the collision structure of the environment.
    """

    def __init__(self, config: AgentConfig, rng: np.random.Generator) -> None:
        self.config = config
        self.rng = rng
        m = config.n_arms

        # Exploration statistics over this player's arms.
        self.visits = np.zeros(m, dtype=np.int64)
        self.reward_sum = np.zeros(m, dtype=np.float64)
        self.estimate = np.zeros(m, dtype=np.float64)

        # Search-level state. failure_count tracks consensus failures
        # since the last reset; when it reaches reset_threshold the level
        # drops back to zero and the threshold stretches with the epoch.
        self.gamma = 0.0
        self.epsilon = config.epsilon_scale
        self.failure_count = 0
        self.reset_threshold = 1

        self.history: list[EpochRecord] = []
        self.epoch = 1
        self.schedule = phase_lengths(1, config)
        self.phase = Phase.EXPLORE
        self.phase_clock = self.schedule.explore_len

        self.matched_arm: int | None = None
        self.exploit_arm: int | None = None
        self.exploit_epoch: int | None = None
        self.collided_in_consensus = False

        self._eligible: np.ndarray = np.arange(m)
        self._match_first_turn = False
        self._match_collided = True
        self._consensus_hold = False
        self._held_arm: int | None = None
        self._pending_arm: int | None = None
        self._pending_block: np.ndarray | None = None
        self._awaiting_observe = False

    # -- per-turn protocol -------------------------------------------------

    def act(self) -> int:
        """Choose this turn's arm. Must alternate with observe()."""
        if self._awaiting_observe:
            raise RuntimeError("act() called twice without observe()")
        phase = self.phase
        if phase is Phase.EXPLORE:
            arm = int(self.rng.integers(0, self.config.n_arms))
        elif phase is Phase.MATCH:
            arm = self._act_match()
        elif phase is Phase.CONSENSUS:
            if self._consensus_hold:
                arm = self.matched_arm
            else:
                arm = self.schedule.consensus_len - self.phase_clock
        else:
            arm = self.exploit_arm
        self._pending_arm = arm
        self._awaiting_observe = True
        return arm

    def observe(self, outcome: TurnOutcome) -> None:
        """Digest the outcome of the arm returned by the last act()."""
        if not self._awaiting_observe:
            raise RuntimeError("observe() called before act()")
        collided = self._collided(outcome)
        phase = self.phase
        if phase is Phase.EXPLORE:
            if not collided:
                arm = self._pending_arm
                self.visits[arm] += 1
                self.reward_sum[arm] += outcome.reward
                self._refresh_estimates()
        elif phase is Phase.MATCH:
            self._held_arm = self._pending_arm
            self._match_collided = collided
        elif phase is Phase.CONSENSUS:
            if collided:
                self.collided_in_consensus = True
        # Exploitation ignores outcomes entirely.
        self._awaiting_observe = False
        self._advance_clock(1)

    def skip(self, n_turns: int) -> None:
        """Fast-forward n_turns of provably outcome-independent play.

        Valid during exploitation (outcomes are ignored) and during a
        matching phase in which the caller knows the joint profile is
        already collision-free (every player holds, so no randomness and
        no state change). Never crosses a phase boundary.
        """
        if self._awaiting_observe:
            raise RuntimeError("skip() between act() and observe()")
        if n_turns < 0 or n_turns > self.phase_clock - 1:
            raise ValueError(
                f"skip of {n_turns} turns does not fit in phase "
                f"(clock {self.phase_clock})"
            )
        if self.phase is Phase.MATCH:
            if self._match_first_turn or self._match_collided:
                raise RuntimeError("skip() in matching requires a held arm")
        elif self.phase is not Phase.EXPLOIT:
            raise RuntimeError(f"skip() invalid in phase {self.phase.value}")
        self.phase_clock -= n_turns

    # -- bulk exploration --------------------------------------------------

    def act_explore_block(self, n_turns: int) -> np.ndarray:
        """Draw n_turns exploration arms at once.

        Consumes the generator stream exactly as n_turns scalar act()
        calls would, so block and per-turn drivers replay identically.
        """
        if self._awaiting_observe:
            raise RuntimeError("act_explore_block() during an open turn")
        if self.phase is not Phase.EXPLORE:
            raise RuntimeError("act_explore_block() outside exploration")
        if not 1 <= n_turns <= self.phase_clock:
            raise ValueError(
                f"block of {n_turns} turns does not fit in phase "
                f"(clock {self.phase_clock})"
            )
        arms = self.rng.integers(0, self.config.n_arms, size=n_turns)
        self._pending_block = arms
        self._awaiting_observe = True
        return arms

    def observe_explore_block(
        self, rewards: np.ndarray, collided: np.ndarray
    ) -> None:
        """Digest the outcomes of an act_explore_block() call."""
        if not self._awaiting_observe:
            raise RuntimeError("observe_explore_block() before a block act")
        arms = self._pending_block
        clean = ~collided
        # add.at applies updates in element order, matching the scalar path.
        np.add.at(self.visits, arms[clean], 1)
        np.add.at(self.reward_sum, arms[clean], rewards[clean])
        self._refresh_estimates()
        self._awaiting_observe = False
        self._pending_block = None
        self._advance_clock(len(arms))

    # -- decision helpers ----------------------------------------------------

    def eligible_arms(self) -> np.ndarray:
        """Arms whose upper confidence value clears the search level.

        Arms visited fewer than 3 times get an infinite radius and are
        always eligible. An empty set means the level is unattainable for
        this player; it falls back to its single best-estimate arm, the
        most useful thing it can hold (or contend for) while the others
        sort themselves out and the level eventually resets.
        """
        m = self.config.n_arms
        seen = self.visits >= 3
        radius = np.full(m, np.inf)
        radius[seen] = self.config.ci_scale * np.sqrt(
            m / np.log(self.visits[seen])
        )
        clears = np.where(seen, self.estimate >= self.gamma - radius, True)
        arms = np.flatnonzero(clears)
        return arms if arms.size else np.array([int(np.argmax(self.estimate))])

    @property
    def holding(self) -> bool:
        """True when the next matching act() will repeat the held arm."""
        return (
            self.phase is Phase.MATCH
            and not self._match_first_turn
            and not self._match_collided
        )

    def _collided(self, outcome: TurnOutcome) -> bool:
        if self.config.use_collision_bit:
            return outcome.collided
        return outcome.reward == 0.0

    def _refresh_estimates(self) -> None:
        v = np.maximum(self.visits, 1)
        self.estimate = self.reward_sum / v

    def _act_match(self) -> int:
        if self._match_first_turn:
            self._match_first_turn = False
            if (
                self.config.warm_start
                and self.exploit_arm is not None
                and bool(np.any(self._eligible == self.exploit_arm))
            ):
                return self.exploit_arm
        elif not self._match_collided:
            return self._held_arm
        pick = int(self.rng.integers(0, len(self._eligible)))
        return int(self._eligible[pick])

    # -- phase machinery -----------------------------------------------------

    def _advance_clock(self, n_turns: int) -> None:
        self.phase_clock -= n_turns
        if self.phase_clock == 0:
            self._next_phase()

    def _next_phase(self) -> None:
        if self.phase is Phase.EXPLORE:
            self._start_matching()
        elif self.phase is Phase.MATCH:
            self._start_consensus()
        elif self.phase is Phase.CONSENSUS:
            self._end_consensus()
        else:
            self.epoch += 1
            self.schedule = phase_lengths(self.epoch, self.config)
            self.phase = Phase.EXPLORE
            self.phase_clock = self.schedule.explore_len

    def _start_matching(self) -> None:
        # A failed consensus means the level overshot what the players
        # could jointly sustain; enough consecutive failures force the
        # level back to zero with a fresh, flatter step size.
        if self.history and not self.history[-1].succeeded:
            self.failure_count += 1
        if self.failure_count == self.reset_threshold:
            self.gamma = 0.0
            self.failure_count = 0
            self.reset_threshold = math.ceil(self.epoch / 3)
            self.epsilon = self.config.epsilon_scale / (
                1.0 + math.log(self.epoch)
            )
        self._eligible = self.eligible_arms()
        self._match_first_turn = True
        self._match_collided = True
        self._held_arm = None
        self.phase = Phase.MATCH
        self.phase_clock = self.schedule.match_len

    def _start_consensus(self) -> None:
        self.matched_arm = self._held_arm
        self._consensus_hold = not self._match_collided
        self.collided_in_consensus = False
        self.phase = Phase.CONSENSUS
        self.phase_clock = self.schedule.consensus_len

    def _end_consensus(self) -> None:
        succeeded = not self.collided_in_consensus
        self.history.append(EpochRecord(self.gamma, succeeded, self.matched_arm))
        if succeeded:
            self.gamma += self.epsilon
        self.exploit_epoch = self._select_exploit_epoch()
        self.exploit_arm = self.history[self.exploit_epoch - 1].arm
        self.phase = Phase.EXPLOIT
        self.phase_clock = self.schedule.exploit_len

    def _select_exploit_epoch(self) -> int:
        """Best epoch in the trailing window, by confirmed level.

        Ranks epochs by gamma * succeeded and breaks ties toward the most
        recent epoch, so an all-failure window degrades to replaying the
        newest matching attempt.
        """
        k = self.epoch
        window = range(math.ceil(k / 2), k + 1)
        return max(
            window,
            key=lambda ell: (
                self.history[ell - 1].gamma * self.history[ell - 1].succeeded,
                ell,
            ),
        )
