"""Collision-channel bandit environment.

N players repeatedly pick one of M arms (M >= N).  Arm indices are 0-based
everywhere in this package.  A player that shares its arm with anyone else
gets reward exactly 0.0 for that turn; otherwise it gets the arm's mean for
its own row plus bounded uniform noise.  The environment never clips, so
rewards can leave [0, 1] when the noise half-width allows it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

# Built-in reward tables.  Entries are exact decimal literals so that text
# round-trips and histogram bucketing stay bit-stable.
U1 = (
    (0.5, 0.9, 0.1, 0.25),
    (0.25, 0.5, 0.25, 0.1),
    (0.1, 0.25, 0.5, 0.5),
    (0.1, 0.9, 0.25, 0.5),
)

U2 = (
    (0.9, 0.4, 0.8, 0.1, 0.3, 0.05, 0.2, 0.1, 0.3, 0.2),
    (0.4, 0.3, 0.3, 0.1, 0.4, 0.3, 0.4, 0.4, 0.3, 0.4),
    (0.1, 0.05, 0.1, 0.4, 0.1, 0.2, 0.3, 0.3, 0.4, 0.1),
    (0.4, 0.1, 0.9, 0.2, 0.9, 0.75, 0.1, 0.9, 0.25, 0.05),
    (0.8, 0.3, 0.1, 0.7, 0.1, 0.4, 0.05, 0.2, 0.75, 0.05),
    (0.4, 0.05, 0.3, 0.7, 0.05, 0.1, 0.25, 0.75, 0.6, 0.05),
    (0.9, 0.3, 0.3, 0.8, 0.1, 0.25, 0.7, 0.05, 0.2, 0.3),
    (0.3, 0.1, 0.4, 0.25, 0.05, 0.9, 0.25, 0.1, 0.05, 0.4),
    (0.8, 0.75, 0.1, 0.2, 0.4, 0.05, 0.3, 0.2, 0.1, 0.25),
    (0.4, 0.4, 0.9, 0.7, 0.25, 0.2, 0.05, 0.1, 0.4, 0.25),
)

BUILTIN_MATRICES = {"u1": U1, "u2": U2}


@dataclass(frozen=True)
class RewardMatrix:
    """True mean rewards, one row per player, one column per arm."""

    mu: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64)
        if mu.ndim != 2:
            raise ValueError(f"reward matrix must be 2-D, got shape {mu.shape}")
        n, m = mu.shape
        if m < n:
            raise ValueError(f"need at least as many arms as players, got {n} players x {m} arms")
        if not (np.all(mu >= 0.0) and np.all(mu <= 1.0)):
            raise ValueError("reward means must lie in [0, 1]")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)

    @property
    def n_players(self) -> int:
        return self.mu.shape[0]

    @property
    def n_arms(self) -> int:
        return self.mu.shape[1]


def load_matrix(source: str | Path) -> RewardMatrix:
    """Resolve a matrix selector: a built-in name ('u1', 'u2') or a text file.

    Files hold one whitespace-separated row of decimals per player.
    """
    key = str(source).lower()
    if key in BUILTIN_MATRICES:
        return RewardMatrix(np.array(BUILTIN_MATRICES[key]), name=key)
    path = Path(source)
    if not path.exists():
        raise FileNotFoundError(f"matrix source {source!r} is neither a built-in name nor a file")
    rows = np.loadtxt(path, dtype=np.float64, ndmin=2)
    return RewardMatrix(rows, name=path.name)


@dataclass(frozen=True)
class TurnOutcome:
    """What one player sees after one turn."""

    reward: float
    collided: bool


@dataclass
class NoiseModel:
    """Additive uniform noise on [-half_width, +half_width], no clipping."""

    half_width: float = 0.05

    def __post_init__(self):
        if self.half_width < 0:
            raise ValueError("noise half-width must be non-negative")


def no_collision_indicator(profile: Sequence[int], n_arms: int) -> np.ndarray:
    """Per-arm indicator: 1 when at most one player chose the arm, else 0."""
    counts = np.bincount(np.asarray(profile, dtype=np.intp), minlength=n_arms)
    return (counts <= 1).astype(np.int64)


def expected_min_utility(matrix: RewardMatrix, profile: Sequence[int]) -> float:
    """min over players of (true mean) * (collision indicator), noise averaged out."""
    profile = list(profile)
    _check_profile(matrix, profile)
    eta = no_collision_indicator(profile, matrix.n_arms)
    mu = matrix.mu
    return min(mu[n, a] * eta[a] for n, a in enumerate(profile))


def instantaneous_regret(matrix: RewardMatrix, gamma_star: float, profile: Sequence[int]) -> float:
    """Shortfall of the profile's expected min utility below the oracle value."""
    return gamma_star - expected_min_utility(matrix, profile)


def _check_profile(matrix: RewardMatrix, profile: Sequence[int]) -> None:
    if len(profile) != matrix.n_players:
        raise ValueError(f"profile has {len(profile)} entries for {matrix.n_players} players")
    for a in profile:
        if not 0 <= a < matrix.n_arms:
            raise ValueError(f"arm index {a} out of range [0, {matrix.n_arms})")


class CollisionEnv:
    """Stateful environment: one noise draw per (player, turn), own RNG stream.

    The per-turn draw is consumed whether or not the player collided, so the
    stream position depends only on the turn count, never on play content.
    """

    def __init__(self, matrix: RewardMatrix, noise: NoiseModel, rng: np.random.Generator):
        self.matrix = matrix
        self.noise = noise
        self.rng = rng

    def step(self, profile: Sequence[int]) -> list[TurnOutcome]:
        profile = list(profile)
        _check_profile(self.matrix, profile)
        hw = self.noise.half_width
        draws = self.rng.uniform(-hw, hw, size=self.matrix.n_players)
        eta = no_collision_indicator(profile, self.matrix.n_arms)
        mu = self.matrix.mu
        out = []
        for n, a in enumerate(profile):
            if eta[a]:
                out.append(TurnOutcome(reward=mu[n, a] + draws[n], collided=False))
            else:
                out.append(TurnOutcome(reward=0.0, collided=True))
        return out

    def step_block(self, profiles: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized step over a (T, N) block of profiles.

        Consumes the noise stream in exactly the same order as T successive
        step() calls.  Returns (rewards, collided) arrays of shape (T, N).
        """
        profiles = np.asarray(profiles, dtype=np.intp)
        t, n = profiles.shape
        if n != self.matrix.n_players:
            raise ValueError(f"profile block has {n} columns for {self.matrix.n_players} players")
        hw = self.noise.half_width
        draws = self.rng.uniform(-hw, hw, size=(t, n))
        # Count per-turn arm occupancy without a Python loop over turns.
        occupancy = np.zeros((t, self.matrix.n_arms), dtype=np.int64)
        rows = np.repeat(np.arange(t), n)
        np.add.at(occupancy, (rows, profiles.ravel()), 1)
        collided = occupancy[rows, profiles.ravel()].reshape(t, n) > 1
        mu_taken = self.matrix.mu[np.arange(n), profiles]
        rewards = np.where(collided, 0.0, mu_taken + draws)
        return rewards, collided

    def skip(self, n_turns: int) -> None:
        """Advance the noise stream as if n_turns step() calls had happened."""
        if n_turns < 0:
            raise ValueError("cannot skip a negative number of turns")
        self.rng.bit_generator.advance(n_turns * self.matrix.n_players)
