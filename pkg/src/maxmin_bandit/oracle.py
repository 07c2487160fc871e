"""Exact matching computations on a known reward table.

Everything here works on the true means: the best guaranteed-minimum
assignment value (the quantity the learning agents chase), the exhaustive
census of injective assignments by bottleneck value, the classical
max-total assignment for comparison, and a Monte Carlo probe of the
decentralized hold-or-resample matching dynamics.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .env import RewardMatrix

# Exhaustive enumeration refuses above this many injective assignments.
ENUMERATION_LIMIT = 10**8

# Bottleneck values this close together land in one histogram bucket.
VALUE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class MatchingResult:
    """An injective player->arm assignment with its guaranteed minimum."""

    assignment: tuple[int, ...]
    bottleneck: float
    size: int


@dataclass(frozen=True)
class MatchingHistogram:
    """Count of injective assignments per exact bottleneck value."""

    counts: dict[float, int]
    total: int


@dataclass(frozen=True)
class MaxSumResult:
    assignment: tuple[int, ...]
    total: float
    bottleneck: float


@dataclass(frozen=True)
class GapReport:
    """Smallest within-row separation between two arm means."""

    gap: float
    player: int
    arms: tuple[int, int]


@dataclass(frozen=True)
class BipartiteGraph:
    """Player->arm adjacency; players are rows, arms are columns."""

    n_players: int
    n_arms: int
    neighbors: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.neighbors) != self.n_players:
            raise ValueError("need one neighbor set per player")
        for arms in self.neighbors:
            for a in arms:
                if not 0 <= a < self.n_arms:
                    raise ValueError(f"arm {a} out of range")

    @classmethod
    def from_threshold(cls, matrix: RewardMatrix, gamma: float) -> "BipartiteGraph":
        """Keep the edges whose true mean reaches gamma."""
        nbrs = tuple(
            tuple(int(a) for a in np.flatnonzero(matrix.mu[n] >= gamma))
            for n in range(matrix.n_players)
        )
        return cls(matrix.n_players, matrix.n_arms, nbrs)


@dataclass(frozen=True)
class AbsorptionEstimate:
    mean_steps: float
    max_steps: int
    absorbed_fraction: float
    n_trials: int


def max_bipartite_matching(graph: BipartiteGraph) -> MatchingResult:
    """Maximum matching by repeated augmenting-path search.

    Players are processed in index order and neighbor lists in listed order,
    so the returned assignment is deterministic.  Unmatched players carry -1.
    """
    owner = [-1] * graph.n_arms  # arm -> player

    def try_assign(player: int, banned: set[int]) -> bool:
        for arm in graph.neighbors[player]:
            if arm in banned:
                continue
            banned.add(arm)
            if owner[arm] == -1 or try_assign(owner[arm], banned):
                owner[arm] = player
                return True
        return False

    size = 0
    for player in range(graph.n_players):
        if try_assign(player, set()):
            size += 1
    assignment = [-1] * graph.n_players
    for arm, player in enumerate(owner):
        if player != -1:
            assignment[player] = arm
    return MatchingResult(assignment=tuple(assignment), bottleneck=math.nan, size=size)


def gamma_star(matrix: RewardMatrix) -> MatchingResult:
    """Largest value gamma such that every player can be assigned a distinct
    arm with true mean >= gamma, plus a witness assignment.

    Binary search over the distinct matrix entries: feasibility of a
    threshold is monotone, and the optimum is always attained at an entry.
    """
    values = np.unique(matrix.mu)
    lo, hi = 0, len(values) - 1
    best = None
    while lo <= hi:
        mid = (lo + hi) // 2
        gamma = float(values[mid])
        result = max_bipartite_matching(BipartiteGraph.from_threshold(matrix, gamma))
        if result.size == matrix.n_players:
            best = MatchingResult(result.assignment, gamma, result.size)
            lo = mid + 1
        else:
            hi = mid - 1
    if best is None:
        # Unreachable when M >= N: the lowest entry admits the full graph.
        raise RuntimeError("no perfect matching at any threshold")
    return best


def is_gamma_matching(matrix: RewardMatrix, profile, gamma: float) -> bool:
    """True when the profile is injective and every player's mean >= gamma."""
    profile = list(profile)
    if len(set(profile)) != len(profile):
        return False
    return all(matrix.mu[n, a] >= gamma for n, a in enumerate(profile))


def enumeration_size(matrix: RewardMatrix) -> int:
    """Number of injective assignments, M!/(M-N)!."""
    return math.perm(matrix.n_arms, matrix.n_players)


def matching_histogram(matrix: RewardMatrix) -> MatchingHistogram:
    """Exhaustively count injective assignments per bottleneck value.

    The number of assignments is M!/(M-N)!; anything above
    ENUMERATION_LIMIT is refused rather than attempted.
    """
    n, m = matrix.n_players, matrix.n_arms
    total = enumeration_size(matrix)
    if total > ENUMERATION_LIMIT:
        raise ValueError(
            f"{total} assignments exceed the enumeration limit of {ENUMERATION_LIMIT}"
        )
    mu = matrix.mu
    counts: dict[float, int] = {}
    chunk = 200_000
    perms = itertools.permutations(range(m), n)
    rows = np.arange(n)
    while True:
        block = np.fromiter(
            itertools.chain.from_iterable(itertools.islice(perms, chunk)),
            dtype=np.intp,
        ).reshape(-1, n)
        if block.size == 0:
            break
        bottlenecks = mu[rows, block].min(axis=1)
        uniq, cnt = np.unique(bottlenecks, return_counts=True)
        for v, c in zip(uniq, cnt):
            # Bottlenecks are exact matrix entries; merge within tolerance
            # so keys stay equal to the stored values.
            key = float(v)
            for existing in counts:
                if abs(existing - key) <= VALUE_TOLERANCE:
                    key = existing
                    break
            counts[key] = counts.get(key, 0) + int(c)
    assert sum(counts.values()) == total
    return MatchingHistogram(counts=counts, total=total)


def max_sum_matching(matrix: RewardMatrix) -> MaxSumResult:
    """Assignment maximizing the sum of means (not the minimum)."""
    rows, cols = linear_sum_assignment(matrix.mu, maximize=True)
    assignment = [-1] * matrix.n_players
    for r, c in zip(rows, cols):
        assignment[r] = int(c)
    taken = matrix.mu[rows, cols]
    return MaxSumResult(
        assignment=tuple(assignment),
        total=float(taken.sum()),
        bottleneck=float(taken.min()),
    )


def minimal_gap(matrix: RewardMatrix) -> GapReport:
    """Smallest |mu[n,i] - mu[n,j]| over players n and arm pairs i < j."""
    best = GapReport(gap=math.inf, player=-1, arms=(-1, -1))
    for n in range(matrix.n_players):
        row = matrix.mu[n]
        order = np.argsort(row, kind="stable")
        diffs = np.diff(row[order])
        j = int(np.argmin(diffs))
        if diffs[j] < best.gap:
            best = GapReport(
                gap=float(diffs[j]),
                player=n,
                arms=(int(order[j]), int(order[j + 1])),
            )
    return best


def estimate_absorption_time(
    graph: BipartiteGraph,
    n_trials: int = 10_000,
    cap: int = 10_000,
    seed: int = 0,
) -> AbsorptionEstimate:
    """Monte Carlo absorption time of the hold-or-resample dynamics.

    Each trial starts every player on a uniform arm from its neighbor set.
    Per step, players sharing an arm resample uniformly from their neighbor
    sets while everyone else holds; a collision-free state is absorbing.
    A trial that starts collision-free has absorption time 0.  Trials still
    colliding after `cap` steps are reported via absorbed_fraction and
    excluded from the mean and max.
    """
    if max_bipartite_matching(graph).size != graph.n_players:
        raise ValueError("graph has no perfect matching; the dynamics cannot absorb")
    for n, arms in enumerate(graph.neighbors):
        if not arms:
            raise ValueError(f"player {n} has no neighbors")
    rng = np.random.default_rng(seed)
    n_players, n_arms = graph.n_players, graph.n_arms
    nbrs = [np.array(arms, dtype=np.intp) for arms in graph.neighbors]

    # All trials advance in lockstep as rows of a (n_trials, N) state array.
    state = np.empty((n_trials, n_players), dtype=np.intp)
    for n in range(n_players):
        state[:, n] = nbrs[n][rng.integers(0, len(nbrs[n]), size=n_trials)]
    absorbed_at = np.full(n_trials, -1, dtype=np.int64)
    active = np.arange(n_trials)

    for step in range(cap + 1):
        occupancy = np.zeros((len(active), n_arms), dtype=np.int64)
        rows = np.repeat(np.arange(len(active)), n_players)
        np.add.at(occupancy, (rows, state[active].ravel()), 1)
        collided = occupancy[rows, state[active].ravel()].reshape(len(active), n_players) > 1
        done = ~collided.any(axis=1)
        absorbed_at[active[done]] = step
        active = active[~done]
        if len(active) == 0 or step == cap:
            break
        collided = collided[~done]
        for n in range(n_players):
            hit = collided[:, n]
            k = int(hit.sum())
            if k:
                state[active[hit], n] = nbrs[n][rng.integers(0, len(nbrs[n]), size=k)]

    times = absorbed_at[absorbed_at >= 0]
    frac = len(times) / n_trials
    mean = float(times.mean()) if len(times) else math.nan
    mx = int(times.max()) if len(times) else 0
    return AbsorptionEstimate(
        mean_steps=mean, max_steps=mx, absorbed_fraction=frac, n_trials=n_trials
    )
