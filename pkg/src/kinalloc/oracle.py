"""Brute-force ground truth on a lattice, plus random game generation.

Nothing here uses marginals or multipliers: best responses are found by
evaluating the payoff at every lattice point of the budget simplex. That
keeps the oracle independent of the water-filling solver it checks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .family_model import FamilyGame, FitnessFunction, FitnessKind, as_matrix

__all__ = [
    "MAX_GRID_POINTS",
    "GridSpec",
    "GridTooLarge",
    "grid_size",
    "grid_best_response",
    "grid_nash_check",
    "NashCheck",
    "random_instance",
]

MAX_GRID_POINTS = 10**7


class GridTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    step: float = 1e-2
    epsilon: float = 1e-3

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"grid step must be positive, got {self.step!r}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")


def _units(budget: float, step: float) -> int:
    # the lattice step is shrunk to budget / units so that the simplex
    # {sum = budget} contains lattice points
    return max(1, math.ceil(budget / step - 1e-9))


def grid_size(n: int, budget: float, step: float) -> int:
    """Number of lattice points on the budget simplex with ``n`` coordinates."""
    return math.comb(_units(budget, step) + n - 1, n - 1)


def _check_size(n, budget, step):
    size = grid_size(n, budget, step)
    if size > MAX_GRID_POINTS:
        raise GridTooLarge(
            f"grid has {size} points, more than the bound of {MAX_GRID_POINTS}; "
            "use a coarser step"
        )


def grid_best_response(game: FamilyGame, s, external, spec: GridSpec):
    """Exhaustive maximization of the payoff of ``s`` over the lattice.

    Returns ``(allocation, value)``; ties go to the lexicographically
    smallest allocation.
    """
    s = game.index(s)
    external = np.asarray(external, dtype=float)
    n = game.n
    budget = float(game.budgets[s])
    _check_size(n, budget, spec.step)
    units = _units(budget, spec.step)
    h = budget / units
    k = np.arange(units + 1)
    row = game.relatedness[s]
    # payoff is separable: tabulate each target's term on the lattice
    table = np.zeros((n, units + 1))
    for t, f in enumerate(game.fitness):
        if row[t] != 0.0:
            table[t] = row[t] * np.array([f(external[t] + j * h) for j in k])

    if n == 1:
        return np.array([budget]), float(table[0, units])

    # the first n-3 coordinates are enumerated in lexicographic order, the
    # last (up to) three in one vectorized block, itself in lexicographic order
    tail = min(n, 3)
    best_val, best_idx = -math.inf, None
    for head in _compositions_upto(n - tail, units):
        rem = units - sum(head)
        base = math.fsum(table[t, j] for t, j in enumerate(head))
        cols = _simplex_block(tail, rem)
        vals = base + sum(table[n - tail + k, cols[k]] for k in range(tail))
        j = int(np.argmax(vals))
        if vals[j] > best_val:
            best_val, best_idx = float(vals[j]), (*head, *(int(c[j]) for c in cols))
    alloc = np.array(best_idx, dtype=float) * h
    return alloc, best_val


def _simplex_block(k: int, total: int) -> list[np.ndarray]:
    """Columns of all ``k``-tuples (k = 2 or 3) summing to ``total``, lexicographic."""
    if k == 2:
        a = np.arange(total + 1)
        return [a, total - a]
    first = np.arange(total + 1)
    counts = total + 1 - first
    a = np.repeat(first, counts)
    starts = np.cumsum(counts) - counts
    b = np.arange(counts.sum()) - np.repeat(starts, counts)
    return [a, b, total - a - b]


def _compositions_upto(m: int, total: int):
    """All ``m``-tuples of nonnegative ints with sum <= total, lexicographic."""
    if m == 0:
        yield ()
        return
    for j in range(total + 1):
        for rest in _compositions_upto(m - 1, total - j):
            yield (j, *rest)


@dataclass(frozen=True)
class NashCheck:
    passed: bool
    worst_gain: float
    worst_source: int
    deviation: np.ndarray


def _payoff(game: FamilyGame, s: int, external, alloc) -> float:
    row = game.relatedness[s]
    return math.fsum(
        row[t] * f(external[t] + alloc[t]) for t, f in enumerate(game.fitness) if row[t] != 0.0
    )


def grid_nash_check(game: FamilyGame, x, spec: GridSpec) -> NashCheck:
    """Epsilon-Nash test against every lattice deviation of every source."""
    m = as_matrix(x)
    for s in range(game.n):
        _check_size(game.n, float(game.budgets[s]), spec.step)
    incoming = m.sum(axis=0)
    worst_gain, worst_s, worst_dev = -math.inf, 0, m[0].copy()
    for s in range(game.n):
        external = np.maximum(incoming - m[s], 0.0)
        current = _payoff(game, s, external, m[s])
        alloc, value = grid_best_response(game, s, external, spec)
        gain = value - current
        if gain > worst_gain:
            worst_gain, worst_s, worst_dev = gain, s, alloc
    return NashCheck(worst_gain <= spec.epsilon, worst_gain, worst_s, worst_dev)


_SMOOTH_KINDS = (FitnessKind.LOG, FitnessKind.POWER, FitnessKind.SATEXP)


def random_instance(
    seed: int,
    n: int,
    fitness_kinds: Sequence = _SMOOTH_KINDS,
    budget_range: tuple[float, float] = (0.1, 10.0),
    relatedness_model: str = "uniform",
) -> FamilyGame:
    """Random valid game, deterministic in ``seed``.

    ``relatedness_model`` is ``"uniform"`` (independent off-diagonal entries
    in [0, 1]), ``"symmetric"`` (same, mirrored) or ``"dominant"`` (entries
    in [0, 1), so every individual is strictly most related to itself).
    Parameters are drawn from w in [0.1, 10], c in [0.1, 5], p in [0.2, 0.8].
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    kinds = [FitnessKind(k) for k in fitness_kinds]
    budgets = rng.uniform(*budget_range, size=n)
    rel = rng.uniform(0.0, 1.0, size=(n, n))
    if relatedness_model == "symmetric":
        rel = np.triu(rel, 1) + np.triu(rel, 1).T
    elif relatedness_model == "dominant":
        rel = np.minimum(rel, 0.999)
    elif relatedness_model != "uniform":
        raise ValueError(f"unknown relatedness model {relatedness_model!r}")
    np.fill_diagonal(rel, 1.0)
    fitness = []
    for _ in range(n):
        kind = kinds[rng.integers(len(kinds))]
        w = rng.uniform(0.1, 10.0)
        c = rng.uniform(0.1, 5.0)
        p = rng.uniform(0.2, 0.8)
        if kind is FitnessKind.POWER:
            fitness.append(FitnessFunction.power(w, c, p))
        elif kind is FitnessKind.LINEAR:
            fitness.append(FitnessFunction.linear(w))
        else:
            fitness.append(FitnessFunction(kind, w, c))
    return FamilyGame(list(range(n)), budgets, rel, fitness)
