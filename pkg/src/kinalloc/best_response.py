"""Water-filling best response for a single source individual.

Holding everybody else's investments fixed, source ``s`` solves::

    maximize    sum_t r[s, t] * f_t(external[t] + y[t])
    subject to  y >= 0,  sum(y) = b[s]

The optimum equalizes the adjusted marginals ``r[s, t] * f_t'`` at a common
level ``lam`` on the targets that receive something, and every other target
sits at or below that level. Demand at a given level is available in
closed form through the inverse marginal, and total demand is
nonincreasing in ``lam``, so the level is found by a bracketed root search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .family_model import FamilyGame, FitnessKind

__all__ = [
    "BR_TOL",
    "BR_MAX_STEPS",
    "BestResponseResult",
    "adjusted_marginal",
    "spend_at_multiplier",
    "water_fill",
    "br_objective",
]

BR_TOL = 1e-10
BR_MAX_STEPS = 200


@dataclass(frozen=True)
class BestResponseResult:
    allocation: np.ndarray
    multiplier: float
    active_set: frozenset
    degenerate: bool = False


def adjusted_marginal(game: FamilyGame, s, incoming) -> np.ndarray:
    """``r[s, t] * f_t'(incoming[t])`` for every target ``t``.

    A zero relatedness annihilates an infinite marginal (``0 * inf = 0``).
    """
    s = game.index(s)
    incoming = np.asarray(incoming, dtype=float)
    if np.any(incoming < 0):
        raise ValueError("incoming investment must be nonnegative")
    row = game.relatedness[s]
    out = np.zeros(game.n)
    for t, f in enumerate(game.fitness):
        if row[t] != 0.0:
            out[t] = row[t] * f.derivative(incoming[t])
    return out


def _demand(f, r: float, ext: float, lam: float) -> float:
    if r == 0.0:
        return 0.0
    level = f.inverse_derivative(lam / r)
    return level - ext if level > ext else 0.0


def _compile_demand(game: FamilyGame, s: int, external, targets):
    """Fast ``lam -> total demand`` over smooth ``targets`` (positive relatedness)."""
    terms = []
    row = game.relatedness[s]
    for t in targets:
        f, r, ext = game.fitness[t], row[t], float(external[t])
        if f.kind is FitnessKind.LOG:
            terms.append((0, r * f.w, f.c + ext, 0.0))
        elif f.kind is FitnessKind.POWER:
            terms.append((1, r * f.w * f.p, f.c + ext, 1.0 / (1.0 - f.p)))
        else:
            terms.append((2, math.log(r * f.w / f.c), ext, f.c))

    def demand(lam):
        inv = 1.0 / lam
        log_lam = math.log(lam)
        total = 0.0
        for kind, a, shift, e in terms:
            if kind == 0:
                d = a * inv - shift
            elif kind == 1:
                try:
                    d = (a * inv) ** e - shift
                except OverflowError:
                    return math.inf
            else:
                d = e * (a - log_lam) - shift
            if d > 0.0:
                total += d
        return total

    return demand


def spend_at_multiplier(game: FamilyGame, s, external, lam: float) -> float:
    """Total demand of ``s`` when every target is filled up to level ``lam``.

    Returns ``math.inf`` when a linear target with ``r * w > lam`` makes
    demand unbounded.
    """
    if not lam > 0:
        raise ValueError(f"multiplier must be positive, got {lam!r}")
    s = game.index(s)
    row = game.relatedness[s]
    return math.fsum(
        _demand(f, row[t], external[t], lam) for t, f in enumerate(game.fitness)
    )


def br_objective(game: FamilyGame, s, external, allocation) -> float:
    """Inclusive fitness of ``s`` if it plays ``allocation`` against ``external``."""
    s = game.index(s)
    row = game.relatedness[s]
    return math.fsum(
        row[t] * f(external[t] + allocation[t])
        for t, f in enumerate(game.fitness)
        if row[t] != 0.0
    )


def _solve_level(demand, budget: float, lam_hi: float, hint: float | None = None):
    """Find ``lam`` with ``demand(lam) == budget`` given ``demand(lam_hi) <= budget``.

    ``lam_hi`` may be infinite. ``hint`` seeds a tight initial bracket. The
    search runs on ``log(lam)``.
    """
    factor = 2.0
    if hint is not None and 0.0 < hint < lam_hi:
        factor = 1.0 + 1e-3
        top = hint * factor
        if top < lam_hi and demand(top) <= budget:
            lam_hi = top
    if math.isinf(lam_hi):
        lam_hi = 1.0
        while demand(lam_hi) > budget:
            lam_hi *= 2.0
    lam_lo = lam_hi
    while True:
        lam_lo /= factor
        factor *= factor
        if lam_lo < 1e-300 or demand(lam_lo) >= budget:
            break
    lo, hi = math.log(lam_lo), math.log(lam_hi)
    g = lambda u: demand(math.exp(u)) - budget  # noqa: E731
    if g(lo) <= 0.0:
        return lam_lo
    if g(hi) >= 0.0:
        return lam_hi
    u = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=BR_MAX_STEPS)
    return math.exp(u)


def water_fill(game: FamilyGame, s, external, hint: float | None = None) -> BestResponseResult:
    """Exact best response of ``s`` to the investments of the others.

    Parameters
    ----------
    game
        The game.
    s
        Source individual (identifier or index).
    external
        Investment each target receives from sources other than ``s``.
    hint
        Optional guess of the multiplier (e.g. from a previous iteration);
        only speeds up the search.

    Returns
    -------
    BestResponseResult
        Allocation summing to the budget, the multiplier (the largest
        adjusted marginal at the resulting incoming investments) and the set
        of funded targets. When every adjusted marginal is zero the budget
        goes to ``s`` itself and ``degenerate`` is set.

    Notes
    -----
    Linear targets have constant marginals, so demand jumps from zero to
    unbounded at ``lam = r * w``. If the smooth targets cannot absorb the
    budget at the highest such level, the remainder is split equally among
    the tied linear targets of highest adjusted marginal.
    """
    s = game.index(s)
    external = np.asarray(external, dtype=float)
    if external.shape != (game.n,) or np.any(external < 0):
        raise ValueError("external investment must be a nonnegative vector of length n")
    budget = float(game.budgets[s])
    row = game.relatedness[s]
    fits = game.fitness

    linear = [t for t in range(game.n) if fits[t].kind is FitnessKind.LINEAR and row[t] > 0]
    smooth = [t for t in range(game.n) if fits[t].kind is not FitnessKind.LINEAR and row[t] > 0]
    lin_level = max((row[t] * fits[t].w for t in linear), default=0.0)
    smooth_hi = max((row[t] * fits[t].derivative(external[t]) for t in smooth), default=0.0)

    alloc = np.zeros(game.n)
    smooth_demand = _compile_demand(game, s, external, smooth)

    if lin_level == 0.0 and smooth_hi == 0.0:
        alloc[s] = budget
        return BestResponseResult(alloc, 0.0, frozenset([s]), degenerate=True)

    if linear and (smooth_hi <= lin_level or smooth_demand(lin_level) <= budget):
        for t in smooth:
            alloc[t] = _demand(fits[t], row[t], external[t], lin_level)
        tied = [t for t in linear if row[t] * fits[t].w >= lin_level * (1 - 1e-12)]
        alloc[tied] += (budget - alloc.sum()) / len(tied)
    else:
        lam = _solve_level(smooth_demand, budget, smooth_hi, hint)
        for t in smooth:
            alloc[t] = _demand(fits[t], row[t], external[t], lam)
        total = alloc.sum()
        if total > 0:
            alloc *= budget / total
        else:
            alloc[int(np.argmax(adjusted_marginal(game, s, external)))] = budget

    marg = adjusted_marginal(game, s, external + alloc)
    active = frozenset(int(t) for t in np.nonzero(alloc > 0)[0])
    return BestResponseResult(alloc, float(marg.max()), active)
