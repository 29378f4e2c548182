"""Family allocation game: domain types and primitive quantities.

A game has ``n`` individuals. Individual ``s`` splits a budget ``b[s]``
among all individuals (itself included); ``x[s, t]`` is what ``s`` invests
in ``t``. The personal fitness of ``t`` depends only on the total it
receives, and the inclusive fitness of ``i`` is the relatedness-weighted
sum of everybody's personal fitness.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Hashable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "FEAS_TOL",
    "FitnessKind",
    "FitnessFunction",
    "Marginal",
    "FamilyGame",
    "AllocationProfile",
    "ValidationResult",
    "validate_game",
    "validate_profile",
    "incoming_investment",
    "inclusive_fitness",
    "fitness_marginal",
    "marginal_inverse",
]

FEAS_TOL = 1e-9


class FitnessKind(str, enum.Enum):
    LOG = "log"
    POWER = "power"
    SATEXP = "satexp"
    LINEAR = "linear"


class Marginal(NamedTuple):
    """Extended-real derivative value.

    ``infinite`` is set only where the derivative blows up (power curve
    with zero offset, evaluated at zero). ``value`` is then ``math.inf``.
    """

    value: float
    infinite: bool = False


@dataclass(frozen=True)
class FitnessFunction:
    """Concave nondecreasing personal-fitness curve with ``f(0) = 0``.

    ==========  ===============================
    kind        f(x)
    ==========  ===============================
    log         w * ln(1 + x / c)
    power       w * ((x + c)**p - c**p)
    satexp      w * (1 - exp(-x / c))
    linear      w * x
    ==========  ===============================
    """

    kind: FitnessKind
    w: float = 1.0
    c: float = 1.0
    p: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", FitnessKind(self.kind))
        object.__setattr__(self, "w", float(self.w))
        object.__setattr__(self, "c", float(self.c))
        if self.p is not None:
            object.__setattr__(self, "p", float(self.p))

    @classmethod
    def log(cls, w: float = 1.0, c: float = 1.0) -> FitnessFunction:
        return cls(FitnessKind.LOG, w, c)

    @classmethod
    def power(cls, w: float = 1.0, c: float = 0.0, p: float = 0.5) -> FitnessFunction:
        return cls(FitnessKind.POWER, w, c, p)

    @classmethod
    def satexp(cls, w: float = 1.0, c: float = 1.0) -> FitnessFunction:
        return cls(FitnessKind.SATEXP, w, c)

    @classmethod
    def linear(cls, w: float = 1.0) -> FitnessFunction:
        return cls(FitnessKind.LINEAR, w, 0.0)

    def violations(self) -> list[str]:
        out = []
        if not (math.isfinite(self.w) and self.w > 0):
            out.append("weight w must be positive")
        if self.kind in (FitnessKind.LOG, FitnessKind.SATEXP):
            if not (math.isfinite(self.c) and self.c > 0):
                out.append("scale c must be positive")
        elif self.kind is FitnessKind.POWER:
            if not (math.isfinite(self.c) and self.c >= 0):
                out.append("scale c must be nonnegative")
            if self.p is None or not (0.0 < self.p < 1.0):
                out.append("exponent p must lie in (0, 1)")
        return out

    @property
    def infinite_marginal_at_zero(self) -> bool:
        return self.kind is FitnessKind.POWER and self.c == 0.0

    def __call__(self, x: float) -> float:
        w, c = self.w, self.c
        if self.kind is FitnessKind.LOG:
            return w * math.log1p(x / c)
        if self.kind is FitnessKind.POWER:
            return w * ((x + c) ** self.p - c**self.p)
        if self.kind is FitnessKind.SATEXP:
            return -w * math.expm1(-x / c)
        return w * x

    def derivative(self, x: float) -> float:
        """``f'(x)``; ``math.inf`` only for a zero-offset power curve at 0."""
        w, c = self.w, self.c
        if self.kind is FitnessKind.LOG:
            return w / (c + x)
        if self.kind is FitnessKind.POWER:
            if x + c == 0.0:
                return math.inf
            return w * self.p * (x + c) ** (self.p - 1.0)
        if self.kind is FitnessKind.SATEXP:
            return (w / c) * math.exp(-x / c)
        return w

    def inverse_derivative(self, lam: float) -> float:
        """Smallest ``x >= 0`` with ``f'(x) <= lam`` (``inf`` if none)."""
        w, c = self.w, self.c
        if self.kind is FitnessKind.LOG:
            return max(0.0, w / lam - c)
        if self.kind is FitnessKind.POWER:
            try:
                level = (w * self.p / lam) ** (1.0 / (1.0 - self.p))
            except OverflowError:
                return math.inf
            return max(0.0, level - c)
        if self.kind is FitnessKind.SATEXP:
            return max(0.0, c * math.log(w / (c * lam)))
        return 0.0 if lam >= w else math.inf


@dataclass(frozen=True)
class FamilyGame:
    """Immutable game instance.

    Construction only normalizes shapes; call :func:`validate_game` to check
    the modelling assumptions (positive budgets, unit diagonal relatedness,
    relatedness in ``[0, 1]``). Relatedness need not be symmetric.
    """

    individuals: tuple
    budgets: np.ndarray
    relatedness: np.ndarray
    fitness: tuple

    def __post_init__(self):
        individuals = tuple(self.individuals)
        budgets = np.array(self.budgets, dtype=float).reshape(-1)
        rel = np.array(self.relatedness, dtype=float)
        fitness = tuple(self.fitness)
        n = len(individuals)
        if budgets.shape != (n,):
            raise ValueError(f"expected {n} budgets, got {budgets.shape[0]}")
        if rel.shape != (n, n):
            raise ValueError(f"relatedness must be {n}x{n}, got {rel.shape}")
        if len(fitness) != n:
            raise ValueError(f"expected {n} fitness functions, got {len(fitness)}")
        if len(set(individuals)) != n:
            raise ValueError("individual identifiers must be unique")
        budgets.flags.writeable = False
        rel.flags.writeable = False
        object.__setattr__(self, "individuals", individuals)
        object.__setattr__(self, "budgets", budgets)
        object.__setattr__(self, "relatedness", rel)
        object.__setattr__(self, "fitness", fitness)

    @property
    def n(self) -> int:
        return len(self.individuals)

    def index(self, who: Hashable) -> int:
        """Position of an individual.

        Integers are always positions; anything else is looked up among the
        identifiers.
        """
        if isinstance(who, (int, np.integer)) and not isinstance(who, bool):
            if 0 <= who < self.n:
                return int(who)
        elif who in self.individuals:
            return self.individuals.index(who)
        raise KeyError(f"unknown individual {who!r}")

    def with_relatedness(self, relatedness) -> FamilyGame:
        return FamilyGame(self.individuals, self.budgets, relatedness, self.fitness)

    def with_budgets(self, budgets) -> FamilyGame:
        return FamilyGame(self.individuals, budgets, self.relatedness, self.fitness)

    def permuted(self, perm: Sequence[int]) -> FamilyGame:
        """Relabel: new individual ``k`` is old individual ``perm[k]``."""
        perm = list(perm)
        return FamilyGame(
            [self.individuals[k] for k in perm],
            self.budgets[perm],
            self.relatedness[np.ix_(perm, perm)],
            [self.fitness[k] for k in perm],
        )

    def __eq__(self, other):
        if not isinstance(other, FamilyGame):
            return NotImplemented
        return (
            self.individuals == other.individuals
            and self.fitness == other.fitness
            and np.array_equal(self.budgets, other.budgets)
            and np.array_equal(self.relatedness, other.relatedness)
        )

    __hash__ = None


@dataclass(frozen=True)
class AllocationProfile:
    """Investment matrix: row = source, column = target."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"allocation profile must be square, got shape {m.shape}")
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @classmethod
    def spend_on_self(cls, game: FamilyGame) -> AllocationProfile:
        return cls(np.diag(game.budgets))

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


def as_matrix(x) -> np.ndarray:
    if isinstance(x, AllocationProfile):
        return x.matrix
    return np.asarray(x, dtype=float)


@dataclass
class ValidationResult:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_game(game: FamilyGame) -> ValidationResult:
    """Check the modelling assumptions; violations are returned, not raised."""
    out = []
    for s, (who, b) in enumerate(zip(game.individuals, game.budgets)):
        if not (math.isfinite(b) and b > 0):
            out.append(f"individual {s} ({who}): budget must be positive, got {b!r}")
    r = game.relatedness
    for s in range(game.n):
        if r[s, s] != 1.0:
            out.append(f"individual {s}: diagonal relatedness must equal 1, got {r[s, s]!r}")
        for t in range(game.n):
            if not (0.0 <= r[s, t] <= 1.0):
                out.append(f"relatedness[{s}, {t}] must lie in [0, 1], got {r[s, t]!r}")
    for t, f in enumerate(game.fitness):
        if not isinstance(f, FitnessFunction):
            out.append(f"individual {t}: fitness is not a FitnessFunction")
            continue
        out.extend(f"individual {t}: {msg}" for msg in f.violations())
    return ValidationResult(out)


def validate_profile(game: FamilyGame, x, feas_tol: float = FEAS_TOL) -> ValidationResult:
    """Nonnegativity and budget feasibility of an investment matrix.

    Raises
    ------
    ValueError
        If the matrix does not match the number of individuals.
    """
    m = as_matrix(x)
    if m.shape != (game.n, game.n):
        raise ValueError(f"profile shape {m.shape} does not match game with {game.n} individuals")
    out = []
    if not np.all(np.isfinite(m)):
        out.append("profile contains non-finite entries")
    for s, t in zip(*np.nonzero(m < 0)):
        out.append(f"negative investment x[{s}, {t}] = {m[s, t]!r}")
    sums = m.sum(axis=1)
    for s in np.nonzero(sums > game.budgets + feas_tol)[0]:
        out.append(f"budget exceeded for source {s}: {sums[s]!r} > {game.budgets[s]!r}")
    return ValidationResult(out)


def incoming_investment(x) -> np.ndarray:
    """Total investment received by each target (column sums)."""
    return as_matrix(x).sum(axis=0)


def inclusive_fitness(game: FamilyGame, x, i) -> float:
    """Relatedness-weighted sum of personal fitnesses, seen from ``i``."""
    i = game.index(i)
    incoming = incoming_investment(x)
    return math.fsum(
        game.relatedness[i, t] * game.fitness[t](incoming[t])
        for t in range(game.n)
        if game.relatedness[i, t] != 0.0
    )


def fitness_marginal(f: FitnessFunction, x: float) -> Marginal:
    """Derivative ``f'(x)`` with an explicit flag for an infinite value."""
    if x < 0:
        raise ValueError(f"fitness marginal needs x >= 0, got {x!r}")
    value = f.derivative(x)
    return Marginal(value, math.isinf(value))


def marginal_inverse(f: FitnessFunction, lam: float) -> float:
    """Generalized inverse ``inf{x >= 0 : f'(x) <= lam}``.

    Returns ``math.inf`` for a linear curve with ``lam < w`` (demand is
    unbounded there); callers must special-case it.
    """
    if not lam > 0:
        raise ValueError(f"multiplier must be positive, got {lam!r}")
    return f.inverse_derivative(lam)
