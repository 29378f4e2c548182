"""Nash equilibria: best-response solver, KKT certificate, classification.

A profile is a Nash equilibrium exactly when, for every source ``s``, it
spends its whole budget and only funds targets whose adjusted marginal
``r[s, t] * f_t'(incoming[t])`` is maximal. :func:`kkt_verify` turns that
characterization into numeric residuals, so any profile (ours or
user-supplied) can be certified independently of how it was produced.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .best_response import water_fill, br_objective
from .family_model import (
    AllocationProfile,
    FamilyGame,
    as_matrix,
    incoming_investment,
    validate_profile,
)

__all__ = [
    "KKT_TOL",
    "SUPPORT_TOL",
    "ARGMAX_TOL",
    "KktCertificate",
    "Classification",
    "Diagnostics",
    "EquilibriumReport",
    "InclusionCheck",
    "PropertyReport",
    "SolveOptions",
    "kkt_verify",
    "classify",
    "solve_nash",
    "check_support_inclusions",
]

log = logging.getLogger(__name__)

KKT_TOL = 1e-8
SUPPORT_TOL = 1e-9
ARGMAX_TOL = 1e-7


def _adjusted(game: FamilyGame, incoming: np.ndarray):
    """Adjusted-marginal matrix and mask of its infinite entries."""
    n = game.n
    plain = np.array([f.derivative(incoming[t]) for t, f in enumerate(game.fitness)])
    inf_cols = np.isinf(plain)
    rel = game.relatedness
    adj = np.zeros((n, n))
    finite = ~inf_cols
    adj[:, finite] = rel[:, finite] * plain[finite]
    adj[:, inf_cols] = np.where(rel[:, inf_cols] > 0, np.inf, 0.0)
    return adj, np.isinf(adj), plain


@dataclass(frozen=True)
class KktCertificate:
    """Multipliers and residuals of the optimality conditions.

    ``lam[s]`` is the largest adjusted marginal of ``s`` and
    ``mu[s, t] = lam[s] - r[s, t] * f_t'``; the profile is certified when
    every residual is at most ``tol``.
    """

    lam: np.ndarray
    mu: np.ndarray
    stationarity: float
    complementarity: float
    budget: float
    nonnegativity: float
    mu_sign: float
    tol: float

    @property
    def residuals(self) -> dict:
        return {
            "stationarity": self.stationarity,
            "complementarity": self.complementarity,
            "budget": self.budget,
            "nonnegativity": self.nonnegativity,
            "mu_sign": self.mu_sign,
        }

    @property
    def certified(self) -> bool:
        return all(v <= self.tol for v in self.residuals.values())


def kkt_verify(game: FamilyGame, x, kkt_tol: float = KKT_TOL) -> KktCertificate:
    """Certify ``x`` as a Nash equilibrium (up to ``kkt_tol``).

    Raises
    ------
    ValueError
        If ``x`` is not an admissible profile.
    """
    m = as_matrix(x)
    check = validate_profile(game, m)
    if not check.ok:
        raise ValueError("cannot verify an infeasible profile: " + "; ".join(check.violations))
    incoming = incoming_investment(m)
    adj, adj_inf, _ = _adjusted(game, incoming)
    lam = adj.max(axis=1)
    lam_inf = np.isinf(lam)

    with np.errstate(invalid="ignore"):
        mu = lam[:, None] - adj
    # inf - inf: the entry is itself at the (infinite) maximum
    mu[adj_inf] = 0.0
    mu[lam_inf[:, None] & ~adj_inf] = np.inf

    with np.errstate(invalid="ignore"):
        stat = lam[:, None] - mu - adj
    stat[adj_inf | lam_inf[:, None]] = 0.0
    stationarity = float(np.abs(stat).max())

    with np.errstate(invalid="ignore"):
        gap_x = mu * m
    gap_x[m == 0.0] = 0.0
    complementarity = float(np.abs(gap_x).max())

    budget = float(np.abs(m.sum(axis=1) - game.budgets).max())
    nonneg = max(0.0, -float(m.min()))
    mu_sign = max(0.0, -float(mu.min()))
    return KktCertificate(
        lam=lam,
        mu=mu,
        stationarity=stationarity,
        complementarity=complementarity,
        budget=budget,
        nonnegativity=nonneg,
        mu_sign=mu_sign,
        tol=kkt_tol,
    )


@dataclass(frozen=True)
class Classification:
    """Who funds whom, and who has the highest marginals.

    Sets hold integer indices into ``game.individuals``.
    """

    beneficiaries: tuple
    selfish: frozenset
    altruistic: frozenset
    totally_altruistic: frozenset
    argmax_adjusted: tuple
    argmax_plain: frozenset


def _argmax_set(values: np.ndarray, tol: float) -> frozenset:
    top = values.max()
    if math.isinf(top):
        return frozenset(int(t) for t in np.nonzero(np.isinf(values))[0])
    return frozenset(int(t) for t in np.nonzero(values >= top - tol * abs(top))[0])


def classify(
    game: FamilyGame,
    x,
    support_tol: float = SUPPORT_TOL,
    argmax_tol: float = ARGMAX_TOL,
) -> Classification:
    """Beneficiaries, selfish/altruistic sets and highest-marginal sets.

    ``argmax_tol`` is relative to the largest marginal in question.
    """
    m = as_matrix(x)
    n = game.n
    beneficiaries = tuple(frozenset(int(t) for t in np.nonzero(m[s] > support_tol)[0]) for s in range(n))
    selfish = frozenset(s for s in range(n) if beneficiaries[s] <= {s})
    altruistic = frozenset(range(n)) - selfish
    totally = frozenset(s for s in range(n) if m[s, s] <= support_tol)
    adj, _, plain = _adjusted(game, incoming_investment(m))
    argmax_adj = tuple(_argmax_set(adj[s], argmax_tol) for s in range(n))
    return Classification(beneficiaries, selfish, altruistic, totally, argmax_adj, _argmax_set(plain, argmax_tol))


@dataclass(frozen=True)
class SolveOptions:
    mode: str = "round_robin"
    damping: float = 0.5
    max_iter: int = 10000
    kkt_tol: float = KKT_TOL
    polish_tol: float = 1e-13
    min_damping: float = 1.0 / 64

    def __post_init__(self):
        if self.mode not in ("simultaneous", "round_robin"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not (0.0 < self.damping <= 1.0):
            raise ValueError(f"damping must lie in (0, 1], got {self.damping!r}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


@dataclass(frozen=True)
class Diagnostics:
    iterations: int
    damping: float
    displacement: float
    converged: bool
    mode: str


@dataclass(frozen=True)
class EquilibriumReport:
    game: FamilyGame
    profile: AllocationProfile
    certificate: KktCertificate
    classification: Classification
    diagnostics: Diagnostics

    @property
    def converged(self) -> bool:
        return self.diagnostics.converged


def _best_responses(game: FamilyGame, m: np.ndarray, hints: list) -> np.ndarray:
    incoming = m.sum(axis=0)
    out = np.empty_like(m)
    for s in range(game.n):
        br = water_fill(game, s, np.maximum(incoming - m[s], 0.0), hints[s])
        out[s], hints[s] = br.allocation, br.multiplier
    return out


def _sweep(game: FamilyGame, m: np.ndarray, hints: list) -> np.ndarray:
    m = m.copy()
    incoming = m.sum(axis=0)
    for s in range(game.n):
        external = np.maximum(incoming - m[s], 0.0)
        br = water_fill(game, s, external, hints[s])
        incoming = external + br.allocation
        m[s], hints[s] = br.allocation, br.multiplier
    return m


def solve_nash(game: FamilyGame, options: SolveOptions | None = None, **kwargs) -> EquilibriumReport:
    """Compute one Nash equilibrium by best-response iteration.

    Starts from the spend-on-self profile. ``round_robin`` replaces each
    source's row by its exact best response in index order;
    ``simultaneous`` moves all rows toward their best responses at once,
    ``x <- (1 - damping) x + damping BR(x)``, halving the damping whenever
    the complementarity residual grows.

    Iteration stops once the complementarity and budget residuals are
    within ``kkt_tol`` and a further step moves the profile by less than
    ``polish_tol``, or the profile stops moving, or ``max_iter`` is hit.
    Non-convergence is reported in the diagnostics, never raised.
    """
    if options is None:
        options = SolveOptions(**kwargs)
    elif kwargs:
        raise TypeError("pass either options or keyword arguments, not both")
    tol = options.kkt_tol
    gamma = options.damping
    m = np.diag(game.budgets).astype(float)
    cert = kkt_verify(game, m, tol)
    prev_comp = cert.complementarity
    displacement = math.inf
    hints = [None] * game.n
    it = 0
    while it < options.max_iter:
        if cert.complementarity <= tol and cert.budget <= tol and displacement <= options.polish_tol:
            break
        it += 1
        if options.mode == "round_robin":
            new = _sweep(game, m, hints)
        else:
            new = (1.0 - gamma) * m + gamma * _best_responses(game, m, hints)
        displacement = float(np.abs(new - m).max())
        m = new
        cert = kkt_verify(game, m, tol)
        if options.mode == "simultaneous" and cert.complementarity > prev_comp:
            gamma = max(0.5 * gamma, min(options.min_damping, options.damping))
        prev_comp = cert.complementarity
        if displacement == 0.0:
            break

    converged = cert.complementarity <= tol and cert.budget <= tol and cert.certified
    if not converged:
        log.warning(
            "best-response iteration did not certify after %d iterations "
            "(complementarity %.3g, budget %.3g, displacement %.3g)",
            it, cert.complementarity, cert.budget, displacement,
        )
    profile = AllocationProfile(m)
    return EquilibriumReport(
        game=game,
        profile=profile,
        certificate=cert,
        classification=classify(game, m),
        diagnostics=Diagnostics(it, gamma, displacement, converged, options.mode),
    )


@dataclass(frozen=True)
class InclusionCheck:
    status: str  # "pass", "fail" or "hypothesis not met"
    witnesses: tuple = ()

    @property
    def ok(self) -> bool:
        return self.status != "fail"


@dataclass(frozen=True)
class PropertyReport:
    beneficiaries_in_argmax: InclusionCheck
    argmax_plain_selfish: InclusionCheck
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.beneficiaries_in_argmax.ok and self.argmax_plain_selfish.ok


def check_support_inclusions(
    game: FamilyGame,
    report: EquilibriumReport,
    support_tol: float = SUPPORT_TOL,
    argmax_tol: float = ARGMAX_TOL,
) -> PropertyReport:
    """Check the two support inclusions that hold at every equilibrium.

    (i) every beneficiary of ``s`` has maximal adjusted marginal for ``s``;
    (ii) if all marginals are positive at the equilibrium and everybody is
    strictly more related to itself than to anyone else, the individuals
    of highest plain marginal are selfish. Witnesses are ``(s, t)`` pairs
    for (i) and individuals for (ii).
    """
    m = report.profile.matrix
    cls = classify(game, m, support_tol, argmax_tol)
    bad = tuple(
        (s, t)
        for s in range(game.n)
        for t in sorted(cls.beneficiaries[s] - cls.argmax_adjusted[s])
    )
    first = InclusionCheck("fail" if bad else "pass", bad)

    notes = []
    rel = game.relatedness
    off = ~np.eye(game.n, dtype=bool)
    strict = bool(np.all((rel.diagonal()[:, None] > rel)[off]))
    plain = np.array([f.derivative(v) for f, v in zip(game.fitness, incoming_investment(m))])
    positive = bool(np.all(plain > 0))
    if not strict:
        notes.append("relatedness is not strictly diagonal-dominant in every row")
    if not positive:
        notes.append("some personal-fitness marginal vanishes at the equilibrium")
    if strict and positive:
        bad2 = tuple(sorted(cls.argmax_plain - cls.selfish))
        second = InclusionCheck("fail" if bad2 else "pass", bad2)
    else:
        second = InclusionCheck("hypothesis not met")
    return PropertyReport(first, second, notes)


def best_response_values(game: FamilyGame, x) -> tuple[np.ndarray, np.ndarray]:
    """Current payoff of each source and the payoff of its best response."""
    m = as_matrix(x)
    incoming = m.sum(axis=0)
    current, best = np.zeros(game.n), np.zeros(game.n)
    for s in range(game.n):
        external = np.maximum(incoming - m[s], 0.0)
        current[s] = br_objective(game, s, external, m[s])
        best[s] = br_objective(game, s, external, water_fill(game, s, external).allocation)
    return current, best
