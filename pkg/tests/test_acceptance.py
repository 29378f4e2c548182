"""Acceptance criteria, one test each.

Every test appends a ``[PASS]``/``[FAIL]`` line that is printed in the
terminal summary (and immediately, under ``-s``).
"""

import logging
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, PARENT_CHILD_EQ
from kinalloc import (
    FitnessFunction,
    FitnessKind,
    Pedigree,
    check_support_inclusions,
    fitness_marginal,
    kkt_verify,
    pedigree_to_relatedness,
    solve_nash,
    water_fill,
)
from kinalloc.best_response import br_objective
from kinalloc.oracle import GridSpec, grid_best_response, grid_nash_check, random_instance

pytestmark = pytest.mark.slow

log = logging.getLogger("acceptance")

N_KKT = 1000
TIME_LIMIT = 5.0
SUPPORT_TOL = 1e-9


def record(tag, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def instance(seed, max_n, **kw):
    n = int(np.random.default_rng(10_000 + seed).integers(1, max_n + 1))
    return random_instance(seed, n, **kw)


@pytest.fixture(scope="module")
def kkt_runs():
    runs = []
    for seed in range(N_KKT):
        game = instance(seed, 8)
        t0 = time.perf_counter()
        report = solve_nash(game)
        elapsed = time.perf_counter() - t0
        runs.append((seed, game, report, elapsed))
    return runs


def certified(runs):
    return [(seed, g, r) for seed, g, r, _ in runs if r.converged]


def test_ac01_kkt_certification(kkt_runs):
    failures = [(seed, r) for seed, _, r, _ in kkt_runs if not r.converged]
    for seed, r in failures:
        d = r.diagnostics
        log.error("seed %d not certified: iterations %d, residuals %s", seed, d.iterations, r.certificate.residuals)
    slow = [(seed, t) for seed, _, _, t in kkt_runs if t > TIME_LIMIT]
    worst = max(t for *_, t in kkt_runs)
    rate = 1 - len(failures) / len(kkt_runs)
    ok = rate >= 0.99 and not slow
    record(
        "AC1 KKT certification",
        ok,
        f"{len(kkt_runs) - len(failures)}/{len(kkt_runs)} certified ({rate:.1%}), slowest solve {worst:.2f} s",
    )
    assert ok, (failures[:5], slow)


def test_ac02_oracle_equivalence():
    spec = GridSpec(step=1e-2, epsilon=1e-3)
    checked, fails = 0, []
    for seed in range(200):
        game = instance(50_000 + seed, 3)
        report = solve_nash(game)
        if not report.converged:
            continue
        res = grid_nash_check(game, report.profile.matrix, spec)
        checked += 1
        if not res.passed:
            fails.append((seed, res.worst_gain))
    ok = not fails and checked > 0
    record("AC2 oracle equivalence", ok, f"{checked} certified profiles grid-checked, {len(fails)} failures")
    assert ok, fails


def test_ac03_beneficiaries_in_argmax(kkt_runs):
    bad = []
    runs = certified(kkt_runs)
    for seed, game, report in runs:
        prop = check_support_inclusions(game, report)
        if prop.beneficiaries_in_argmax.status != "pass":
            bad.append((seed, prop.beneficiaries_in_argmax.witnesses))
    ok = not bad
    record("AC3 beneficiaries within argmax adjusted marginal", ok, f"{len(runs)} profiles, {len(bad)} violations")
    assert ok, bad


def test_ac04_argmax_plain_selfish(kkt_runs):
    cases = [(seed, g, r) for seed, g, r in certified(kkt_runs)]
    for seed in range(300):
        for model in ("dominant", "symmetric"):
            game = instance(70_000 + seed, 8, relatedness_model=model)
            cases.append((seed, game, solve_nash(game)))
    applicable, bad = 0, []
    for seed, game, report in cases:
        if not report.converged:
            continue
        check = check_support_inclusions(game, report).argmax_plain_selfish
        if check.status == "hypothesis not met":
            continue
        applicable += 1
        if check.status != "pass":
            bad.append((seed, check.witnesses))
    ok = not bad and applicable > 0
    record("AC4 argmax plain marginal implies selfish", ok, f"{applicable} profiles meet the hypotheses, {len(bad)} violations")
    assert ok, bad


def test_ac05_best_response_vs_grid():
    rng = np.random.default_rng(5)
    spec = GridSpec(step=1e-2)
    worst, bad = math.inf, []
    for k in range(500):
        n = int(rng.integers(1, 5))
        game = random_instance(90_000 + k, n, budget_range=(0.1, 3.0))
        s = int(rng.integers(n))
        external = rng.uniform(0.0, 2.0, size=n)
        br = water_fill(game, s, external)
        value = br_objective(game, s, external, br.allocation)
        _, grid_value = grid_best_response(game, s, external, spec)
        margin = value - grid_value
        worst = min(worst, margin)
        if margin < -1e-4:
            bad.append((k, margin))
    ok = not bad
    record("AC5 water-filling vs grid best response", ok, f"500 problems, worst value - grid value = {worst:.3g}")
    assert ok, bad


def test_ac06_hand_equilibria(parent_child, altruist_parent):
    pc = solve_nash(parent_child).profile.matrix
    err = float(np.abs(pc - PARENT_CHILD_EQ).max())
    alt = solve_nash(altruist_parent)
    x_pp = float(alt.profile.matrix[0, 0])
    ok = err <= 1e-6 and x_pp <= SUPPORT_TOL and alt.converged
    record("AC6 hand-derived equilibria", ok, f"parent/child max error {err:.2g}, altruist x_pp = {x_pp:.2g}")
    assert ok


def _fd_cases(kind, rng):
    for _ in range(100):
        w = rng.uniform(0.1, 10.0)
        c = rng.uniform(0.1, 5.0)
        if kind is FitnessKind.LOG:
            yield FitnessFunction.log(w, c), rng.uniform(0.0, 10.0)
        elif kind is FitnessKind.POWER:
            yield FitnessFunction.power(w, rng.choice([0.0, c]), rng.uniform(0.2, 0.8)), rng.uniform(0.01, 10.0)
        elif kind is FitnessKind.SATEXP:
            # beyond a few scale lengths f' falls below the resolution of f
            yield FitnessFunction.satexp(w, c), rng.uniform(0.0, 8.0 * c)
        else:
            yield FitnessFunction.linear(w), rng.uniform(0.0, 10.0)


def _derivative_fd(f, x, h):
    if x >= 2 * h:
        return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) / (12 * h)
    # fourth-order one-sided stencil near the boundary
    return (-25 * f(x) + 48 * f(x + h) - 36 * f(x + 2 * h) + 16 * f(x + 3 * h) - 3 * f(x + 4 * h)) / (12 * h)


@pytest.mark.parametrize("kind", list(FitnessKind), ids=lambda k: k.value)
def test_ac07_finite_differences(kind):
    rng = np.random.default_rng(7)
    worst = 0.0
    for f, x in _fd_cases(kind, rng):
        h = 1e-3 * (x + f.c) if kind is not FitnessKind.LINEAR else 1e-3
        if kind is FitnessKind.POWER and f.c == 0.0:
            h = min(h, 0.25 * x)
        exact = fitness_marginal(f, x).value
        worst = max(worst, abs(_derivative_fd(f, x, h) - exact) / abs(exact))
    ok = worst <= 1e-6
    record(f"AC7 analytic marginal vs finite differences ({kind.value})", ok, f"100 points, worst relative error {worst:.2g}")
    assert ok


def test_ac08_pedigree_coefficients():
    ped = Pedigree.from_records(
        [
            {"id": "gm"}, {"id": "gf"},
            {"id": "mom", "mother": "gm", "father": "gf"},
            {"id": "aunt", "mother": "gm", "father": "gf"},
            {"id": "dad"}, {"id": "uncle_in_law"}, {"id": "other"},
            {"id": "kid1", "mother": "mom", "father": "dad"},
            {"id": "kid2", "mother": "mom", "father": "dad"},
            {"id": "half", "mother": "mom", "father": "other"},
            {"id": "cousin", "mother": "aunt", "father": "uncle_in_law"},
        ]
    )
    r = pedigree_to_relatedness(ped)
    at = lambda a, b: r[ped.ids.index(a), ped.ids.index(b)]  # noqa: E731
    expected = {
        ("mom", "kid1"): 0.5,
        ("kid1", "kid2"): 0.5,
        ("kid1", "half"): 0.25,
        ("gm", "kid1"): 0.25,
        ("kid1", "cousin"): 0.125,
    }
    worst = max(abs(at(a, b) - v) for (a, b), v in expected.items())
    ok = worst <= 1e-12
    record("AC8 pedigree coefficients", ok, f"5 relationships, worst error {worst:.2g}")
    assert ok


def test_ac09_budget_equality(kkt_runs):
    runs = certified(kkt_runs)
    worst = max(float(np.abs(r.profile.matrix.sum(axis=1) - g.budgets).max()) for _, g, r in runs)
    ok = worst <= 1e-8
    record("AC9 budget equality", ok, f"{len(runs)} profiles, worst row-sum error {worst:.2g}")
    assert ok


def test_ac10_row_scaling(kkt_runs):
    runs = certified(kkt_runs)[:200]
    checked, bad = 0, []
    for seed, game, report in runs:
        m = report.profile.matrix
        for s in range(game.n):
            for k in (0.5, 2.0, 10.0):
                rel = game.relatedness.copy()
                rel[s] *= k
                cert = kkt_verify(game.with_relatedness(rel), m)
                checked += 1
                if not cert.certified:
                    bad.append((seed, s, k, cert.residuals))
    ok = not bad
    record("AC10 row-scaling invariance", ok, f"{checked} scaled games, {len(bad)} lost certification")
    assert ok, bad[:5]
