"""Top-level acceptance suite: ten gates, one verdict line each under -v.

Each test states one end-to-end claim about the stack and checks it at the
stated tolerance, reusing the exhaustive oracles and instance generators
from the unit-test modules. The two study gates (06 and 07) run real fits
on simulated cohorts and take minutes; everything else finishes in seconds.
Wall-clock budgets are asserted inside the tests that carry them.
"""

import json
import math
import time

import numpy as np
import pytest
from _oracles import enumerate_union_minimum, random_instance
from test_eval import OptimalOracle
from test_lp import GE, LE, brute_force_binary, lp_of, random_feasible_lp
from test_master import random_problem, recomputed_objective_and_xi
from test_pricing import make_instance
from test_pricing import random_instance as random_pricing_instance

from boxpolicy.bnp import BnPConfig, fit
from boxpolicy.cli import run
from boxpolicy.data import Dataset, Hyperbox, Policy
from boxpolicy.eval import (
    empirical_objective,
    policy_value_mc,
    rademacher_bound,
    regret,
)
from boxpolicy.lp import solve_binary, solve_lp
from boxpolicy.master import column_reduced_cost, solve_integer
from boxpolicy.nuisance import exact_nuisance
from boxpolicy.pricing import solve_pricing, solve_pricing_bruteforce
from boxpolicy.scores import ScoreVector, compute_scores
from boxpolicy.simgen import draw_covariates, generate, get_scenario


def test_criterion_01_fit_matches_exhaustive_enumeration():
    """fit equals brute-force search over spanned-box unions, 20 instances."""
    start = time.monotonic()
    rng = np.random.default_rng(20240901)
    for trial in range(20):
        dataset, scores = random_instance(rng)
        m_max = 1 + trial % 2
        result = fit(dataset, scores, BnPConfig(m_max=m_max))
        oracle = enumerate_union_minimum(dataset, scores, m_max)
        assert result.objective == pytest.approx(oracle, abs=1e-9), (
            f"trial {trial}: fit {result.objective!r} vs oracle {oracle!r}"
        )
        assert len(result.policy.boxes) <= m_max
    assert time.monotonic() - start < 60.0


def test_criterion_02_pricing_matches_bruteforce():
    """Interval search equals brute-force enumeration on 50 dual instances."""
    start = time.monotonic()
    rng = np.random.default_rng(20240902)
    for trial in range(50):
        inst = random_pricing_instance(rng)
        fast = solve_pricing(inst)
        slow = solve_pricing_bruteforce(inst, inst.points)
        assert fast.objective == pytest.approx(slow.objective, abs=1e-9), (
            f"trial {trial}: fast {fast.objective!r} vs slow {slow.objective!r}"
        )
        assert not fast.timed_out

    # worked one-dimensional instance: spanning all three samples nets 1.3
    worked = make_instance([0.0, 1.0, 2.0], [1.0, -0.5, 1.0], lam=0.2)
    sol = solve_pricing(worked)
    assert sol.objective == pytest.approx(1.3, abs=1e-9)
    assert sol.box is not None
    assert (sol.box.lower, sol.box.upper) == ((0.0,), (2.0,))
    assert time.monotonic() - start < 30.0


def test_criterion_03_mismatch_variables_settle_binary():
    """xi needs no integrality: at integral s it reproduces the indicators."""
    rng = np.random.default_rng(20240903)
    for trial in range(100):
        prob = random_problem(rng, with_cuts=trial % 3 == 0)
        integer = solve_integer(prob)
        assert np.all(np.abs(integer.xi - np.round(integer.xi)) <= 1e-6), (
            f"trial {trial}: xi strayed from binary"
        )
        _, mismatch = recomputed_objective_and_xi(prob, np.round(integer.s))
        assert np.array_equal(np.round(integer.xi), mismatch), (
            f"trial {trial}: rounded xi disagrees with recomputed indicators"
        )


def test_criterion_04_reduced_costs_consistent_at_every_optimum():
    """Working-set columns price out >= -1e-7 and the priced column matches."""
    checked = {"columns": 0, "priced": 0}

    def observer(prob, solution, pricing):
        duals = solution.duals
        assert duals is not None
        fixed = {j for j, _ in prob.cuts}
        for j in range(prob.n_boxes):
            if j in fixed:
                continue
            rc = column_reduced_cost(
                duals, prob.partition, prob.membership[j], prob.omega
            )
            assert rc >= -1e-7, f"column {j} prices at {rc!r}"
            checked["columns"] += 1
        if pricing.box is not None:
            dvec = np.zeros(prob.n_samples, dtype=bool)
            dvec[list(pricing.delta)] = True
            rc = column_reduced_cost(duals, prob.partition, dvec, prob.omega)
            assert rc == pytest.approx(-pricing.objective, abs=1e-9)
            checked["priced"] += 1

    rng = np.random.default_rng(20240904)
    for trial in range(20):
        dataset, scores = random_instance(rng)
        fit(dataset, scores, BnPConfig(m_max=1 + trial % 2), cg_observer=observer)
    assert checked["columns"] > 100 and checked["priced"] > 10


def test_criterion_05_lp_certificates_and_binary_enumeration():
    """Strong duality and slackness on 200 LPs; solve_binary vs enumeration."""
    rng = np.random.default_rng(20240905)
    for trial in range(200):
        lp = random_feasible_lp(rng)
        sol = solve_lp(lp)
        assert sol.status == "optimal", f"trial {trial} not solved"

        dual_obj = sum(d * row.rhs for d, row in zip(sol.row_duals, lp.rows))
        for (lo, hi), rc in zip(lp.var_bounds, sol.reduced_costs):
            dual_obj += rc * (lo if rc > 0 else hi)
        assert abs(sol.objective_value - dual_obj) < 1e-7, (
            f"trial {trial}: duality gap {sol.objective_value - dual_obj!r}"
        )
        for row, dual in zip(lp.rows, sol.row_duals):
            a_dot = sum(v * sol.x[j] for j, v in row.coeffs.items())
            assert abs(dual * (row.rhs - a_dot)) < 1e-7, (
                f"trial {trial}: slackness violated"
            )

    for trial in range(40):
        n_bin = int(rng.integers(1, 13))
        c = rng.normal(size=n_bin)
        rows = []
        for _ in range(int(rng.integers(1, 6))):
            k = int(rng.integers(1, n_bin + 1))
            js = rng.choice(n_bin, size=k, replace=False)
            coeffs = {int(j): float(rng.normal()) for j in js}
            sense = GE if rng.integers(0, 2) else LE
            slack = float(rng.uniform(0, 2))
            rows.append((coeffs, sense, -slack if sense == GE else slack))
        lp = lp_of(c, [(0.0, 1.0)] * n_bin, rows)
        want = brute_force_binary(lp, list(range(n_bin)))
        got = solve_binary(lp, range(n_bin))
        assert want is not None and got.status == "optimal"
        assert got.objective_value == pytest.approx(want, abs=1e-9), (
            f"binary trial {trial}"
        )


EVAL_SEED = 424242
M_GRID = (1, 3, 5, 10)


def test_criterion_06_objective_nested_and_regret_improves():
    """basic cohorts, n=1000: objective non-increasing in the box budget on
    every seed, and the 10-box policies beat the 1-box ones on mean regret."""
    start = time.monotonic()
    model = exact_nuisance("basic")
    mean_regret = {1: [], 10: []}
    for seed in range(5):
        train = generate("basic", 1000, seed)
        scores = compute_scores(train, model, "dr")
        previous = math.inf
        boxes = ()
        for m in M_GRID:
            result = fit(train, scores, BnPConfig(m_max=m), initial_boxes=boxes)
            assert result.objective <= previous + 1e-9, (
                f"seed {seed}: objective rose from {previous!r} at M={m}"
            )
            previous = result.objective
            boxes = result.policy.boxes
            if m in mean_regret:
                mean_regret[m].append(
                    regret(result.policy, "basic", n_mc=200_000, seed=EVAL_SEED)
                )
    assert np.mean(mean_regret[10]) < np.mean(mean_regret[1])
    assert time.monotonic() - start < 1800.0


def test_criterion_07_regret_trend_on_pooled_study():
    """regret4d, 250-sample draws from a 10,000-sample pool, 10 seeds: mean
    regret never rises across the budget grid by more than one pooled SE."""
    start = time.monotonic()
    pool = generate("regret4d", 10_000, seed=1000)
    model = exact_nuisance("regret4d")
    regrets = {m: [] for m in M_GRID}
    for seed in range(10):
        idx = np.random.default_rng(seed).choice(pool.n, size=250, replace=False)
        train = Dataset(x=pool.x[idx], t=pool.t[idx], y=pool.y[idx])
        scores = compute_scores(train, model, "dr")
        boxes = ()
        for m in M_GRID:
            result = fit(
                train,
                scores,
                BnPConfig(m_max=m, max_nodes=50, pricing_time_limit=180.0),
                initial_boxes=boxes,
            )
            boxes = result.policy.boxes
            regrets[m].append(
                regret(result.policy, "regret4d", n_mc=200_000, seed=EVAL_SEED)
            )
    for small, large in zip(M_GRID, M_GRID[1:]):
        a = np.asarray(regrets[small])
        b = np.asarray(regrets[large])
        pooled_se = math.sqrt((a.var(ddof=1) + b.var(ddof=1)) / len(a))
        assert b.mean() - a.mean() <= pooled_se, (
            f"mean regret rose from M={small} ({a.mean():.5f}) "
            f"to M={large} ({b.mean():.5f}) beyond one pooled SE {pooled_se:.5f}"
        )
    assert time.monotonic() - start < 7200.0


def test_criterion_08_analytic_golden_values():
    """Monte-Carlo values hit the closed-form targets; capacity bound exact."""
    sc = get_scenario("basic")
    xs = draw_covariates(sc, 1_000_000, seed=1)
    for decision, target in ((-1.0, 7.0 / 6.0), (1.0, 5.0 / 6.0)):
        draws = sc.mean(xs, decision * np.ones(len(xs)))
        se = draws.std(ddof=1) / math.sqrt(len(xs))
        policy = (
            Policy(boxes=())
            if decision < 0
            else Policy(boxes=(Hyperbox((-1.0, -1.0), (1.0, 1.0)),))
        )
        value = policy_value_mc(policy, "basic", n_mc=1_000_000, seed=1)
        assert abs(value - target) <= 3.0 * se, (
            f"decision {decision:+.0f}: value {value!r} vs {target!r} (se {se!r})"
        )

    assert regret(OptimalOracle("basic"), "basic", n_mc=100_000, seed=7) == 0.0
    simple4d_union = Policy(
        boxes=(
            Hyperbox((-1.0, 0.0, -1.0, -1.0), (0.0, 1.0, 1.0, 1.0)),
            Hyperbox((0.0, -1.0, -1.0, -1.0), (1.0, 0.0, 1.0, 1.0)),
        )
    )
    assert regret(simple4d_union, "simple4d", n_mc=100_000, seed=7) == 0.0

    assert rademacher_bound(2) == pytest.approx(
        2.0 * math.sqrt(1.0 + math.log(2.0)), abs=1e-4
    )


def _run_cli(argv, capsys):
    code = run(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_criterion_09_cli_reruns_are_byte_identical(tmp_path, capsys):
    """simulate, fit, and eval all reproduce their outputs bit for bit."""
    csv_a = tmp_path / "a.csv"
    csv_b = tmp_path / "b.csv"
    for out in (csv_a, csv_b):
        code, _, _ = _run_cli(
            ["simulate", "--scenario", "basic", "--n", "40", "--seed", "9",
             "--out", str(out)],
            capsys,
        )
        assert code == 0
    assert csv_a.read_bytes() == csv_b.read_bytes()

    pol_a = tmp_path / "a.json"
    pol_b = tmp_path / "b.json"
    for out in (pol_a, pol_b):
        code, _, _ = _run_cli(
            ["fit", "--data", str(csv_a), "--method", "dr",
             "--nuisance", "exact:basic", "--max-boxes", "2",
             "--out", str(out)],
            capsys,
        )
        assert code == 0
    assert pol_a.read_bytes() == pol_b.read_bytes()

    outputs = []
    for _ in range(2):
        code, out, _ = _run_cli(
            ["eval", "--policy", str(pol_a), "--scenario", "basic",
             "--mc", "20000", "--seed", "3"],
            capsys,
        )
        assert code == 0
        outputs.append(out)
    assert outputs[0] == outputs[1]
    json.loads(outputs[0])


def test_criterion_10_penalty_semantics():
    """Huge penalties empty the policy; zero penalty changes nothing; the
    penalized and unpenalized objectives differ by exactly omega per box."""
    # all-treated, all-positive scores pin every dual at or below psi_i / n,
    # so a penalty above their total keeps every candidate box priced out
    psi = np.array([0.8, 1.1, 0.4, 0.9])
    pinned = Dataset(
        x=np.array([[0.0], [1.0], [2.0], [3.0]]),
        t=np.ones(4, dtype=int),
        y=np.zeros(4),
    )
    pinned_scores = ScoreVector(psi=psi, kept=np.arange(4), method="dr")
    prohibitive = float(psi.sum()) / 4 + 0.5
    result = fit(pinned, pinned_scores, BnPConfig(m_max=2, omega=prohibitive))
    assert result.policy.boxes == ()
    assert result.columns_generated == 0
    assert result.objective == pytest.approx(float(psi.sum()) / 4, abs=1e-12)

    rng = np.random.default_rng(20240910)
    for trial in range(8):
        dataset, scores = random_instance(rng)
        huge = float(np.abs(scores.psi).sum()) + 1.0
        assert fit(dataset, scores, BnPConfig(m_max=2, omega=huge)).policy.boxes == ()

        plain = fit(dataset, scores, BnPConfig(m_max=2, omega=0.0))
        oracle = enumerate_union_minimum(dataset, scores, 2)
        assert plain.objective == pytest.approx(oracle, abs=1e-9)

        omega = 0.1 + 0.05 * trial
        penalized = fit(dataset, scores, BnPConfig(m_max=2, omega=omega))
        j_n = empirical_objective(penalized.policy, dataset, scores)
        assert penalized.objective == j_n + omega * len(penalized.policy.boxes)
