"""Box-search pricing: exact solver, brute-force oracle, dual plumbing."""

import numpy as np
import pytest

from boxpolicy.data import DataError, box_memberships, partition
from boxpolicy.master import MasterDuals, column_reduced_cost
from boxpolicy.pricing import (
    COEFF_EPSILON,
    PricingInstance,
    build_pricing,
    solve_pricing,
    solve_pricing_bruteforce,
)


def make_instance(points, coeff, lam=0.0, omega=0.0):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    coeff = np.asarray(coeff, dtype=float)
    values = []
    ranks = np.zeros(pts.shape, dtype=np.int32)
    for t in range(pts.shape[1]):
        vals = np.unique(pts[:, t])
        values.append(vals)
        ranks[:, t] = np.searchsorted(vals, pts[:, t])
    return PricingInstance(
        sample_ids=tuple(range(len(coeff))),
        coeff=coeff,
        points=pts,
        ranks=ranks,
        rank_values=tuple(values),
        lambda_=lam,
        omega=omega,
    )


class TestWorkedExamples:
    def test_one_dim_with_interior_penalty(self):
        """The middle penalty sample cannot be skipped once spanned."""
        inst = make_instance([0.0, 1.0, 2.0], [1.0, -0.5, 1.0], lam=0.2)
        sol = solve_pricing(inst)
        assert sol.objective == pytest.approx(1.3, abs=1e-12)
        assert sol.reduced_cost == pytest.approx(-1.3, abs=1e-12)
        assert sol.box is not None
        assert sol.box.lower == (0.0,) and sol.box.upper == (2.0,)
        assert sol.delta == (0, 1, 2)
        assert not sol.timed_out

        oracle = solve_pricing_bruteforce(inst, inst.points)
        assert oracle.objective == pytest.approx(1.3, abs=1e-12)
        assert oracle.box == sol.box

    def test_no_positive_coefficients(self):
        inst = make_instance([0.0, 1.0], [-1.0, -0.25], lam=0.7)
        for sol in (solve_pricing(inst), solve_pricing_bruteforce(inst, inst.points)):
            assert sol.objective == pytest.approx(-0.7, abs=1e-12)
            assert sol.reduced_cost == pytest.approx(0.7, abs=1e-12)
            assert sol.box is None
            assert sol.delta == ()

    def test_single_positive_sample(self):
        inst = make_instance([1.5], [0.5])
        sol = solve_pricing(inst)
        assert sol.objective == pytest.approx(0.5, abs=1e-12)
        assert sol.box.lower == (1.5,) and sol.box.upper == (1.5,)
        assert sol.delta == (0,)

    def test_empty_instance(self):
        inst = make_instance(np.zeros((0, 2)), [], lam=0.3, omega=0.1)
        for sol in (solve_pricing(inst), solve_pricing_bruteforce(inst, inst.points)):
            assert sol.objective == pytest.approx(-0.4, abs=1e-12)
            assert sol.box is None and sol.delta == ()

    def test_penalty_shifts_objective_additively(self):
        base = make_instance([0.0, 1.0, 2.0], [1.0, -0.5, 1.0], lam=0.2)
        raised = make_instance([0.0, 1.0, 2.0], [1.0, -0.5, 1.0], lam=0.5)
        penalized = make_instance([0.0, 1.0, 2.0], [1.0, -0.5, 1.0], lam=0.2, omega=0.3)
        b, r, p = solve_pricing(base), solve_pricing(raised), solve_pricing(penalized)
        assert r.objective == pytest.approx(b.objective - 0.3, abs=1e-12)
        assert p.objective == pytest.approx(b.objective - 0.3, abs=1e-12)
        assert b.box == r.box == p.box

    def test_time_budget_of_zero_returns_baseline(self):
        inst = make_instance([0.0, 1.0], [1.0, 1.0], lam=0.1)
        sol = solve_pricing(inst, time_limit=0.0)
        assert sol.timed_out
        assert sol.box is None
        assert sol.objective == pytest.approx(-0.1, abs=1e-12)

    def test_deterministic_across_repeat_solves(self):
        rng = np.random.default_rng(5)
        pts = rng.uniform(-1, 1, size=(10, 2))
        coeff = rng.choice([-1.0, 1.0], 10) * rng.uniform(0.2, 2.0, 10)
        inst = make_instance(pts, coeff, lam=0.1, omega=0.05)
        first = solve_pricing(inst)
        second = solve_pricing(inst)
        assert first.objective == second.objective
        assert first.delta == second.delta
        assert first.box == second.box


class TestBuildPricing:
    @staticmethod
    def four_block_setup():
        x = np.array([[0.0], [1.0], [2.0], [3.0]])
        t = np.array([1, -1, 1, -1])
        psi = np.array([1.0, 2.0, -1.0, -3.0])
        return x, partition(psi, t)

    def test_coefficient_signs_per_block(self):
        x, part = self.four_block_setup()
        duals = MasterDuals(
            mu1={0: 0.5},
            mu2={(1, 0): 0.3, (1, 1): 0.2},
            mu3={(2, 0): 0.1},
            mu4={3: 0.4},
            lam=0.05,
        )
        inst = build_pricing(duals, part, x, omega=0.02)
        assert inst.sample_ids == (0, 1, 2, 3)
        assert inst.coeff == pytest.approx([0.5, -0.5, -0.1, 0.4])
        assert inst.lambda_ == pytest.approx(0.05)
        assert inst.omega == pytest.approx(0.02)

    def test_all_zero_duals_make_empty_instance(self):
        x, part = self.four_block_setup()
        duals = MasterDuals(mu1={}, mu2={}, mu3={}, mu4={}, lam=0.0)
        inst = build_pricing(duals, part, x, omega=0.0)
        assert inst.n == 0
        sol = solve_pricing(inst)
        assert sol.objective == pytest.approx(0.0, abs=1e-12)
        assert sol.box is None

    def test_near_zero_aggregates_dropped(self):
        x, part = self.four_block_setup()
        duals = MasterDuals(
            mu1={0: 5e-13}, mu2={}, mu3={}, mu4={3: 0.4}, lam=0.0
        )
        inst = build_pricing(duals, part, x, omega=0.0)
        assert inst.sample_ids == (3,)
        assert inst.coeff == pytest.approx([0.4])

    def test_duplicate_coordinates_share_one_rank(self):
        x = np.array([[0.0, 5.0], [0.0, 7.0], [1.0, 5.0]])
        t = np.array([1, 1, 1])
        psi = np.array([1.0, 1.0, 1.0])
        part = partition(psi, t)
        duals = MasterDuals(
            mu1={0: 0.2, 1: 0.3, 2: 0.4}, mu2={}, mu3={}, mu4={}, lam=0.0
        )
        inst = build_pricing(duals, part, x, omega=0.0)
        assert [len(v) for v in inst.rank_values] == [2, 2]
        for t_dim in range(2):
            rebuilt = inst.rank_values[t_dim][inst.ranks[:, t_dim]]
            assert rebuilt == pytest.approx(inst.points[:, t_dim], abs=0.0)

    def test_rejects_near_zero_coefficients_directly(self):
        with pytest.raises(DataError, match="near-zero"):
            make_instance([0.0], [COEFF_EPSILON / 2])


class TestBruteForceGuard:
    def test_enumeration_count_two_dims_three_ranks(self):
        # six intervals per dimension, so exactly 36 combinations
        pts = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
        inst = make_instance(pts, [1.0, 1.0, 1.0])
        solve_pricing_bruteforce(inst, pts, guard=36)
        with pytest.raises(DataError, match="guard"):
            solve_pricing_bruteforce(inst, pts, guard=35)


def random_instance(rng):
    n = int(rng.integers(1, 13))
    d = int(rng.integers(1, 3))
    # duplicate coordinates now and then, to exercise shared ranks
    grid = rng.integers(0, 2) == 0
    if grid:
        pts = rng.integers(-2, 3, size=(n, d)).astype(float)
    else:
        pts = rng.uniform(-1.0, 1.0, size=(n, d))
    coeff = rng.choice([-1.0, 1.0], n) * rng.uniform(0.2, 2.0, n)
    lam = float(rng.choice([0.0, 0.1, 0.5]))
    omega = float(rng.choice([0.0, 0.2]))
    return make_instance(pts, coeff, lam=lam, omega=omega)


class TestOracleEquivalence:
    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(20240818)
        for _ in range(50):
            inst = random_instance(rng)
            fast = solve_pricing(inst)
            slow = solve_pricing_bruteforce(inst, inst.points)
            assert fast.objective == pytest.approx(slow.objective, abs=1e-9)

    def test_solution_feasibility_invariants(self):
        rng = np.random.default_rng(77)
        for _ in range(50):
            inst = random_instance(rng)
            sol = solve_pricing(inst)
            if sol.box is None:
                assert sol.delta == ()
                continue
            member = box_memberships([sol.box], inst.points)[0]
            chosen = np.zeros(inst.n, dtype=bool)
            local = {sid: k for k, sid in enumerate(inst.sample_ids)}
            for sid in sol.delta:
                chosen[local[sid]] = True
            # selected samples all lie inside, penalty samples inside are counted
            assert np.all(member[chosen])
            negative_inside = member & (inst.coeff < 0)
            assert np.all(chosen[negative_inside])
            # positive samples inside are always taken
            positive_inside = member & (inst.coeff > 0)
            assert np.all(chosen[positive_inside])
            # the box spans exactly the selected points
            sel_pts = inst.points[chosen]
            assert tuple(sel_pts.min(axis=0)) == sol.box.lower
            assert tuple(sel_pts.max(axis=0)) == sol.box.upper


class TestReducedCostConsistency:
    def test_against_dual_formula_on_random_partitions(self):
        rng = np.random.default_rng(333)
        for _ in range(40):
            n = int(rng.integers(4, 12))
            d = int(rng.integers(1, 3))
            x = rng.uniform(-1.0, 1.0, size=(n, d))
            t = rng.choice([-1, 1], n)
            psi = rng.choice([-1.0, 1.0], n) * rng.uniform(0.2, 2.0, n)
            part = partition(psi, t)
            mu1 = {i: float(rng.uniform(0, 1)) for i in part.treated_pos}
            mu2 = {}
            for i in part.control_pos:
                for j in range(int(rng.integers(1, 3))):
                    mu2[(i, j)] = float(rng.uniform(0, 0.5))
            mu3 = {}
            for i in part.treated_neg:
                for j in range(int(rng.integers(1, 3))):
                    mu3[(i, j)] = float(rng.uniform(0, 0.5))
            mu4 = {i: float(rng.uniform(0, 1)) for i in part.control_neg}
            lam = float(rng.uniform(0, 0.3))
            omega = float(rng.choice([0.0, 0.1]))
            duals = MasterDuals(mu1, mu2, mu3, mu4, lam)

            inst = build_pricing(duals, part, x, omega)
            sol = solve_pricing(inst)
            if sol.box is None:
                continue
            member = box_memberships([sol.box], x)[0]
            rc = column_reduced_cost(duals, part, member, omega)
            assert rc == pytest.approx(-sol.objective, abs=1e-9)


def test_backends_agree_bitwise():
    pytest.importorskip("boxpolicy._pricing_core")
    from boxpolicy import _pricing_core as core
    from boxpolicy import _pricing_py as pure

    rng = np.random.default_rng(424242)
    for _ in range(30):
        inst = random_instance(rng)
        args = (
            inst.ranks,
            inst.coeff,
            list(inst.rank_values),
            inst.lambda_,
            inst.omega,
            None,
        )
        res_pure = pure.search(*args)
        res_core = core.search(*args)
        assert res_pure[0] == res_core[0]
        assert res_pure[1] == res_core[1]  # objective, bit for bit
        assert list(res_pure[2]) == list(res_core[2])
        assert list(res_pure[3]) == list(res_core[3])
        assert list(res_pure[4]) == list(res_core[4])
