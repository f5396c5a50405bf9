import itertools

import numpy as np
import pytest

from boxpolicy.lp import (
    EQ,
    GE,
    LE,
    LinearProgram,
    Row,
    TimeBudgetError,
    solve_binary,
    solve_lp,
)


def lp_of(objective, bounds, rows):
    return LinearProgram(
        objective=tuple(objective),
        var_bounds=tuple(bounds),
        rows=tuple(Row(dict(c), s, r) for c, s, r in rows),
    )


class TestSolveLp:
    def test_bound_active_optimum(self):
        sol = solve_lp(lp_of([-1.0], [(0.0, 1.0)], []))
        assert sol.status == "optimal"
        assert sol.x[0] == pytest.approx(1.0)
        assert sol.objective_value == pytest.approx(-1.0)

    def test_two_variable_hand_example(self):
        sol = solve_lp(
            lp_of([-1.0, -1.0], [(0.0, 1.0), (0.0, 1.0)], [({0: 1.0, 1: 1.0}, LE, 1.0)])
        )
        assert sol.status == "optimal"
        assert sol.objective_value == pytest.approx(-1.0)
        assert sol.row_duals[0] == pytest.approx(-1.0)

    def test_contradictory_rows_infeasible(self):
        sol = solve_lp(
            lp_of([1.0], [(-10.0, 10.0)], [({0: 1.0}, GE, 2.0), ({0: 1.0}, LE, 1.0)])
        )
        assert sol.status == "infeasible"
        assert sol.x is None

    def test_equality_row_dual(self):
        sol = solve_lp(lp_of([1.0], [(0.0, 10.0)], [({0: 1.0}, EQ, 3.0)]))
        assert sol.status == "optimal"
        assert sol.x[0] == pytest.approx(3.0)
        assert sol.row_duals[0] == pytest.approx(1.0)

    def test_ge_row_dual_is_nonnegative(self):
        sol = solve_lp(lp_of([1.0], [(0.0, 10.0)], [({0: 1.0}, GE, 2.0)]))
        assert sol.row_duals[0] == pytest.approx(1.0)
        assert sol.row_duals[0] >= 0


def random_feasible_lp(rng, max_vars=30, max_rows=30):
    n = rng.integers(1, max_vars + 1)
    m = rng.integers(0, max_rows + 1)
    lo = rng.uniform(-2, 0, n)
    hi = lo + rng.uniform(0.1, 3, n)
    x0 = lo + (hi - lo) * rng.random(n)
    c = rng.normal(size=n)
    rows = []
    for _ in range(m):
        k = rng.integers(1, min(n, 5) + 1)
        js = rng.choice(n, size=k, replace=False)
        coeffs = {int(j): float(rng.normal()) for j in js}
        a_dot = sum(v * x0[j] for j, v in coeffs.items())
        sense = rng.choice([GE, LE, EQ], p=[0.4, 0.4, 0.2])
        if sense == GE:
            rhs = a_dot - rng.uniform(0, 1)
        elif sense == LE:
            rhs = a_dot + rng.uniform(0, 1)
        else:
            rhs = a_dot
        rows.append((coeffs, sense, float(rhs)))
    return lp_of(c, list(zip(lo, hi)), rows)


class TestLpCertificates:
    def test_strong_duality_complementary_slackness(self):
        rng = np.random.default_rng(2024)
        solved = 0
        for _ in range(200):
            lp = random_feasible_lp(rng)
            sol = solve_lp(lp)
            assert sol.status == "optimal"
            solved += 1

            x = sol.x
            # primal feasibility
            for (lo, hi), xj in zip(lp.var_bounds, x):
                assert lo - 1e-7 <= xj <= hi + 1e-7
            for row, dual in zip(lp.rows, sol.row_duals):
                a_dot = sum(v * x[j] for j, v in row.coeffs.items())
                if row.sense == GE:
                    assert a_dot >= row.rhs - 1e-7
                    assert dual >= -1e-9
                elif row.sense == LE:
                    assert a_dot <= row.rhs + 1e-7
                    assert dual <= 1e-9
                # complementary slackness
                assert abs(dual * (row.rhs - a_dot)) < 1e-7

            # strong duality using bound multipliers
            dual_obj = sum(d * row.rhs for d, row in zip(sol.row_duals, lp.rows))
            for (lo, hi), rc in zip(lp.var_bounds, sol.reduced_costs):
                if rc > 0:
                    dual_obj += rc * lo
                else:
                    dual_obj += rc * hi
            assert abs(sol.objective_value - dual_obj) < 1e-7

            # interior variables have zero reduced cost
            for (lo, hi), xj, rc in zip(lp.var_bounds, x, sol.reduced_costs):
                if lo + 1e-6 < xj < hi - 1e-6:
                    assert abs(rc) < 1e-7
        assert solved == 200


def brute_force_binary(lp, int_vars):
    """Enumerate every 0/1 assignment; solve the continuous rest (if any)."""
    pure = len(int_vars) == lp.n_vars
    best = None
    for bits in itertools.product((0.0, 1.0), repeat=len(int_vars)):
        if pure:
            ok = True
            for row in lp.rows:
                a_dot = sum(v * bits[j] for j, v in row.coeffs.items())
                if row.sense == GE and a_dot < row.rhs - 1e-9:
                    ok = False
                elif row.sense == LE and a_dot > row.rhs + 1e-9:
                    ok = False
                elif row.sense == EQ and abs(a_dot - row.rhs) > 1e-9:
                    ok = False
                if not ok:
                    break
            if not ok:
                continue
            value = sum(c * b for c, b in zip(lp.objective, bits))
        else:
            bounds = list(lp.var_bounds)
            for j, b in zip(int_vars, bits):
                bounds[j] = (b, b)
            sol = solve_lp(LinearProgram(lp.objective, tuple(bounds), lp.rows))
            if sol.status != "optimal":
                continue
            value = sol.objective_value
        if best is None or value < best - 1e-12:
            best = value
    return best


class TestSolveBinary:
    def test_integral_relaxation_shortcut(self):
        lp = lp_of([1.0, 1.0], [(0.0, 1.0), (0.0, 1.0)], [({0: 1.0}, GE, 1.0)])
        sol = solve_binary(lp, [0, 1])
        assert sol.status == "optimal"
        assert sol.objective_value == pytest.approx(1.0)
        assert not sol.timed_out

    def test_one_of_two(self):
        lp = lp_of(
            [-1.0, -1.0], [(0.0, 1.0), (0.0, 1.0)], [({0: 1.0, 1: 1.0}, LE, 1.0)]
        )
        sol = solve_binary(lp, [0, 1])
        assert sol.objective_value == pytest.approx(-1.0)
        assert sorted(round(v) for v in sol.x) == [0, 1]

    def test_contradictory_fixings_infeasible(self):
        lp = lp_of([1.0], [(0.0, 1.0)], [({0: 1.0}, LE, 0.0), ({0: 1.0}, GE, 1.0)])
        sol = solve_binary(lp, [0])
        assert sol.status == "infeasible"

    def test_fractional_relaxation_gets_branched(self):
        # relaxation puts x at 0.5; binaries must round somewhere
        lp = lp_of(
            [1.0, 1.0],
            [(0.0, 1.0), (0.0, 1.0)],
            [({0: 2.0, 1: 2.0}, GE, 1.0)],
        )
        sol = solve_binary(lp, [0, 1])
        assert sol.objective_value == pytest.approx(1.0)

    def test_matches_enumeration_on_random_instances(self):
        rng = np.random.default_rng(99)
        for trial in range(40):
            n_bin = int(rng.integers(1, 13))
            n_cont = int(rng.integers(0, 3)) if n_bin <= 7 else 0
            n = n_bin + n_cont
            c = rng.normal(size=n)
            bounds = [(0.0, 1.0)] * n_bin + [(-1.0, 1.0)] * n_cont
            rows = []
            for _ in range(int(rng.integers(1, 6))):
                k = int(rng.integers(1, n + 1))
                js = rng.choice(n, size=k, replace=False)
                coeffs = {int(j): float(rng.normal()) for j in js}
                sense = rng.choice([GE, LE])
                # rhs chosen so the all-zeros point stays feasible
                slack = float(rng.uniform(0, 2))
                rhs = -slack if sense == GE else slack
                rows.append((coeffs, sense, rhs))
            lp = lp_of(c, bounds, rows)
            want = brute_force_binary(lp, list(range(n_bin)))
            got = solve_binary(lp, range(n_bin))
            assert want is not None and got.status == "optimal"
            assert got.objective_value == pytest.approx(want, abs=1e-9)

    def test_time_budget_error_without_incumbent(self):
        rng = np.random.default_rng(5)
        n = 16
        c = -np.ones(n)
        rows = [({j: 1.0 for j in range(n)}, LE, n / 2 + 0.25)]
        lp = lp_of(c, [(0.0, 1.0)] * n, rows)
        with pytest.raises(TimeBudgetError):
            solve_binary(lp, range(n), time_limit=0.0)
