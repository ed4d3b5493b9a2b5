import itertools

import numpy as np
import pytest
from hypothesis import given, settings

from cipshare.core import Instance, dual_objective, induce_cost_shares, is_dual_feasible, pathological_instance
from cipshare.exact import kc_lp_exact, solve_ip_exact
from cipshare.kclp import (
    IterationLimit, RestrictedMaster, ScaleOverflow, column_generation_solve, kc_violation, naive_lp,
    naive_lp_value, separate_heuristic, separate_user, solve_restricted_master, threshold_candidates,
)
from instances import instances, random_instance


def brute_force_violation(inst, j, x):
    best = max(kc_violation(inst, j, S, x)
               for r in range(inst.n + 1) for S in itertools.combinations(range(inst.n), r))
    return max(best, 0.0)


def test_pathological_values():
    inst = pathological_instance()
    assert naive_lp_value(inst) == pytest.approx(0.11, abs=1e-9)
    res = column_generation_solve(inst)
    assert res.converged and res.objective == pytest.approx(1.0, abs=1e-9)
    assert dual_objective(inst, res.dual) == pytest.approx(1.0, abs=1e-9)


def test_naive_lp_point():
    value, x = naive_lp(pathological_instance())
    assert x.tolist() == pytest.approx([1.0, 0.1])
    assert naive_lp(pathological_instance(), [])[0] == 0.0


def test_master_deduplicates_and_skips_covered_sets():
    inst = pathological_instance()
    master = RestrictedMaster(inst, [0])
    assert master.add_cut(0, ())
    assert not master.add_cut(0, ())
    assert not master.add_cut(0, [1])  # residual requirement is zero
    with pytest.raises(ValueError):
        solve_restricted_master(RestrictedMaster(inst, [0]))
    x, y, obj = solve_restricted_master(master)
    # only 9 x_a + 10 x_b >= 10 with x unbounded above: x_a = 10/9
    assert obj == pytest.approx(1 / 90) and x.tolist() == pytest.approx([10 / 9, 0.0])
    assert y.tolist() == pytest.approx([0.01 / 9])


def test_threshold_candidates_are_nested():
    inst = Instance([1, 1, 1], [2], [[1], [1], [1]])
    sets = threshold_candidates(inst, 0, np.array([0.9, 0.2, 0.9]))
    assert sets == [frozenset(), frozenset({0, 2}), frozenset({0, 1, 2})]


@pytest.mark.parametrize("seed", range(15))
@pytest.mark.parametrize("method", ["enumerate", "dp"])
def test_separation_finds_most_violated(seed, method):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, int(rng.integers(2, 8)), 1, integer=method == "dp")
    x = rng.uniform(0, 1, inst.n) * (rng.uniform(size=inst.n) < 0.7)
    res = separate_user(inst, 0, x, scale=1, method=method)
    truth = brute_force_violation(inst, 0, x)
    assert res.violation == pytest.approx(truth, abs=1e-9)
    if res.subset is not None:
        assert kc_violation(inst, 0, res.subset, x) == pytest.approx(res.violation)


def test_separation_guards():
    inst = Instance([1.0], [100.0], [[200.0]])
    with pytest.raises(ScaleOverflow):
        separate_user(inst, 0, [0.1], scale=1000, max_states=10, method="dp")
    with pytest.raises(ValueError):
        separate_user(inst, 0, [-1.0])
    with pytest.raises(ValueError):
        separate_user(inst, 0, [0.1], method="magic")
    assert separate_heuristic(inst, 0, [1.0]).subset is None


def test_round_cap():
    rng = np.random.default_rng(7)
    inst = random_instance(rng, 10, 3)
    with pytest.raises(IterationLimit):
        column_generation_solve(inst, max_rounds=1, strict=True)
    res = column_generation_solve(inst, max_rounds=1)
    assert not res.converged and is_dual_feasible(inst, res.dual)


@settings(max_examples=40, deadline=None)
@given(inst=instances(max_n=7, max_m=3))
def test_column_generation_sandwich_and_share_identity(inst):
    res = column_generation_solve(inst)
    assert res.converged
    kc = kc_lp_exact(inst)[0]
    assert res.objective == pytest.approx(kc, abs=1e-6)
    assert naive_lp_value(inst) <= res.objective + 1e-6 <= solve_ip_exact(inst).cost + 2e-6
    shares = induce_cost_shares(inst, res.dual)
    assert shares.total == pytest.approx(res.objective, abs=1e-7)


def test_cut_log_written(tmp_path):
    path = tmp_path / "cuts.txt"
    res = column_generation_solve(pathological_instance(), cut_log_path=path)
    lines = path.read_text().splitlines()
    assert len(lines) == len(res.cut_log) >= 1
    assert lines[0].startswith("(1, 0, {")


def test_subset_of_users():
    rng = np.random.default_rng(11)
    inst = random_instance(rng, 6, 4)
    res = column_generation_solve(inst, [1, 3])
    assert res.dual.users() <= {1, 3}
    assert res.objective == pytest.approx(kc_lp_exact(inst, [1, 3])[0], abs=1e-6)
