import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import instances, make_instance
from likefair.core import truthful_bids
from likefair.mechanisms import MechanismKind as K, RoundDistribution
from likefair.simulate import (
    SimulationConfig,
    compare_exact_empirical,
    pick,
    run_episode,
    simulate,
    splitmix64_at,
    splitmix64_many,
)

FIG1 = make_instance([[1, 1], [1, 1]])


def test_splitmix64_reference_values():
    # published first outputs of SplitMix64 with seed 0
    assert splitmix64_at(0, 0) == 0xE220A8397B1DCDAF
    assert splitmix64_at(0, 1) == 0x6E789E6AA1B965F4
    assert splitmix64_at(0, 2) == 0x06C45D188009454F


@given(st.integers(0, 2**64 - 1), st.lists(st.integers(0, 2**40), min_size=1, max_size=20))
def test_vectorised_generator_matches_scalar(seed, idx):
    got = splitmix64_many(seed, np.array(idx, dtype=np.uint64)).tolist()
    assert got == [splitmix64_at(seed, i) for i in idx]


def test_pick_is_exact_at_boundaries():
    d = RoundDistribution({0: Fraction(1, 3), 1: Fraction(2, 3)}, Fraction(0))
    cut = -((-(1 << 64)) // 3)  # ceil(2^64 / 3)
    assert pick(d, cut - 1) == 0
    assert pick(d, cut) == 1
    assert pick(d, 2**64 - 1) == 1
    assert pick(RoundDistribution({}, Fraction(1)), 123) is None


def test_single_agent_gets_everything():
    inst = make_instance([[1, Fraction(1, 2), 3]])
    stats = simulate(inst, SimulationConfig(seed=99, runs=500, kind=K.BALANCED_LIKE))
    assert stats.mean_utility(0) == Fraction(9, 2)
    assert stats.receipt_counts == ((500, 500, 500),)


def test_figure_tree_mean_utility():
    runs = 100_000
    stats = simulate(FIG1, SimulationConfig(seed=1, runs=runs, kind=K.BALANCED_LIKE))
    # every run hands each agent exactly one item, so the estimate is exact
    assert stats.mean_utility(0) == 1
    assert stats.utility_stderr(0) == 0


def test_weighted_like_frequency():
    inst = make_instance([[1], [1]], weights=[2, 1])
    runs = 100_000
    stats = simulate(inst, SimulationConfig(seed=5, runs=runs, kind=K.WEIGHTED_LIKE))
    se = math.sqrt((2 / 3) * (1 / 3) / runs)
    assert abs(float(stats.receipt_frequency(0, 0)) - 2 / 3) <= 3 * se


def test_determinism_and_worker_independence():
    inst = make_instance([[1, 1, 1], [1, 0, 1], [0, 1, 0]])
    cfg = SimulationConfig(seed=42, runs=3000, kind=K.BALANCED_LIKE)
    a = simulate(inst, cfg)
    assert a == simulate(inst, cfg)
    assert a == simulate(inst, SimulationConfig(seed=42, runs=3000, kind=K.BALANCED_LIKE, workers=3))
    assert a != simulate(inst, SimulationConfig(seed=43, runs=3000, kind=K.BALANCED_LIKE))


def test_episode_matches_batch_runs():
    inst = make_instance([[1, 1, 1, 1], [1, 0, 1, 1], [0, 1, 1, 1]], weights=[1, 2, 3])
    bids = truthful_bids(inst)
    for kind in K:
        batch = simulate(inst, SimulationConfig(seed=7, runs=1, kind=kind))
        ep = run_episode(inst, kind, bids, seed=7, run_index=0)
        for j in range(inst.n):
            for k in range(inst.m):
                assert batch.receipt_counts[j][k] == (1 if k in ep.bundles[j] else 0)


@settings(max_examples=30, deadline=None)
@given(instances(max_n=3, max_m=5), st.sampled_from(list(K)), st.integers(0, 2**32))
def test_round_frequencies_sum_to_one(inst, kind, seed):
    stats = simulate(inst, SimulationConfig(seed=seed, runs=50, kind=kind))
    for k in range(inst.m):
        total = sum(stats.receipt_frequency(j, k) for j in range(inst.n)) + stats.discard_frequency(k)
        assert total == 1


def test_utility_matrix_diagonal_matches_mean():
    inst = make_instance([[1, 2, 0], [1, 1, 1]], weights=[1, 3])
    stats = simulate(inst, SimulationConfig(seed=3, runs=400, kind=K.WEIGHTED_BALANCED_LIKE))
    M = stats.utility_matrix(inst)
    assert all(M[j][j] == stats.mean_utility(j) for j in range(inst.n))


def test_compare_flags_nothing_on_correct_engine():
    inst = make_instance([[1, 1, 1], [1, 0, 1], [0, 1, 0]])
    rep = compare_exact_empirical(inst, K.BALANCED_LIKE, None, SimulationConfig(seed=11, runs=200_000, kind=K.BALANCED_LIKE))
    assert not rep.any_flagged
    assert rep.utility_rows[0].exact == Fraction(9, 8)
    assert abs(float(rep.utility_rows[0].empirical) - 9 / 8) < 0.01


def test_compare_suppresses_flags_on_tiny_samples():
    inst = make_instance([[1, 1], [1, 1]])
    rep = compare_exact_empirical(inst, K.LIKE, None, SimulationConfig(seed=0, runs=1, kind=K.LIKE))
    assert not rep.flags_active and not rep.any_flagged
    assert rep.stats.runs == 1


def test_compare_detects_a_wrong_model(monkeypatch):
    # feed the comparison LIKE's exact numbers while sampling Weighted LIKE
    import likefair.simulate as sim
    from likefair.gametree import receipt_matrix

    inst = make_instance([[1], [1]], weights=[9, 1])
    monkeypatch.setattr(sim, "receipt_matrix", lambda i, k, b: receipt_matrix(i, K.LIKE, b))
    rep = compare_exact_empirical(inst, K.WEIGHTED_LIKE, None, SimulationConfig(seed=0, runs=5000, kind=K.WEIGHTED_LIKE))
    assert rep.any_flagged
    assert all(r.flagged for r in rep.receipt_rows)


def test_runs_must_be_positive():
    with pytest.raises(ValueError):
        SimulationConfig(seed=0, runs=0, kind=K.LIKE)


def test_csv_and_json_rendering():
    stats = simulate(FIG1, SimulationConfig(seed=0, runs=10, kind=K.LIKE))
    lines = stats.to_csv(FIG1).strip().split("\n")
    assert lines[0] == "agent,round,item,count,frequency,frequency_approx"
    assert len(lines) == 1 + FIG1.n * FIG1.m
    d = stats.to_dict(FIG1)
    assert d["runs"] == 10 and len(d["receipt_frequency"]) == 4
