import itertools
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from helpers import instances, make_instance, random_instance
from likefair.analysis import (
    SearchGuardExceeded,
    best_adaptive_response,
    check_bounded_ef_ex_post,
    check_ef_ex_ante,
    check_strategyproof,
    outcome_envy,
)
from likefair.core import truthful_bids, with_agent_bids
from likefair.gametree import agent_value, support_enumeration
from likefair.mechanisms import MechanismKind as K

THM3 = make_instance([[1, 1, 1], [1, 0, 1], [0, 1, 0]], names=["A", "B", "C"])
THM4 = make_instance([[Fraction(1, 2), Fraction(1, 2)], [Fraction(1, 4), Fraction(3, 4)]], names=["A", "B"])


def thm10(p):
    return make_instance([[0, p], [1, p - 1]])


def brute_force_adaptive(instance, kind, agent):
    """Best value over every deterministic history-dependent policy.

    Enumerates policies as maps from the full recipient history to a bid;
    only viable for tiny instances.
    """
    from likefair.core import AllocationState, bidders
    from likefair.mechanisms import round_distribution

    truth = truthful_bids(instance)
    m, n = instance.m, instance.n
    u = instance.utilities[agent]

    def value(k, history, counts):
        if k == m:
            return Fraction(0)
        best = None
        others = bidders(truth, k) - {agent}
        for bid in (False, True):
            d = round_distribution(kind, AllocationState(k, counts), others | ({agent} if bid else set()), instance.weights)
            total = Fraction(0)
            if d.discard_probability:
                total += value(k + 1, history + (None,), counts)
            for j, p in d.items():
                c = list(counts)
                c[j] += 1
                total += p * ((u[k] if j == agent else 0) + value(k + 1, history + (j,), tuple(c)))
            best = total if best is None else max(best, total)
        return best

    return value(0, (), (0,) * n)


# --- ex-ante envy ---------------------------------------------------------


def test_weighted_like_normalized_values_equal_on_shared_items():
    inst = make_instance([[1, 2, 0], [3, 1, 1]], weights=[Fraction(3, 2), Fraction(1, 3)])
    rep = check_ef_ex_ante(inst, K.WEIGHTED_LIKE)
    assert rep.holds
    # both agents bid for every item agent 0 values, so agent 0's envy toward 1 is exactly zero
    assert rep.envy[0][1] == 0
    assert all(rep.envy[i][i] == 0 for i in range(2))


@pytest.mark.parametrize("p", [Fraction(3), Fraction(7, 2), Fraction(10)])
def test_balanced_like_unbounded_ex_ante_envy(p):
    rep = check_ef_ex_ante(thm10(p), K.BALANCED_LIKE)
    assert not rep.holds
    assert rep.worst_pair == (1, 0)
    assert rep.envy[1][0] == p - 2


def test_single_agent_ex_ante_trivial():
    rep = check_ef_ex_ante(make_instance([[1, 0, 2]]), K.BALANCED_LIKE)
    assert rep.holds and rep.worst_pair is None


def test_weighted_balanced_ex_ante_counterexample_with_unequal_weights():
    # one item both like: the tie at (0, 0) gives each agent 1/2, so the heavier
    # agent's weight-normalized value for the other bundle is larger
    inst = make_instance([[1], [1]], weights=[1, 2])
    rep = check_ef_ex_ante(inst, K.WEIGHTED_BALANCED_LIKE)
    assert not rep.holds
    assert rep.envy[1][0] == Fraction(1, 4)


@settings(max_examples=80, deadline=None)
@given(instances(max_n=4, max_m=5))
def test_weighted_like_ex_ante_envy_free(inst):
    rep = check_ef_ex_ante(inst, K.WEIGHTED_LIKE)
    assert rep.holds


@settings(max_examples=80, deadline=None)
@given(instances(max_n=4, max_m=6, binary=True, equal_weights=True))
def test_balanced_like_binary_ex_ante_envy_free(inst):
    assert check_ef_ex_ante(inst, K.WEIGHTED_BALANCED_LIKE).holds
    assert check_ef_ex_ante(inst, K.BALANCED_LIKE).holds


# --- ex-post envy ---------------------------------------------------------


@pytest.mark.parametrize("m", [1, 3, 5])
def test_like_all_to_one_witness(m):
    inst = make_instance([[1] * m, [1] * m])
    rep = check_bounded_ef_ex_post(inst, K.LIKE, Fraction(m - 1))
    assert not rep.bound_holds
    assert rep.worst_envy == m
    assert rep.witness.probability == Fraction(1, 2**m)
    # the witness really has one agent holding every item
    assert {len(b) for b in rep.witness.bundles} == {0, m}
    pair, e = outcome_envy(inst, rep.witness)
    assert e == rep.worst_envy and pair == rep.witness_pair


def test_balanced_like_ex_post_envy_grows_with_p():
    for p in (3, 5, 11):
        rep = check_bounded_ef_ex_post(thm10(Fraction(p)), K.BALANCED_LIKE, Fraction(p - 3))
        assert not rep.bound_holds and rep.worst_envy == p - 2


def test_weighted_balanced_bound_one_figure_weights():
    inst = make_instance([[1, 1, 1, 0], [1, 1, 0, 1]], weights=[60, 40])
    rep = check_bounded_ef_ex_post(inst, K.WEIGHTED_BALANCED_LIKE, Fraction(1))
    assert rep.bound_holds and rep.violations == 0


def test_bound_one_fails_with_small_weights():
    # j's weight 1/2: one item in j's bundle is worth 2 after normalization
    inst = make_instance([[1], [1]], weights=[1, Fraction(1, 2)])
    rep = check_bounded_ef_ex_post(inst, K.WEIGHTED_BALANCED_LIKE, Fraction(1))
    assert not rep.bound_holds
    assert rep.worst_envy == 2


@settings(max_examples=60, deadline=None)
@given(instances(max_n=3, max_m=5, binary=True))
def test_weighted_balanced_ex_post_bound_is_inverse_weight(inst):
    bound = max(1 / w for w in inst.weights)
    rep = check_bounded_ef_ex_post(inst, K.WEIGHTED_BALANCED_LIKE, bound)
    assert rep.bound_holds
    if min(inst.weights) >= 1:
        assert check_bounded_ef_ex_post(inst, K.WEIGHTED_BALANCED_LIKE, Fraction(1)).bound_holds


def test_ex_post_worst_is_attained_by_witness():
    rng = random.Random(11)
    for _ in range(30):
        inst = random_instance(rng, n=(2, 3), m=(1, 4))
        rep = check_bounded_ef_ex_post(inst, K.LIKE, Fraction(0))
        outcomes = list(support_enumeration(inst, K.LIKE, truthful_bids(inst)))
        worst = max(outcome_envy(inst, o)[1] for o in outcomes)
        assert rep.worst_envy == worst
        assert outcome_envy(inst, rep.witness)[1] == worst


# --- strategy-proofness ---------------------------------------------------


def test_three_agent_manipulation_found():
    rep = check_strategyproof(THM3, K.BALANCED_LIKE, 0)
    assert rep.sincere_value == Fraction(9, 8)
    assert rep.best_value == Fraction(5, 4)
    assert rep.gain == Fraction(1, 8)
    assert rep.best_misreport == (False, True, True)
    assert not rep.strategyproof_for_agent


def test_two_agent_general_manipulation_found():
    rep = check_strategyproof(THM4, K.BALANCED_LIKE, 1)
    assert rep.gain == Fraction(1, 4)
    assert rep.best_misreport == (False, True)


def test_misreport_search_matches_direct_enumeration():
    inst = make_instance([[1, 0, 2, 1], [1, 1, 1, 0], [0, 1, 1, 1]])
    for agent in range(3):
        rep = check_strategyproof(inst, K.BALANCED_LIKE, agent)
        values = {
            vec: agent_value(inst, K.BALANCED_LIKE, with_agent_bids(truthful_bids(inst), agent, vec), agent)
            for vec in itertools.product((False, True), repeat=inst.m)
        }
        best = max(values.values())
        assert rep.best_value == best
        assert rep.best_misreport == min(v for v, x in values.items() if x == best)


def test_parallel_search_is_deterministic():
    inst = make_instance([[1, 1, 1, 1, 1], [1, 0, 1, 0, 1], [0, 1, 0, 1, 1]])
    serial = check_strategyproof(inst, K.BALANCED_LIKE, 0)
    parallel = check_strategyproof(inst, K.BALANCED_LIKE, 0, workers=3)
    assert serial == parallel


def test_truthful_tie_breaks_lexicographically():
    # agent values nothing: every vector ties at 0, the all-False vector wins
    inst = make_instance([[0, 0, 0], [1, 1, 1]])
    rep = check_strategyproof(inst, K.BALANCED_LIKE, 0)
    assert rep.gain == 0 and rep.best_misreport == (False, False, False)


def test_misreport_guard():
    inst = make_instance([[1] * 6, [1] * 6])
    with pytest.raises(SearchGuardExceeded):
        check_strategyproof(inst, K.LIKE, 0, max_items=5)


@settings(max_examples=40, deadline=None)
@given(instances(max_n=4, max_m=5), st.data())
def test_weighted_like_strategyproof(inst, data):
    agent = data.draw(st.integers(0, inst.n - 1))
    rep = check_strategyproof(inst, K.WEIGHTED_LIKE, agent)
    assert rep.gain == 0
    assert rep.best_value >= rep.sincere_value


@settings(max_examples=40, deadline=None)
@given(instances(max_n=2, max_m=6, binary=True).filter(lambda i: i.n == 2), st.integers(0, 1))
def test_weighted_balanced_two_agent_binary_strategyproof(inst, agent):
    assert check_strategyproof(inst, K.WEIGHTED_BALANCED_LIKE, agent).gain == 0


def test_figure_weights_strategyproof():
    rng = random.Random(3)
    for _ in range(20):
        inst = random_instance(rng, n=2, m=(1, 6), binary=True, weights=[60, 40])
        for agent in range(2):
            assert check_strategyproof(inst, K.WEIGHTED_BALANCED_LIKE, agent).gain == 0


# --- adaptive best response -----------------------------------------------


def test_adaptive_three_agent_value():
    res = best_adaptive_response(THM3, K.BALANCED_LIKE, 0)
    assert res.value == brute_force_adaptive(THM3, K.BALANCED_LIKE, 0) == Fraction(5, 4)
    assert res.policy[(0, (0, 0, 0))] is False


def test_adaptive_single_agent_takes_everything():
    inst = make_instance([[1, Fraction(2, 3), 0, 4]])
    res = best_adaptive_response(inst, K.BALANCED_LIKE, 0)
    assert res.value == sum(inst.utilities[0], Fraction(0))


@settings(max_examples=40, deadline=None)
@given(instances(max_n=3, max_m=4), st.data())
def test_adaptive_dominates_and_matches_brute_force(inst, data):
    agent = data.draw(st.integers(0, inst.n - 1))
    kind = data.draw(st.sampled_from(list(K)))
    res = best_adaptive_response(inst, kind, agent)
    rep = check_strategyproof(inst, kind, agent)
    assert res.value >= rep.best_value >= rep.sincere_value
    assert res.value == brute_force_adaptive(inst, kind, agent)
    if kind.history_independent:
        # rounds are independent, bidding truthfully is optimal everywhere
        assert res.value == rep.sincere_value


def test_adaptive_state_guard():
    inst = make_instance([[1] * 6, [1] * 6, [1] * 6])
    with pytest.raises(SearchGuardExceeded):
        best_adaptive_response(inst, K.BALANCED_LIKE, 0, max_states=5)
