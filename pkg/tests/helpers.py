import random
from fractions import Fraction

from hypothesis import strategies as st

from likefair.core import validate_instance
from likefair.mechanisms import MechanismKind

KINDS = list(MechanismKind)


def make_instance(utilities, weights=None, names=None):
    n = len(utilities)
    weights = weights if weights is not None else [1] * n
    names = names if names is not None else [str(j + 1) for j in range(n)]
    return validate_instance(
        {
            "agents": [{"name": a, "weight": Fraction(w)} for a, w in zip(names, weights)],
            "items": [f"F{k + 1}" for k in range(len(utilities[0]))],
            "utilities": [[Fraction(u) for u in row] for row in utilities],
        }
    )


def random_rational(rng, lo=1, hi=12):
    return Fraction(rng.randint(lo, hi), rng.randint(lo, hi))


def random_instance(rng: random.Random, *, n=(1, 4), m=(1, 8), binary=False, weights="rational",
                    like_prob=0.6):
    """Random instance; ``weights`` is "rational", "equal", "at_least_one" or a list."""
    n_agents = rng.randint(*n) if isinstance(n, tuple) else n
    m_items = rng.randint(*m) if isinstance(m, tuple) else m
    if weights == "rational":
        ws = [random_rational(rng) for _ in range(n_agents)]
    elif weights == "equal":
        w = random_rational(rng)
        ws = [w] * n_agents
    elif weights == "at_least_one":
        ws = [Fraction(1) + Fraction(rng.randint(0, 40), rng.randint(1, 8)) for _ in range(n_agents)]
    else:
        ws = list(weights)
    rows = []
    for _ in range(n_agents):
        row = []
        for _ in range(m_items):
            if rng.random() >= like_prob:
                row.append(Fraction(0))
            elif binary:
                row.append(Fraction(1))
            else:
                row.append(random_rational(rng, 1, 9))
        rows.append(row)
    return make_instance(rows, ws)


rationals = st.fractions(min_value=-10**6, max_value=10**6, max_denominator=10**6)
positive_weights = st.fractions(min_value=Fraction(1, 50), max_value=50, max_denominator=50).filter(lambda q: q > 0)


@st.composite
def instances(draw, max_n=3, max_m=5, binary=None, equal_weights=False):
    n = draw(st.integers(1, max_n))
    m = draw(st.integers(1, max_m))
    is_binary = draw(st.booleans()) if binary is None else binary
    util = st.sampled_from([0, 1]) if is_binary else st.fractions(0, 5, max_denominator=6)
    rows = [[draw(util) for _ in range(m)] for _ in range(n)]
    if equal_weights:
        w = draw(positive_weights)
        ws = [w] * n
    else:
        ws = [draw(positive_weights) for _ in range(n)]
    return make_instance(rows, ws)


@st.composite
def bid_matrices(draw, instance):
    return tuple(tuple(draw(st.booleans()) for _ in range(instance.m)) for _ in range(instance.n))
