import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from inkstream.formula import Interpretation, KnowledgeBase, Signature, eval2, parse_formula, parse_kb
from inkstream.measures import (
    ETA_MAX_ATOMS, MEASURES, ContradictionPresent, eta_distribution, evaluate, format_value, i_c,
    i_c_bruteforce, i_eta, i_hs, i_hs_bruteforce, i_mi, i_mi_c, min_consistent_partition, min_hitting_set,
)
from inkstream.mus import free_formulas
from inkstream.sat import SignatureTooLarge

from kbgen import random_kb

K1 = parse_kb("a\nb | c\n!a & !b\nd\n")
K2 = parse_kb("a\n!a\nb\n!b\n")
K3 = parse_kb("a & b & c\n!a & !b & !c\na & !b\n")
PARITY = parse_kb(
    "a\nb\nc\n"
    "a & !b | !a & b\n"
    "a & !c | !a & c\n"
    "b & !c | !b & c\n"
    "(a & !b | !a & b) & !c | !(a & !b | !a & b) & c\n"
)


def eta_reference(kb):
    """I_eta from scipy's LP over all interpretations."""
    sig = kb.signature
    worlds = list(Interpretation.all(sig))
    n = len(worlds)
    # variables: P(w) for every world, then xi; maximize xi
    c = np.zeros(n + 1)
    c[-1] = -1
    A_ub = [[-(1.0 if eval2(w, f) else 0.0) for w in worlds] + [1.0] for f in kb]
    res = linprog(c, A_ub=A_ub or None, b_ub=[0.0] * len(kb) or None,
                  A_eq=[[1.0] * n + [0.0]], b_eq=[1.0], bounds=[(0, None)] * n + [(0, 1)], method="highs")
    return 1 - res.x[-1]


# --- small fixed examples ----------------------------------------------------

def test_mi_measures():
    assert i_mi(K1) == 1 and i_mi_c(K1) == Fraction(1, 2)
    assert i_mi(K2) == 2 and i_mi_c(K2) == 1


def test_contension_values():
    assert i_c(K2) == 2
    # a=B, b=F, c=T, d=T designates every formula of K1
    assert i_c(K1) == 1 == i_c_bruteforce(K1)


def test_eta_values():
    assert i_eta(K1) == 0.5 and i_eta(K2) == 0.5
    assert i_eta(parse_kb("a\n!a\n")) == 0.5
    assert i_eta(parse_kb("a\nb\n!a | !b\n")) == pytest.approx(1 / 3, abs=1e-9)


def test_hitting_set_values():
    assert i_hs(K1) == 1 and i_hs(K2) == 1 and i_hs(K3) == 2
    assert i_hs(parse_kb("a & b & c\n!a & !b & !c\n")) == 1
    assert i_hs(parse_kb("a & b\n!a & b\na & !b\n")) == 2


def test_consistent_kb_scores_zero_everywhere():
    kb = parse_kb("a | b\n!a\nc\n")
    for name, measure in MEASURES.items():
        assert measure(kb) == 0, name


def test_empty_kb():
    kb = KnowledgeBase([])
    for name, measure in MEASURES.items():
        assert measure(kb) == 0, name


def test_contradictory_formula():
    kb = parse_kb("a\nfalse\n")
    assert i_hs(kb) == math.inf and i_hs_bruteforce(kb) == math.inf
    assert i_c(kb) == math.inf and i_c_bruteforce(kb) == math.inf
    assert i_mi(kb) == 1
    with pytest.raises(ContradictionPresent):
        min_consistent_partition(kb)
    # an unsatisfiable formula with atoms also has no hitting set
    assert i_hs(parse_kb("b\na & !a\n")) == math.inf


def test_witnesses():
    hs = min_hitting_set(K3)
    assert len(hs) == 3 and hs.hits(K3)
    part = min_consistent_partition(K3)
    assert len(part) == 3 and part.is_partition_of(K3) and part.is_consistent(K3)
    xi, p = eta_distribution(K2)
    assert xi == pytest.approx(0.5)
    assert all(p.prob(f) >= xi - 1e-9 for f in K2)
    assert sum(p.weights.values()) == pytest.approx(1)


def test_eta_signature_guard():
    kb = KnowledgeBase([parse_formula(" & ".join(f"x{i}" for i in range(ETA_MAX_ATOMS + 1)))])
    with pytest.raises(SignatureTooLarge):
        i_eta(kb)


def test_bruteforce_hs_guard():
    kb = KnowledgeBase([parse_formula(f"x{i}") for i in range(14)])
    with pytest.raises(ValueError):
        i_hs_bruteforce(kb)


def test_evaluate_dispatch():
    assert evaluate("mic", K1) == Fraction(1, 2)
    with pytest.raises(KeyError):
        evaluate("nope", K1)


def test_format_value():
    assert format_value(math.inf) == "inf"
    assert format_value(3) == "3"
    assert format_value(Fraction(1, 2)) == "0.5"
    assert format_value(Fraction(2, 1)) == "2"
    assert format_value(0.25) == "0.25"


# --- counterexamples to general claims ---------------------------------------

def test_parity_kb_breaks_strict_lower_eta_bound():
    # every non-zero interpretation satisfies exactly 4 of the 7 parity formulas
    assert i_hs(PARITY) == 2 == i_hs_bruteforce(PARITY)
    assert i_eta(PARITY) == pytest.approx(3 / 7, abs=1e-9)
    assert not (1 - 1 / i_hs(PARITY) < i_eta(PARITY))
    # ordering by eta does not imply ordering by hs
    pair = parse_kb("a\n!a\n")
    assert i_eta(PARITY) <= i_eta(pair) and i_hs(PARITY) > i_hs(pair)


def test_mi_measures_violate_dominance():
    kb = parse_kb("x & y\n!x | !a\n!y | !a\n")
    alpha, beta = parse_formula("a & !x & !y"), parse_formula("a")
    assert i_mi(kb.with_formula(alpha)) == 1 < i_mi(kb.with_formula(beta)) == 2
    assert i_mi_c(kb.with_formula(alpha)) < i_mi_c(kb.with_formula(beta))
    # the remaining measures respect it on this instance
    for measure in (i_c, i_hs, i_eta):
        assert measure(kb.with_formula(alpha)) >= measure(kb.with_formula(beta))


def test_contension_violates_free_formula_independence():
    kb = parse_kb("a\n!b & b & !a\n")
    assert free_formulas(kb) == {0}
    assert i_c(kb) == 2 == i_c_bruteforce(kb)
    assert i_c(kb.without(0)) == 1 == i_c_bruteforce(kb.without(0))


# --- oracle agreement --------------------------------------------------------

@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_hs_matches_bruteforce(seed):
    kb = random_kb(random.Random(seed), max_atoms=6, max_formulas=7)
    assert i_hs(kb) == i_hs_bruteforce(kb)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**6))
def test_contension_matches_bruteforce(seed):
    kb = random_kb(random.Random(seed), max_atoms=6, max_formulas=7)
    assert i_c(kb) == i_c_bruteforce(kb)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10**6))
def test_eta_matches_scipy(seed):
    kb = random_kb(random.Random(seed), max_atoms=5, max_formulas=6)
    assert i_eta(kb) == pytest.approx(eta_reference(kb), abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**6))
def test_partition_size_is_hitting_set_size(seed):
    kb = random_kb(random.Random(seed), max_atoms=6, max_formulas=7, satisfiable=True)
    part = min_consistent_partition(kb)
    hs = min_hitting_set(kb)
    assert len(part) == len(hs) == i_hs(kb) + 1
    assert part.is_partition_of(kb) and part.is_consistent(kb) and hs.hits(kb)
