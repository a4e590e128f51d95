"""Exact inconsistency measures and brute-force reference implementations.

Values are plain numbers: ``i_mi``, ``i_c`` and ``i_hs`` return ints,
``i_mi_c`` a :class:`~fractions.Fraction` and ``i_eta`` a float.  ``i_hs``
(and ``i_c`` for knowledge bases mentioning ``false``) return ``math.inf``
when a formula has no model at all.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Union

import numpy as np

from . import sat
from .formula import (
    FALSE,
    And,
    Atom,
    Contradiction,
    Formula,
    Interpretation,
    KnowledgeBase,
    Not,
    Or,
    Signature,
    compile2,
    compile3,
)
from .lp import simplex_max
from .mus import MISet, enumerate_mi
from .sat import SignatureTooLarge

Value = Union[int, float, Fraction]

ETA_MAX_ATOMS = 12
BRUTE_MAX_ATOMS = 10
BRUTE_HS_MAX_FORMULAS = 12


class ContradictionPresent(ValueError):
    code = "CONTRADICTION_PRESENT"


class MeasureTimeout(RuntimeError):
    """An exact measure could not finish within its time or solver budget."""


class _Deadline:
    def __init__(self, seconds: Optional[float]):
        self.at = None if seconds is None else time.monotonic() + seconds

    def check(self) -> None:
        if self.at is not None and time.monotonic() > self.at:
            raise MeasureTimeout("time budget exhausted")


# ---------------------------------------------------------------------------
# Witness structures


@dataclass(frozen=True)
class HittingSet:
    interpretations: frozenset[Interpretation]

    def __len__(self) -> int:
        return len(self.interpretations)

    def hits(self, kb: KnowledgeBase) -> bool:
        return all(
            any(compile2(f, w.signature)(w.bits) for w in self.interpretations) for f in kb
        )


@dataclass(frozen=True)
class Partitioning:
    blocks: tuple[frozenset[int], ...]

    def __len__(self) -> int:
        return len(self.blocks)

    def is_partition_of(self, kb: KnowledgeBase) -> bool:
        seen: set[int] = set()
        for b in self.blocks:
            if seen & b:
                return False
            seen |= b
        return seen == set(range(len(kb)))

    def is_consistent(self, kb: KnowledgeBase) -> bool:
        return all(sat.is_consistent([kb[i] for i in b]) for b in self.blocks)


@dataclass(frozen=True)
class ProbabilityFunction:
    signature: Signature
    weights: dict[int, float]  # interpretation bits -> probability

    def prob(self, f: Formula) -> float:
        ev = compile2(f, self.signature)
        return sum(p for bits, p in self.weights.items() if ev(bits))


# ---------------------------------------------------------------------------
# MI-based measures


def i_mi(kb: KnowledgeBase, mis: Optional[MISet] = None) -> int:
    return len(mis if mis is not None else enumerate_mi(kb))


def i_mi_c(kb: KnowledgeBase, mis: Optional[MISet] = None) -> Fraction:
    mis = mis if mis is not None else enumerate_mi(kb)
    return sum((Fraction(1, len(m)) for m in mis), Fraction(0))


# ---------------------------------------------------------------------------
# Contension


def _split_atom(a: str, positive: bool) -> Atom:
    return Atom(("P_" if positive else "N_") + a)


def designation_formula(f: Formula, want_true: bool = True) -> Formula:
    """Classical formula over split atoms that holds iff ``f`` is designated.

    Atom ``a`` is split into ``P_a`` ("value is T or B") and ``N_a`` ("value
    is F or B").  With ``want_true=False`` the result encodes "value is F or B".
    """
    if isinstance(f, Atom):
        return _split_atom(f.name, want_true)
    if isinstance(f, Not):
        return designation_formula(f.arg, not want_true)
    if isinstance(f, (And, Or)):
        l = designation_formula(f.left, want_true)
        r = designation_formula(f.right, want_true)
        return And(l, r) if isinstance(f, And) == want_true else Or(l, r)
    return FALSE if want_true else Not(FALSE)


def _has_false(f: Formula) -> bool:
    stack = [f]
    while stack:
        node = stack.pop()
        if isinstance(node, Contradiction):
            return True
        if isinstance(node, Not):
            stack.append(node.arg)
        elif isinstance(node, (And, Or)):
            stack.extend((node.left, node.right))
    return False


def i_c(kb: KnowledgeBase, time_budget: Optional[float] = None,
        sat_budget: Optional[int] = sat.DEFAULT_BUDGET) -> Value:
    """Minimum number of atoms valued B over the three-valued models of ``kb``.

    Candidate B-sets are tried by increasing size; each is decided by a SAT
    call over split atoms.  Only atoms occurring in ``kb`` are candidates.
    """
    deadline = _Deadline(time_budget)
    if sat.is_consistent(kb, budget=sat_budget):
        return 0
    atoms = sorted(Signature.of(kb).atoms)
    builder = sat.CnfBuilder()
    for f in kb:
        builder.add_formula(designation_formula(f))
    pos = {a: builder.var_of("P_" + a) for a in atoms}
    neg = {a: builder.var_of("N_" + a) for a in atoms}
    for a in atoms:
        builder.add_clause([pos[a], neg[a]])
    base = list(builder.clauses)
    for k in range(1, len(atoms) + 1):
        for conflict in itertools.combinations(atoms, k):
            deadline.check()
            chosen = set(conflict)
            clauses = list(base)
            for a in atoms:
                if a in chosen:
                    clauses.append((pos[a],))
                    clauses.append((neg[a],))
                else:
                    clauses.append((-pos[a], -neg[a]))
            try:
                val = sat.Dpll(builder.num_vars, clauses, sat_budget).solve()
            except sat.BudgetExceeded as exc:
                raise MeasureTimeout(str(exc)) from exc
            if val is not None:
                return k
    # only reachable when some formula mentions ``false`` in a way no
    # three-valued interpretation can designate
    return math.inf


def i_c_bruteforce(kb: KnowledgeBase) -> Value:
    """Exhaustive search over all 3^n assignments to the atoms of ``kb``."""
    sig = Signature.of(kb)
    n = len(sig)
    if n > BRUTE_MAX_ATOMS:
        raise SignatureTooLarge(f"{n} atoms exceed the brute-force limit {BRUTE_MAX_ATOMS}")
    checks = [compile3(f, sig) for f in kb]
    full = sig.full_mask
    for k in range(n + 1):
        for conflict in itertools.combinations(range(n), k):
            both = sum(1 << i for i in conflict)
            rest = [i for i in range(n) if i not in conflict]
            for values in range(1 << len(rest)):
                p = both
                for j, i in enumerate(rest):
                    if values >> j & 1:
                        p |= 1 << i
                neg = (full & ~p) | both
                if all(c(p, neg) for c in checks):
                    return k
    return math.inf


# ---------------------------------------------------------------------------
# Hitting sets and partitions


def _unsatisfiable_positions(kb: KnowledgeBase) -> list[int]:
    return [i for i, f in enumerate(kb) if not sat.is_satisfiable(f)]


def _conflict_clique(kb: KnowledgeBase, models: list[Interpretation]) -> list[int]:
    """Greedy set of pairwise inconsistent formulas (a lower bound on h_K)."""
    clique: list[int] = []
    sig = kb.signature
    for i, f in enumerate(kb):
        ok = True
        for j in clique:
            g = kb[j]
            if compile2(g, sig)(models[i].bits) or compile2(f, sig)(models[j].bits):
                ok = False
                break
            if sat.is_consistent([f, g]):
                ok = False
                break
        if ok:
            clique.append(i)
    return clique


def _search_partition(kb: KnowledgeBase, order: list[int], seeded: int, n_blocks: int,
                      models: list[Interpretation], deadline: _Deadline):
    """Depth-first assignment of formulas to at most ``n_blocks`` consistent blocks.

    The first ``seeded`` positions of ``order`` are pairwise inconsistent and
    go to blocks 0..seeded-1.  Later formulas may join any existing block or
    open the next fresh one, which removes block-permutation symmetry.
    """
    sig = kb.signature
    if seeded > n_blocks:
        return None
    blocks: list[list[int]] = [[order[i]] for i in range(seeded)]
    witness: list[Interpretation] = [models[order[i]] for i in range(seeded)]
    m = len(order)
    undo: list[Optional[tuple[int, Optional[Interpretation]]]] = [None] * m
    next_opt = [0] * m
    i = seeded
    while True:
        if i == m:
            return blocks, witness
        if i < seeded:
            return None
        deadline.check()
        f = kb[order[i]]
        ev = compile2(f, sig)
        j = next_opt[i]
        placed = False
        while j <= len(blocks):
            if j == len(blocks):
                if len(blocks) < n_blocks:
                    blocks.append([order[i]])
                    witness.append(models[order[i]])
                    undo[i] = (j, None)
                    placed = True
                break
            w = witness[j]
            if ev(w.bits):
                blocks[j].append(order[i])
                undo[i] = (j, w)
                placed = True
                break
            res = sat.solve([kb[k] for k in blocks[j]] + [f], signature=sig)
            if res:
                blocks[j].append(order[i])
                undo[i] = (j, w)
                witness[j] = res.model
                placed = True
                break
            j += 1
        if placed:
            next_opt[i] = j + 1
            i += 1
            if i < m:
                next_opt[i] = 0
        else:
            i -= 1
            if i >= seeded:
                j, prev = undo[i]
                blocks[j].pop()
                if prev is None:
                    blocks.pop()
                    witness.pop()
                else:
                    witness[j] = prev


def _card_minimal_partition(kb: KnowledgeBase, time_budget: Optional[float] = None):
    deadline = _Deadline(time_budget)
    if len(kb) == 0:
        return [], []
    bad = _unsatisfiable_positions(kb)
    if bad:
        raise ContradictionPresent(f"formula at position {bad[0]} has no model")
    models = [sat.solve([f], signature=kb.signature).model for f in kb]
    clique = _conflict_clique(kb, models)
    order = clique + [i for i in range(len(kb)) if i not in set(clique)]
    for n_blocks in range(max(1, len(clique)), len(kb) + 1):
        found = _search_partition(kb, order, len(clique), n_blocks, models, deadline)
        if found is not None:
            return found
    raise AssertionError("singleton blocks always form a consistent partition")


def min_consistent_partition(kb: KnowledgeBase, time_budget: Optional[float] = None) -> Partitioning:
    """A consistent partitioning of ``kb`` with the fewest blocks."""
    blocks, _ = _card_minimal_partition(kb, time_budget)
    return Partitioning(tuple(frozenset(b) for b in blocks))


def min_hitting_set(kb: KnowledgeBase, time_budget: Optional[float] = None) -> HittingSet:
    """A cardinality-minimal hitting set, built from one model per partition block."""
    blocks, witness = _card_minimal_partition(kb, time_budget)
    if not blocks:
        return HittingSet(frozenset({Interpretation(kb.signature, 0)}))
    return HittingSet(frozenset(witness))


def i_hs(kb: KnowledgeBase, time_budget: Optional[float] = None) -> Value:
    """Size of a cardinality-minimal hitting set minus one (``inf`` if none exists)."""
    if len(kb) == 0:
        return 0
    if _unsatisfiable_positions(kb):
        return math.inf
    blocks, _ = _card_minimal_partition(kb, time_budget)
    return len(blocks) - 1


def i_hs_bruteforce(kb: KnowledgeBase) -> Value:
    """Breadth-first search over unions of interpretation coverage masks."""
    sig = Signature.of(kb)
    if len(sig) > BRUTE_MAX_ATOMS:
        raise SignatureTooLarge(f"{len(sig)} atoms exceed the brute-force limit {BRUTE_MAX_ATOMS}")
    if len(kb) > BRUTE_HS_MAX_FORMULAS:
        raise ValueError(f"{len(kb)} formulas exceed the brute-force limit {BRUTE_HS_MAX_FORMULAS}")
    if len(kb) == 0:
        return 0
    evals = [compile2(f, sig) for f in kb]
    masks = set()
    for bits in range(1 << len(sig)):
        m = 0
        for i, ev in enumerate(evals):
            if ev(bits):
                m |= 1 << i
        if m:
            masks.add(m)
    full = (1 << len(kb)) - 1
    reachable = 0
    for m in masks:
        reachable |= m
    if reachable != full:
        return math.inf
    frontier = {0}
    seen = {0}
    size = 0
    while True:
        size += 1
        nxt = set()
        for cur in frontier:
            for m in masks:
                u = cur | m
                if u == full:
                    return size - 1
                if u not in seen:
                    seen.add(u)
                    nxt.add(u)
        frontier = nxt


# ---------------------------------------------------------------------------
# Eta


def _snap(x: float) -> float:
    frac = Fraction(x).limit_denominator(10_000)
    return float(frac) if abs(float(frac) - x) < 1e-9 else x


def eta_distribution(kb: KnowledgeBase, max_atoms: int = ETA_MAX_ATOMS) -> tuple[float, ProbabilityFunction]:
    """Optimal threshold ``xi`` and a probability function attaining it."""
    sig = Signature.of(kb)
    if len(sig) > max_atoms:
        raise SignatureTooLarge(
            f"{len(sig)} atoms exceed the cap of {max_atoms} for the eta linear program"
        )
    if len(kb) == 0:
        return 1.0, ProbabilityFunction(sig, {0: 1.0})
    evals = [compile2(f, sig) for f in kb]
    cover = np.array(
        [[ev(bits) for bits in range(1 << len(sig))] for ev in evals], dtype=float
    )
    # interpretations satisfying the same formulas are interchangeable
    cols, first = np.unique(cover, axis=1, return_index=True)
    k = cols.shape[1]
    # variables: one probability per column class, then xi
    A = np.zeros((len(kb) + 2, k + 1))
    A[: len(kb), :k] = -cols
    A[: len(kb), k] = 1.0
    A[len(kb), :k] = 1.0
    A[len(kb) + 1, k] = 1.0
    b = np.zeros(len(kb) + 2)
    b[len(kb)] = 1.0
    b[len(kb) + 1] = 1.0
    c = np.zeros(k + 1)
    c[k] = 1.0
    res = simplex_max(c, A, b)
    weights = {int(first[j]): float(res.x[j]) for j in range(k) if res.x[j] > 1e-12}
    return _snap(res.value), ProbabilityFunction(sig, weights)


def i_eta(kb: KnowledgeBase, max_atoms: int = ETA_MAX_ATOMS) -> float:
    xi, _ = eta_distribution(kb, max_atoms)
    return _snap(1.0 - xi)


# ---------------------------------------------------------------------------
# Registry

MEASURES: dict[str, Callable[[KnowledgeBase], Value]] = {
    "mi": i_mi,
    "mic": i_mi_c,
    "c": i_c,
    "hs": i_hs,
    "eta": i_eta,
}


def evaluate(name: str, kb: KnowledgeBase, time_budget: Optional[float] = None) -> Value:
    """Compute measure ``name``; raise :class:`MeasureTimeout` past ``time_budget`` seconds."""
    if name in ("mi", "mic"):
        mis = enumerate_mi(kb, budget=time_budget)
        if not mis.complete:
            raise MeasureTimeout(f"MI enumeration incomplete after {len(mis)} subsets")
        return i_mi(kb, mis) if name == "mi" else i_mi_c(kb, mis)
    if name == "c":
        return i_c(kb, time_budget=time_budget)
    if name == "hs":
        return i_hs(kb, time_budget=time_budget)
    if name == "eta":
        return i_eta(kb)
    raise KeyError(f"unknown measure {name!r}; expected one of {sorted(MEASURES)}")


def format_value(v: Value) -> str:
    """Text form used in CSV files and CLI output; infinity is ``inf``."""
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else repr(float(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)
