"""Minimal inconsistent subsets and free formulas.

Enumeration follows the MARCO scheme: a map solver over one selector
variable per formula proposes unexplored subsets; consistent seeds are grown
to maximal consistent subsets and their complements blocked, inconsistent
seeds are shrunk to a minimal inconsistent subset whose supersets are then
blocked.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

from . import sat
from .formula import KnowledgeBase

IndexSet = frozenset


class ConsistentSeedError(ValueError):
    """``shrink_to_mus`` was given a consistent set."""


@dataclass
class MISet:
    """Minimal inconsistent subsets as sets of canonical KB positions.

    ``complete`` is False when enumeration stopped early because of a count
    limit, a time budget or an exhausted solver budget.
    """

    mis: list[frozenset[int]] = field(default_factory=list)
    complete: bool = True

    def __len__(self) -> int:
        return len(self.mis)

    def __iter__(self):
        return iter(self.mis)


def _consistent(kb: KnowledgeBase, indices: Iterable[int], budget: Optional[int]) -> bool:
    return sat.is_consistent([kb[i] for i in indices], budget=budget)


def shrink_to_mus(kb: KnowledgeBase, seed: Iterable[int], budget: Optional[int] = sat.DEFAULT_BUDGET) -> frozenset[int]:
    """Deletion-based shrink of an inconsistent index set to a minimal one.

    Formulas are tried for removal in canonical order.
    """
    current = sorted(set(seed))
    if _consistent(kb, current, budget):
        raise ConsistentSeedError("seed subset is consistent")
    i = 0
    while i < len(current):
        trial = current[:i] + current[i + 1:]
        if not _consistent(kb, trial, budget):
            current = trial
        else:
            i += 1
    return frozenset(current)


def _grow(kb: KnowledgeBase, seed: Iterable[int], budget: Optional[int]) -> set[int]:
    current = set(seed)
    for i in range(len(kb)):
        if i not in current and _consistent(kb, current | {i}, budget):
            current.add(i)
    return current


def enumerate_mi(
    kb: KnowledgeBase,
    limit: Optional[int] = None,
    budget: Optional[float] = None,
    sat_budget: Optional[int] = sat.DEFAULT_BUDGET,
) -> MISet:
    """All minimal inconsistent subsets of ``kb``.

    ``limit`` caps the number of MIs, ``budget`` is a wall-clock allowance in
    seconds and ``sat_budget`` bounds every solver call.  Hitting any of them
    yields a partial result with ``complete=False``.  The MIs are returned
    sorted by size, then by their sorted positions.
    """
    n = len(kb)
    deadline = None if budget is None else time.monotonic() + budget
    found: list[frozenset[int]] = []
    blocking: list[tuple[int, ...]] = []
    complete = True
    try:
        while True:
            if limit is not None and len(found) >= limit:
                complete = False
                break
            if deadline is not None and time.monotonic() > deadline:
                complete = False
                break
            # unassigned selectors default to true, so seeds tend to be large
            val = sat.Dpll(n, blocking, sat_budget).solve(phase=True)
            if val is None:
                break
            seed = {i for i in range(n) if val[i + 1] == 1}
            if _consistent(kb, seed, sat_budget):
                mss = _grow(kb, seed, sat_budget)
                blocking.append(tuple(i + 1 for i in range(n) if i not in mss))
            else:
                mus = shrink_to_mus(kb, seed, sat_budget)
                found.append(mus)
                blocking.append(tuple(-(i + 1) for i in sorted(mus)))
    except sat.BudgetExceeded:
        complete = False
    found.sort(key=lambda m: (len(m), sorted(m)))
    return MISet(found, complete)


def free_formulas(kb: KnowledgeBase, mis: Optional[MISet] = None) -> frozenset[int]:
    """Positions of formulas that belong to no minimal inconsistent subset."""
    if mis is None:
        mis = enumerate_mi(kb)
    used = set().union(*mis.mis) if mis.mis else set()
    return frozenset(i for i in range(len(kb)) if i not in used)
