"""Random knowledge bases, optionally with a prescribed I_hs or I_c value.

Atoms are named ``x1 .. xn`` so sampled CNF knowledge bases round-trip
through DIMACS with their variable numbers intact.

Value-controlled constructions:

``hs`` target ``v``
    ``b = bitlength(v)`` mode atoms split the formulas into ``v + 1`` groups.
    Every formula of group ``i`` is the conjunction of the mode literals
    spelling ``i`` in binary with a clause over the remaining atoms that a
    per-group hidden assignment satisfies.  Groups are consistent and
    pairwise contradictory, so exactly ``v + 1`` interpretations are needed.
    Formulas are listed group after group.

``c`` target ``t``
    ``t`` conflict atoms each contribute the unit formulas ``a`` and ``!a``.
    All other formulas are clauses over the remaining atoms satisfied by one
    hidden assignment, so exactly the conflict atoms must be B.  The unit
    formulas come first.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Optional

from .formula import Atom, Formula, KnowledgeBase, Not, Signature, conjoin, disjoin, kb_to_dimacs


class SampleSpaceError(ValueError):
    """Not enough distinct formulas or atoms for the request."""


@dataclass(frozen=True)
class SampleSpec:
    num_formulas: int
    num_atoms: int
    clause_length: tuple[int, int] = (2, 4)
    seed: int = 0
    target: Optional[tuple[str, int]] = None

    def __post_init__(self):
        if self.num_formulas < 1:
            raise ValueError("num_formulas must be positive")
        if self.num_atoms < 1:
            raise ValueError("num_atoms must be positive")
        lo, hi = self.clause_length
        if lo < 1 or hi < lo:
            raise ValueError(f"bad clause length range {self.clause_length}")
        if self.target is not None:
            kind, value = self.target
            if kind not in ("hs", "c"):
                raise ValueError(f"target measure must be 'hs' or 'c', not {kind!r}")
            if value < 0:
                raise ValueError("target value must be non-negative")
            if kind == "hs" and value + 1 > 2 ** self.num_atoms:
                raise ValueError("I_hs target needs value + 1 <= 2^num_atoms")

    @staticmethod
    def parse_target(text: str) -> tuple[str, int]:
        kind, _, value = text.partition(":")
        if kind not in ("hs", "c") or not value.strip().lstrip("-").isdigit():
            raise ValueError(f"target must look like hs:V or c:T, got {text!r}")
        return kind, int(value)


def atom_names(n: int) -> list[str]:
    return [f"x{i}" for i in range(1, n + 1)]


def _literal(name: str, positive: bool) -> Formula:
    return Atom(name) if positive else Not(Atom(name))


def _clause_space(n: int, lo: int, hi: int, exclude_one_pattern: bool) -> int:
    """Number of clauses over ``n`` atoms with ``lo..hi`` literals.

    With ``exclude_one_pattern`` only clauses satisfied by a fixed
    assignment are counted (one sign pattern per atom set is falsified).
    """
    per = (lambda k: 2 ** k - 1) if exclude_one_pattern else (lambda k: 2 ** k)
    return sum(math.comb(n, k) * per(k) for k in range(lo, min(hi, n) + 1))


class _ClauseDrawer:
    """Draws distinct clauses over ``atoms``, optionally satisfied by ``hidden``."""

    def __init__(self, rng: random.Random, atoms: list[str], length: tuple[int, int],
                 hidden: Optional[dict[str, bool]] = None):
        lo, hi = length
        if lo > len(atoms):
            raise SampleSpaceError(f"clause length {lo} exceeds the {len(atoms)} available atoms")
        self.rng = rng
        self.atoms = atoms
        self.lo, self.hi = lo, min(hi, len(atoms))
        self.hidden = hidden
        self.space = _clause_space(len(atoms), lo, hi, hidden is not None)

    def draw(self) -> tuple[tuple[str, bool], ...]:
        rng = self.rng
        k = rng.randint(self.lo, self.hi)
        chosen = sorted(rng.sample(range(len(self.atoms)), k))
        signs = [rng.random() < 0.5 for _ in chosen]
        if self.hidden is not None:
            names = [self.atoms[i] for i in chosen]
            if not any(self.hidden[a] == s for a, s in zip(names, signs)):
                # flip one literal so the hidden assignment satisfies the clause
                j = rng.randrange(k)
                signs[j] = not signs[j]
        return tuple((self.atoms[i], s) for i, s in zip(chosen, signs))

    def draw_distinct(self, count: int, what: str = "clauses") -> list[tuple[tuple[str, bool], ...]]:
        if count > self.space:
            raise SampleSpaceError(f"only {self.space} distinct {what} exist, {count} requested")
        seen: set = set()
        out = []
        attempts = 0
        cap = 100 * max(count, 1)
        while len(out) < count:
            attempts += 1
            if attempts > cap:
                raise SampleSpaceError(f"could not draw {count} distinct {what} in {cap} attempts")
            c = self.draw()
            if c not in seen:
                seen.add(c)
                out.append(c)
        return out


def _clause_formula(lits) -> Formula:
    return disjoin([_literal(a, s) for a, s in lits])


def sample_random_cnf(spec: SampleSpec) -> KnowledgeBase:
    """``num_formulas`` distinct random clauses over ``x1 .. x{num_atoms}``."""
    if spec.target is not None:
        raise ValueError("sample_random_cnf does not take a target; use sample()")
    rng = random.Random(spec.seed)
    names = atom_names(spec.num_atoms)
    drawer = _ClauseDrawer(rng, names, spec.clause_length)
    clauses = drawer.draw_distinct(spec.num_formulas)
    return KnowledgeBase([_clause_formula(c) for c in clauses], Signature(names))


def mode_bits(v: int) -> int:
    """Mode atoms needed for ``v + 1`` mutually exclusive groups."""
    return v.bit_length()


def sample_with_hs_value(spec: SampleSpec) -> KnowledgeBase:
    kind, v = spec.target or ("hs", None)
    if kind != "hs" or v is None:
        raise ValueError("spec needs a target of the form ('hs', v)")
    n, count = spec.num_atoms, spec.num_formulas
    b = mode_bits(v)
    if n < b + 1:
        raise SampleSpaceError(f"I_hs = {v} needs {b} mode atoms plus at least one payload atom; got {n} atoms")
    groups = v + 1
    if count < groups:
        raise SampleSpaceError(f"{groups} groups need at least {groups} formulas")
    rng = random.Random(spec.seed)
    names = atom_names(n)
    mode_atoms, payload = names[:b], names[b:]

    sizes = [count // groups + (1 if g < count % groups else 0) for g in range(groups)]
    per_group = []
    for g in range(groups):
        hidden = {a: rng.random() < 0.5 for a in payload}
        drawer = _ClauseDrawer(rng, payload, spec.clause_length, hidden)
        mode = [_literal(a, bool(g >> j & 1)) for j, a in enumerate(mode_atoms)]
        per_group.append([conjoin(mode + [_clause_formula(c)]) for c in drawer.draw_distinct(sizes[g])])

    formulas = [f for group in per_group for f in group]
    return KnowledgeBase(formulas, Signature(names))


def sample_with_c_value(spec: SampleSpec) -> KnowledgeBase:
    kind, t = spec.target or ("c", None)
    if kind != "c" or t is None:
        raise ValueError("spec needs a target of the form ('c', t)")
    n, count = spec.num_atoms, spec.num_formulas
    if t > n - 1:
        raise SampleSpaceError(f"I_c = {t} needs at least {t + 1} atoms; got {n}")
    if count < 2 * t:
        raise SampleSpaceError(f"I_c = {t} needs at least {2 * t} formulas for the conflict pairs")
    rng = random.Random(spec.seed)
    names = atom_names(n)
    conflict = sorted(rng.sample(names, t), key=names.index)
    rest = [a for a in names if a not in conflict]
    hidden = {a: rng.random() < 0.5 for a in rest}
    drawer = _ClauseDrawer(rng, rest, spec.clause_length, hidden)
    clauses = [_clause_formula(c) for c in drawer.draw_distinct(count - 2 * t)]
    units = []
    for a in conflict:
        units += [Atom(a), Not(Atom(a))]
    formulas = units + clauses
    return KnowledgeBase(formulas, Signature(names))


def sample(spec: SampleSpec) -> KnowledgeBase:
    """Dispatch on ``spec.target``."""
    if spec.target is None:
        return sample_random_cnf(spec)
    if spec.target[0] == "hs":
        return sample_with_hs_value(spec)
    return sample_with_c_value(spec)


def write_kb(kb: KnowledgeBase, path, dimacs: bool = False) -> None:
    text = kb_to_dimacs(kb) if dimacs else kb.to_text()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
