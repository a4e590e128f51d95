"""Satisfiability services over the formula AST.

Formulas are clausified with a Tseitin transformation (fresh variables are
projected out of returned models) and handed to a small DPLL solver with
two-watched-literal unit propagation and chronological backtracking.  An
external DIMACS solver can be plugged in through :func:`set_backend`.
"""

from __future__ import annotations

import functools
import logging
import random
import subprocess
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from typing import Optional, Protocol

from .formula import (
    And,
    Atom,
    Contradiction,
    Formula,
    Interpretation,
    KnowledgeBase,
    Not,
    Or,
    Signature,
    clause_masks,
    compile2,
)
from .formula import clear_caches as formula_clear_caches

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 10_000_000
ENUMERATION_LIMIT = 20


class BudgetExceeded(RuntimeError):
    """The propagation budget ran out before the solver reached an answer."""


class UnsatisfiableFormula(ValueError):
    """A model was requested for a formula that has none."""

    code = "UNSAT_FORMULA"


class SignatureTooLarge(ValueError):
    code = "SIGNATURE_TOO_LARGE"


# ---------------------------------------------------------------------------
# Clausification

Clause = tuple[int, ...]


@dataclass(frozen=True)
class CnfTemplate:
    """Clauses of one formula over local variables.

    Variables ``1..len(atoms)`` stand for ``atoms`` (sorted); higher ones are
    Tseitin auxiliaries.
    """

    atoms: tuple[str, ...]
    num_vars: int
    clauses: tuple[Clause, ...]


def _normalize(lits: Iterable[int]) -> Optional[Clause]:
    seen: dict[int, None] = {}
    for l in lits:
        if -l in seen:
            return None  # tautology
        seen[l] = None
    return tuple(seen)


def _conjuncts(f: Formula) -> list[Formula]:
    out, stack = [], [f]
    while stack:
        node = stack.pop()
        if isinstance(node, And):
            stack.append(node.right)
            stack.append(node.left)
        else:
            out.append(node)
    return out


def _literals(f: Formula, var: dict[str, int]) -> Optional[list[int]]:
    """Literals of ``f`` if it is a plain clause, else None."""
    out, stack = [], [f]
    while stack:
        node = stack.pop()
        if isinstance(node, Or):
            stack.append(node.right)
            stack.append(node.left)
        elif isinstance(node, Atom):
            out.append(var[node.name])
        elif isinstance(node, Not) and isinstance(node.arg, Atom):
            out.append(-var[node.arg.name])
        elif isinstance(node, Contradiction):
            continue
        elif isinstance(node, Not) and isinstance(node.arg, Not):
            stack.append(node.arg.arg)
        else:
            return None
    return out


@functools.lru_cache(maxsize=1 << 16)
def cnf_template(f: Formula) -> CnfTemplate:
    atoms = tuple(sorted(f.atoms))
    var = {a: i + 1 for i, a in enumerate(atoms)}
    n = len(atoms)
    clauses: list[Clause] = []
    memo: dict[Formula, int] = {}

    def fresh() -> int:
        nonlocal n
        n += 1
        return n

    def add(lits) -> None:
        c = _normalize(lits)
        if c is not None:
            clauses.append(c)

    def encode(g: Formula) -> int:
        # iterative post-order so deep formulas do not hit the recursion limit
        stack: list[tuple[Formula, bool]] = [(g, False)]
        while stack:
            node, done = stack.pop()
            if node in memo:
                continue
            if isinstance(node, Atom):
                memo[node] = var[node.name]
            elif isinstance(node, Contradiction):
                x = fresh()
                add([-x])
                memo[node] = x
            elif isinstance(node, Not):
                if done:
                    memo[node] = -memo[node.arg]
                else:
                    stack.append((node, True))
                    stack.append((node.arg, False))
            else:
                kids = _flatten_same(node)
                if done:
                    x = fresh()
                    ks = [memo[k] for k in kids]
                    if isinstance(node, And):
                        for k in ks:
                            add([-x, k])
                        add([x] + [-k for k in ks])
                    else:
                        for k in ks:
                            add([x, -k])
                        add([-x] + ks)
                    memo[node] = x
                else:
                    stack.append((node, True))
                    stack.extend((k, False) for k in kids)
        return memo[g]

    for conj in _conjuncts(f):
        lits = _literals(conj, var)
        if lits is None:
            add([encode(conj)])
        else:
            add(lits)
    return CnfTemplate(atoms, n, tuple(clauses))


def _flatten_same(f: Formula) -> list[Formula]:
    kind = type(f)
    out, stack = [], [f]
    while stack:
        node = stack.pop()
        if type(node) is kind:
            stack.append(node.right)
            stack.append(node.left)
        else:
            out.append(node)
    return out


class CnfBuilder:
    """Accumulates the clauses of several formulas over shared atom variables."""

    def __init__(self, signature: Optional[Signature] = None):
        self.atom_var: dict[str, int] = {}
        self.num_vars = 0
        self.clauses: list[Clause] = []
        if signature is not None:
            for a in signature.atoms:
                self.var_of(a)

    def var_of(self, atom: str) -> int:
        v = self.atom_var.get(atom)
        if v is None:
            self.num_vars += 1
            v = self.atom_var[atom] = self.num_vars
        return v

    def fresh(self) -> int:
        self.num_vars += 1
        return self.num_vars

    def add_formula(self, f: Formula) -> None:
        t = cnf_template(f)
        mapping = [0] * (t.num_vars + 1)
        for i, a in enumerate(t.atoms, start=1):
            mapping[i] = self.var_of(a)
        for i in range(len(t.atoms) + 1, t.num_vars + 1):
            mapping[i] = self.fresh()
        for c in t.clauses:
            self.clauses.append(tuple(mapping[l] if l > 0 else -mapping[-l] for l in c))

    def add_clause(self, lits: Iterable[int]) -> None:
        c = _normalize(lits)
        if c is not None:
            self.clauses.append(c)


# ---------------------------------------------------------------------------
# DPLL


class Dpll:
    """DPLL with watched literals and chronological backtracking.

    ``solve`` returns a list ``val`` with ``val[v]`` in {1, -1} for every
    variable, or None when the clauses are unsatisfiable.  A solver instance
    is single use.
    """

    def __init__(self, num_vars: int, clauses: Sequence[Sequence[int]], budget: Optional[int] = DEFAULT_BUDGET):
        self.n = num_vars
        self.budget = budget
        self.propagations = 0
        self.val = [0] * (num_vars + 1)
        self.trail: list[int] = []
        self.qhead = 0
        self.watches: list[list[list[int]]] = [[] for _ in range(2 * num_vars + 1)]
        self.units: list[int] = []
        self.empty = False
        for c in clauses:
            c = list(c)
            if not c:
                self.empty = True
            elif len(c) == 1:
                self.units.append(c[0])
            else:
                self.watches[c[0] + num_vars].append(c)
                self.watches[c[1] + num_vars].append(c)

    def _assign(self, lit: int) -> None:
        self.val[abs(lit)] = 1 if lit > 0 else -1
        self.trail.append(lit)
        self.propagations += 1
        if self.budget is not None and self.propagations > self.budget:
            raise BudgetExceeded(f"propagation budget {self.budget} exhausted")

    def _value(self, lit: int) -> int:
        v = self.val[lit] if lit > 0 else -self.val[-lit]
        return v

    def _propagate(self) -> bool:
        val, n, watches, trail = self.val, self.n, self.watches, self.trail
        while self.qhead < len(trail):
            p = trail[self.qhead]
            self.qhead += 1
            false_lit = -p
            wl = watches[false_lit + n]
            keep: list[list[int]] = []
            i = 0
            conflict = False
            while i < len(wl):
                c = wl[i]
                i += 1
                if c[0] == false_lit:
                    c[0], c[1] = c[1], false_lit
                first = c[0]
                fv = val[first] if first > 0 else -val[-first]
                if fv == 1:
                    keep.append(c)
                    continue
                for k in range(2, len(c)):
                    lk = c[k]
                    if (val[lk] if lk > 0 else -val[-lk]) != -1:
                        c[1], c[k] = lk, false_lit
                        watches[lk + n].append(c)
                        break
                else:
                    keep.append(c)
                    if fv == -1:
                        conflict = True
                        keep.extend(wl[i:])
                        break
                    self._assign(first)
            watches[false_lit + n] = keep
            if conflict:
                return False
        return True

    def _undo(self, length: int) -> None:
        trail, val = self.trail, self.val
        for lit in trail[length:]:
            val[abs(lit)] = 0
        del trail[length:]
        self.qhead = length

    def solve(self, order: Optional[Sequence[int]] = None, rng: Optional[random.Random] = None,
              phase: bool = True) -> Optional[list[int]]:
        """Search for a model.

        ``order`` fixes the decision order (default: variable index).  With
        ``rng`` the first polarity of every decision is a fair coin, otherwise
        it is ``phase``.
        """
        if self.empty:
            return None
        for u in self.units:
            v = self._value(u)
            if v == -1:
                return None
            if v == 0:
                self._assign(u)
        if not self._propagate():
            return None
        order = list(order) if order is not None else list(range(1, self.n + 1))
        decisions: list[tuple[int, int, bool, int]] = []
        pos = 0
        val = self.val
        while True:
            while pos < len(order) and val[order[pos]] != 0:
                pos += 1
            if pos == len(order):
                break
            var = order[pos]
            positive = (rng.random() < 0.5) if rng is not None else phase
            lit = var if positive else -var
            decisions.append((len(self.trail), lit, False, pos))
            self._assign(lit)
            while not self._propagate():
                while decisions:
                    mark, dlit, flipped, dpos = decisions.pop()
                    self._undo(mark)
                    if not flipped:
                        decisions.append((mark, -dlit, True, dpos))
                        self._assign(-dlit)
                        pos = dpos
                        break
                else:
                    return None
        # variables outside ``order`` may still be unassigned
        return [v if v != 0 else -1 for v in val]


# ---------------------------------------------------------------------------
# Backends


class Backend(Protocol):
    def solve_cnf(self, num_vars: int, clauses: Sequence[Clause], budget: Optional[int]) -> Optional[list[int]]:
        ...


class DpllBackend:
    name = "dpll"

    def solve_cnf(self, num_vars, clauses, budget=DEFAULT_BUDGET):
        return Dpll(num_vars, clauses, budget).solve()


class ExternalSolver:
    """Runs an external solver that reads DIMACS on stdin.

    The solver must print the usual competition output: an ``s SATISFIABLE``
    or ``s UNSATISFIABLE`` line and, when satisfiable, ``v`` lines with the
    model.
    """

    name = "external"

    def __init__(self, path: str, timeout: Optional[float] = None):
        self.path = path
        self.timeout = timeout

    def solve_cnf(self, num_vars, clauses, budget=None):
        lines = [f"p cnf {num_vars} {len(clauses)}"]
        lines.extend(" ".join(map(str, c)) + " 0" for c in clauses)
        try:
            proc = subprocess.run(
                [self.path], input="\n".join(lines) + "\n", capture_output=True,
                text=True, timeout=self.timeout,
            )
        except subprocess.TimeoutExpired as exc:
            raise BudgetExceeded(f"external solver timed out after {self.timeout}s") from exc
        status = None
        lits: list[int] = []
        for line in proc.stdout.splitlines():
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "s":
                status = " ".join(parts[1:])
            elif parts[0] == "v":
                lits.extend(int(t) for t in parts[1:])
        if status == "UNSATISFIABLE":
            return None
        if status != "SATISFIABLE":
            raise RuntimeError(f"external solver {self.path!r} gave no verdict (exit {proc.returncode})")
        val = [0] + [-1] * num_vars
        for l in lits:
            if l != 0 and abs(l) <= num_vars:
                val[abs(l)] = 1 if l > 0 else -1
        return val


_backend: Backend = DpllBackend()


def set_backend(backend: Backend) -> Backend:
    """Install the solver used by :func:`solve` and friends; returns the old one."""
    global _backend
    old, _backend = _backend, backend
    return old


def get_backend() -> Backend:
    return _backend


def backend_from_spec(spec: str) -> Backend:
    """``dpll`` or ``external:<path>``."""
    if spec == "dpll":
        return DpllBackend()
    if spec.startswith("external:") and len(spec) > len("external:"):
        return ExternalSolver(spec[len("external:"):])
    raise ValueError(f"unknown solver spec {spec!r}")


# ---------------------------------------------------------------------------
# Public API


@dataclass(frozen=True)
class SatResult:
    satisfiable: bool
    model: Optional[Interpretation] = None

    @property
    def status(self) -> str:
        return "SAT" if self.satisfiable else "UNSAT"

    def __bool__(self) -> bool:
        return self.satisfiable


def _as_list(formulas) -> list[Formula]:
    if isinstance(formulas, Formula):
        return [formulas]
    return list(formulas)


def solve(formulas, signature: Optional[Signature] = None, budget: Optional[int] = DEFAULT_BUDGET,
          backend: Optional[Backend] = None) -> SatResult:
    """Decide the conjunction of ``formulas`` and return a model over ``signature``.

    The signature defaults to the atoms of the formulas (or the KB's own
    signature).  Atoms of the signature that do not occur are set false.
    """
    fs = _as_list(formulas)
    if signature is None:
        signature = formulas.signature if isinstance(formulas, KnowledgeBase) else Signature.of(fs)
    builder = CnfBuilder(signature)
    for f in fs:
        builder.add_formula(f)
    val = (backend or _backend).solve_cnf(builder.num_vars, builder.clauses, budget)
    if val is None:
        return SatResult(False)
    bits = 0
    for a, i in signature.index.items():
        if val[builder.atom_var[a]] == 1:
            bits |= 1 << i
    return SatResult(True, Interpretation(signature, bits))


def is_consistent(formulas, budget: Optional[int] = DEFAULT_BUDGET) -> bool:
    """True iff the formulas have a common classical model.

    Raises :class:`BudgetExceeded` instead of guessing when the solver gives up.
    """
    return solve(formulas, budget=budget).satisfiable


def masks_satisfiable(masks: list[tuple[int, int]]) -> Optional[bool]:
    """Decide unit literals plus at most one clause without the solver.

    ``masks`` comes from :func:`clause_masks`; None means "ask the solver".
    """
    must_t = must_f = 0
    rest = []
    for pos, neg in masks:
        if neg == 0 and pos and pos & (pos - 1) == 0:
            must_t |= pos
        elif pos == 0 and neg and neg & (neg - 1) == 0:
            must_f |= neg
        else:
            rest.append((pos, neg))
    if must_t & must_f:
        return False
    if len(rest) > 1:
        return None
    if not rest:
        return True
    pos, neg = rest[0]
    return bool(pos & ~must_f or neg & ~must_t)


@functools.lru_cache(maxsize=1 << 16)
def is_satisfiable(f: Formula) -> bool:
    masks = clause_masks(f, {a: i for i, a in enumerate(f.atoms)})
    quick = None if masks is None else masks_satisfiable(masks)
    if quick is not None:
        return quick
    return solve([f]).satisfiable


def clear_caches() -> None:
    """Drop per-formula caches here and in the formula module."""
    is_satisfiable.cache_clear()
    cnf_template.cache_clear()
    formula_clear_caches()


def random_model(f: Formula, rng: random.Random, signature: Optional[Signature] = None) -> Interpretation:
    """A model of ``f`` drawn by randomized DPLL.

    Decision order and first polarities are random; atoms outside ``f`` are
    fair coins.  Every model has positive probability but the distribution
    is not uniform.
    """
    if signature is None:
        signature = Signature(f.atoms)
    t = cnf_template(f)
    order = list(range(1, t.num_vars + 1))
    rng.shuffle(order)
    val = Dpll(t.num_vars, t.clauses, DEFAULT_BUDGET).solve(order=order, rng=rng)
    if val is None:
        raise UnsatisfiableFormula(f"formula has no model: {f}")
    bits = rng.getrandbits(len(signature)) if len(signature) else 0
    index = signature.index
    for i, a in enumerate(t.atoms, start=1):
        j = index[a]
        if val[i] == 1:
            bits |= 1 << j
        else:
            bits &= ~(1 << j)
    return Interpretation(signature, bits)


def enumerate_models(f: Formula, cap: int, signature: Optional[Signature] = None) -> list[Interpretation]:
    """All models of ``f`` in increasing bit-vector order, at most ``cap`` of them."""
    if cap < 1:
        raise ValueError("cap must be positive")
    if signature is None:
        signature = Signature(f.atoms)
    if len(signature) > ENUMERATION_LIMIT:
        raise SignatureTooLarge(f"{len(signature)} atoms exceed the enumeration limit {ENUMERATION_LIMIT}")
    ev = compile2(f, signature)
    out = []
    for bits in range(1 << len(signature)):
        if ev(bits):
            out.append(Interpretation(signature, bits))
            if len(out) == cap:
                break
    return out
