"""Propositional formulas, signatures, and two- and three-valued semantics.

Formulas are immutable trees built from :class:`Atom`, :class:`Not`,
:class:`And`, :class:`Or` and the constant :data:`FALSE`.  Interpretations
are bit vectors indexed by the (lexicographically ordered) signature, so that
``bit i`` of an interpretation is the value of ``signature.atoms[i]``.

Three-valued interpretations use Priest's logic of paradox: every atom is
``T``, ``F`` or ``B`` (both), and a formula is satisfied when it evaluates to
``T`` or ``B``.  Internally a three-valued interpretation is a pair of bit
vectors ``(pos, neg)`` where ``pos`` marks atoms whose value is in {T, B} and
``neg`` marks atoms whose value is in {F, B}.
"""

from __future__ import annotations

import enum
import functools
import re
from collections.abc import Iterable, Iterator, Mapping, Sequence
from typing import Callable, Optional, Union

__all__ = [
    "Formula",
    "Atom",
    "Not",
    "And",
    "Or",
    "Contradiction",
    "FALSE",
    "Signature",
    "Interpretation",
    "TruthValue",
    "ThreeValuedInterpretation",
    "KnowledgeBase",
    "FormulaSyntaxError",
    "UnknownAtomError",
    "DuplicateFormulaError",
    "parse_formula",
    "parse_kb",
    "to_text",
    "eval2",
    "eval3",
    "satisfies2",
    "satisfies3",
    "conjoin",
    "disjoin",
    "kb_from_dimacs",
    "kb_to_dimacs",
]

ATOM_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class Formula:
    """Base class of the formula AST.  Instances are hashable and immutable."""

    __slots__ = ("_hash", "_atoms")

    def __setattr__(self, name, value):
        raise AttributeError(f"{type(self).__name__} is immutable")

    def _init(self, hash_key) -> None:
        object.__setattr__(self, "_hash", hash(hash_key))
        object.__setattr__(self, "_atoms", None)

    def __hash__(self) -> int:
        return self._hash

    @property
    def atoms(self) -> frozenset[str]:
        """Names of all atoms occurring in the formula."""
        cached = self._atoms
        if cached is None:
            cached = frozenset(_collect_atoms(self))
            object.__setattr__(self, "_atoms", cached)
        return cached

    def __invert__(self) -> "Not":
        return Not(self)

    def __and__(self, other: "Formula") -> "And":
        return And(self, other)

    def __or__(self, other: "Formula") -> "Or":
        return Or(self, other)

    def __str__(self) -> str:
        return to_text(self)


class Atom(Formula):
    __slots__ = ("name",)
    __hash__ = Formula.__hash__

    def __init__(self, name: str):
        if not ATOM_RE.match(name) or name == "false":
            raise ValueError(f"invalid atom name {name!r}")
        object.__setattr__(self, "name", name)
        self._init(("atom", name))

    def __eq__(self, other) -> bool:
        return isinstance(other, Atom) and other.name == self.name

    def __repr__(self) -> str:
        return f"Atom({self.name!r})"


class Not(Formula):
    __slots__ = ("arg",)
    __hash__ = Formula.__hash__

    def __init__(self, arg: Formula):
        object.__setattr__(self, "arg", arg)
        self._init(("not", arg._hash))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Not)
            and self._hash == other._hash
            and self.arg == other.arg
        )

    def __repr__(self) -> str:
        return f"Not({self.arg!r})"


class _Binary(Formula):
    __slots__ = ("left", "right")
    __hash__ = Formula.__hash__
    _tag = ""

    def __init__(self, left: Formula, right: Formula):
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)
        self._init((self._tag, left._hash, right._hash))

    def __eq__(self, other) -> bool:
        return (
            type(other) is type(self)
            and self._hash == other._hash
            and self.left == other.left
            and self.right == other.right
        )

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.left!r}, {self.right!r})"


class And(_Binary):
    __slots__ = ()
    _tag = "and"


class Or(_Binary):
    __slots__ = ()
    _tag = "or"


class Contradiction(Formula):
    """The constant falsum.  Use the module-level :data:`FALSE` instance."""

    __slots__ = ()
    __hash__ = Formula.__hash__

    def __init__(self):
        self._init(("false",))

    def __eq__(self, other) -> bool:
        return isinstance(other, Contradiction)

    def __repr__(self) -> str:
        return "FALSE"


FALSE = Contradiction()


def _collect_atoms(f: Formula) -> Iterator[str]:
    stack = [f]
    while stack:
        node = stack.pop()
        if isinstance(node, Atom):
            yield node.name
        elif isinstance(node, Not):
            stack.append(node.arg)
        elif isinstance(node, _Binary):
            stack.append(node.left)
            stack.append(node.right)


def conjoin(formulas: Sequence[Formula]) -> Formula:
    """Left-associated conjunction of a non-empty sequence."""
    if not formulas:
        raise ValueError("cannot conjoin an empty sequence")
    out = formulas[0]
    for f in formulas[1:]:
        out = And(out, f)
    return out


def disjoin(formulas: Sequence[Formula]) -> Formula:
    """Left-associated disjunction; the empty disjunction is :data:`FALSE`."""
    if not formulas:
        return FALSE
    out = formulas[0]
    for f in formulas[1:]:
        out = Or(out, f)
    return out


# ---------------------------------------------------------------------------
# Printing and parsing

_PREC = {Or: 1, And: 2}


def _prec(f: Formula) -> int:
    return _PREC.get(type(f), 3)


def to_text(f: Formula) -> str:
    """Render ``f`` in the ASCII grammar with the minimal set of parentheses.

    Binary connectives are left-associative, so a right operand with the
    same connective is parenthesized; ``parse_formula(to_text(f)) == f``.
    """
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Contradiction):
        return "false"
    if isinstance(f, Not):
        inner = to_text(f.arg)
        return "!" + (inner if _prec(f.arg) == 3 else f"({inner})")
    if isinstance(f, _Binary):
        op = " & " if isinstance(f, And) else " | "
        p = _prec(f)
        # iterate down the left spine to avoid deep recursion on long chains
        rights = []
        node: Formula = f
        while type(node) is type(f):
            rights.append(node.right)
            node = node.left
        parts = [to_text(node) if _prec(node) >= p else f"({to_text(node)})"]
        for r in reversed(rights):
            s = to_text(r)
            parts.append(s if _prec(r) > p else f"({s})")
        return op.join(parts)
    raise TypeError(f"not a formula: {f!r}")


class FormulaSyntaxError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class UnknownAtomError(ValueError):
    pass


class DuplicateFormulaError(ValueError):
    pass


_TOKEN_RE = re.compile(r"\s*(?:([A-Za-z_][A-Za-z0-9_]*)|(.))")


class _Parser:
    def __init__(self, text: str, line: int):
        self.text = text
        self.line = line
        self.tokens: list[tuple[str, int]] = []
        pos = 0
        while True:
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                break
            tok = m.group(1) or m.group(2)
            start = m.start(1) if m.group(1) else m.start(2)
            if tok not in "!&|()" and not m.group(1):
                raise FormulaSyntaxError(f"unexpected character {tok!r}", line, start + 1)
            self.tokens.append((tok, start + 1))
            pos = m.end()
        self.i = 0

    def _peek(self) -> Optional[str]:
        return self.tokens[self.i][0] if self.i < len(self.tokens) else None

    def _error(self, message: str) -> FormulaSyntaxError:
        col = self.tokens[self.i][1] if self.i < len(self.tokens) else len(self.text) + 1
        return FormulaSyntaxError(message, self.line, col)

    def parse(self) -> Formula:
        if not self.tokens:
            raise self._error("empty formula")
        f = self._or()
        if self.i != len(self.tokens):
            raise self._error(f"unexpected token {self._peek()!r}")
        return f

    def _or(self) -> Formula:
        f = self._and()
        while self._peek() == "|":
            self.i += 1
            f = Or(f, self._and())
        return f

    def _and(self) -> Formula:
        f = self._not()
        while self._peek() == "&":
            self.i += 1
            f = And(f, self._not())
        return f

    def _not(self) -> Formula:
        tok = self._peek()
        if tok is None:
            raise self._error("unexpected end of input")
        if tok == "!":
            self.i += 1
            return Not(self._not())
        if tok == "(":
            self.i += 1
            f = self._or()
            if self._peek() != ")":
                raise self._error("expected ')'")
            self.i += 1
            return f
        if tok in "&|)":
            raise self._error(f"unexpected token {tok!r}")
        self.i += 1
        return FALSE if tok == "false" else Atom(tok)


def parse_formula(
    text: str,
    signature: Optional["Signature"] = None,
    strict: bool = False,
    line: int = 1,
) -> Formula:
    """Parse one formula.

    ``!`` binds tighter than ``&``, which binds tighter than ``|``; both binary
    operators associate to the left.  With ``strict=True`` every atom must
    belong to ``signature``.

    >>> parse_formula("!(a & b) | c")
    Or(Not(And(Atom('a'), Atom('b'))), Atom('c'))
    """
    f = _Parser(text, line).parse()
    if strict:
        if signature is None:
            raise ValueError("strict parsing requires a signature")
        unknown = sorted(f.atoms - set(signature.atoms))
        if unknown:
            raise UnknownAtomError(f"line {line}: unknown atom(s) {', '.join(unknown)}")
    return f


# ---------------------------------------------------------------------------
# Signatures and interpretations


class Signature:
    """An ordered set of atom names; the order is always lexicographic."""

    __slots__ = ("atoms", "index", "_hash")

    def __init__(self, atoms: Iterable[str] = ()):
        names = tuple(sorted(set(atoms)))
        for a in names:
            if not ATOM_RE.match(a):
                raise ValueError(f"invalid atom name {a!r}")
        self.atoms = names
        self.index = {a: i for i, a in enumerate(names)}
        self._hash = hash(names)

    @classmethod
    def of(cls, formulas: Iterable[Formula]) -> "Signature":
        atoms: set[str] = set()
        for f in formulas:
            atoms |= f.atoms
        return cls(atoms)

    def union(self, other: Union["Signature", Iterable[str]]) -> "Signature":
        extra = other.atoms if isinstance(other, Signature) else other
        return Signature(self.atoms + tuple(extra))

    def covers(self, f: Formula) -> bool:
        return f.atoms <= self.index.keys()

    @property
    def full_mask(self) -> int:
        return (1 << len(self.atoms)) - 1

    def __len__(self) -> int:
        return len(self.atoms)

    def __iter__(self) -> Iterator[str]:
        return iter(self.atoms)

    def __contains__(self, name) -> bool:
        return name in self.index

    def __eq__(self, other) -> bool:
        return isinstance(other, Signature) and self.atoms == other.atoms

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"Signature({list(self.atoms)!r})"


class Interpretation:
    """A classical interpretation: bit ``i`` is the value of ``signature.atoms[i]``."""

    __slots__ = ("signature", "bits")

    def __init__(self, signature: Signature, bits: int = 0):
        if bits < 0 or bits > signature.full_mask:
            raise ValueError("bit vector out of range for signature")
        self.signature = signature
        self.bits = bits

    @classmethod
    def from_true(cls, signature: Signature, true_atoms: Iterable[str]) -> "Interpretation":
        bits = 0
        for a in true_atoms:
            bits |= 1 << signature.index[a]
        return cls(signature, bits)

    @classmethod
    def from_mapping(cls, signature: Signature, values: Mapping[str, bool]) -> "Interpretation":
        missing = set(signature.atoms) - values.keys()
        if missing:
            raise ValueError(f"interpretation not total, missing {sorted(missing)}")
        return cls.from_true(signature, (a for a in signature.atoms if values[a]))

    @classmethod
    def all(cls, signature: Signature) -> Iterator["Interpretation"]:
        for bits in range(1 << len(signature)):
            yield cls(signature, bits)

    def __getitem__(self, atom: str) -> bool:
        return bool(self.bits >> self.signature.index[atom] & 1)

    def true_atoms(self) -> list[str]:
        return [a for i, a in enumerate(self.signature.atoms) if self.bits >> i & 1]

    def as_dict(self) -> dict[str, bool]:
        return {a: bool(self.bits >> i & 1) for i, a in enumerate(self.signature.atoms)}

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Interpretation)
            and self.bits == other.bits
            and self.signature == other.signature
        )

    def __hash__(self) -> int:
        return hash((self.signature, self.bits))

    def __repr__(self) -> str:
        return f"Interpretation(true={self.true_atoms()!r})"


class TruthValue(enum.Enum):
    T = "T"
    F = "F"
    B = "B"

    @property
    def designated(self) -> bool:
        return self is not TruthValue.F


_TV_FROM_PARTS = {
    (1, 0): TruthValue.T,
    (0, 1): TruthValue.F,
    (1, 1): TruthValue.B,
}


class ThreeValuedInterpretation:
    """Assignment of T, F or B to every atom of a signature."""

    __slots__ = ("signature", "pos", "neg")

    def __init__(self, signature: Signature, pos: int, neg: int):
        full = signature.full_mask
        if (pos | neg) != full or pos & ~full or neg & ~full:
            raise ValueError("three-valued interpretation must be total over its signature")
        self.signature = signature
        self.pos = pos
        self.neg = neg

    @classmethod
    def from_mapping(
        cls, signature: Signature, values: Mapping[str, Union[TruthValue, str]]
    ) -> "ThreeValuedInterpretation":
        pos = neg = 0
        for a in signature.atoms:
            if a not in values:
                raise ValueError(f"three-valued interpretation missing atom {a!r}")
            v = TruthValue(values[a])
            bit = 1 << signature.index[a]
            if v is not TruthValue.F:
                pos |= bit
            if v is not TruthValue.T:
                neg |= bit
        return cls(signature, pos, neg)

    @classmethod
    def constant(cls, signature: Signature, value: Union[TruthValue, str]) -> "ThreeValuedInterpretation":
        return cls.from_mapping(signature, {a: value for a in signature.atoms})

    @classmethod
    def from_classical(cls, w: Interpretation) -> "ThreeValuedInterpretation":
        return cls(w.signature, w.bits, w.signature.full_mask & ~w.bits)

    def __getitem__(self, atom: str) -> TruthValue:
        i = self.signature.index[atom]
        return _TV_FROM_PARTS[(self.pos >> i & 1, self.neg >> i & 1)]

    @property
    def conflict_bits(self) -> int:
        return self.pos & self.neg

    def conflicts(self) -> list[str]:
        """Atoms valued B."""
        both = self.conflict_bits
        return [a for i, a in enumerate(self.signature.atoms) if both >> i & 1]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ThreeValuedInterpretation)
            and (self.pos, self.neg) == (other.pos, other.neg)
            and self.signature == other.signature
        )

    def __hash__(self) -> int:
        return hash((self.signature, self.pos, self.neg))

    def __repr__(self) -> str:
        vals = ", ".join(f"{a}={self[a].value}" for a in self.signature.atoms)
        return f"ThreeValuedInterpretation({vals})"


# ---------------------------------------------------------------------------
# Compiled evaluation
#
# Formulas are compiled to Python expressions over integer bit vectors.  Each
# three-valued value is a pair of bits (t, f): T=(1,0), F=(0,1), B=(1,1).
# Negation swaps the pair, conjunction is (t1&t2, f1|f2) and disjunction is
# (t1|t2, f1&f2), which reproduces the Priest truth tables.


def _flatten(f: _Binary) -> list[Formula]:
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


def _expr2(f: Formula, index: Mapping[str, int]) -> str:
    if isinstance(f, Atom):
        return f"(b>>{index[f.name]}&1)"
    if isinstance(f, Not):
        return f"(1^{_expr2(f.arg, index)})"
    if isinstance(f, And):
        return "(" + "&".join(_expr2(g, index) for g in _flatten(f)) + ")"
    if isinstance(f, Or):
        return "(" + "|".join(_expr2(g, index) for g in _flatten(f)) + ")"
    return "0"


def _expr3(f: Formula, index: Mapping[str, int], want_true: bool) -> str:
    if isinstance(f, Atom):
        return f"(p>>{index[f.name]}&1)" if want_true else f"(n>>{index[f.name]}&1)"
    if isinstance(f, Not):
        return _expr3(f.arg, index, not want_true)
    if isinstance(f, (And, Or)):
        op = "&" if isinstance(f, And) == want_true else "|"
        return "(" + op.join(_expr3(g, index, want_true) for g in _flatten(f)) + ")"
    return "0" if want_true else "1"


def _interp2(f: Formula, index: Mapping[str, int], b: int) -> int:
    if isinstance(f, Atom):
        return b >> index[f.name] & 1
    if isinstance(f, Not):
        return 1 ^ _interp2(f.arg, index, b)
    if isinstance(f, And):
        return int(all(_interp2(g, index, b) for g in _flatten(f)))
    if isinstance(f, Or):
        return int(any(_interp2(g, index, b) for g in _flatten(f)))
    return 0


def _interp3(f: Formula, index: Mapping[str, int], p: int, n: int, want_true: bool) -> int:
    if isinstance(f, Atom):
        return (p if want_true else n) >> index[f.name] & 1
    if isinstance(f, Not):
        return _interp3(f.arg, index, p, n, not want_true)
    if isinstance(f, (And, Or)):
        parts = (_interp3(g, index, p, n, want_true) for g in _flatten(f))
        return int(all(parts) if isinstance(f, And) == want_true else any(parts))
    return 0 if want_true else 1


def _check_covered(f: Formula, signature: Signature) -> None:
    if not signature.covers(f):
        missing = sorted(f.atoms - signature.index.keys())
        raise ValueError(f"interpretation does not cover atoms {missing}")


def clause_masks(f: Formula, signature: Union[Signature, Mapping[str, int]]) -> Optional[list[tuple[int, int]]]:
    """``f`` as a conjunction of clauses, or None if it has another shape.

    Each clause is a pair of masks (atoms occurring positively, atoms
    occurring negatively).  ``false`` contributes no literal, so a clause
    made only of ``false`` is the pair ``(0, 0)``.  Instead of a signature
    any atom-to-bit mapping may be passed.
    """
    index = signature.index if isinstance(signature, Signature) else signature
    out = []
    stack = [f]
    while stack:
        node = stack.pop()
        kind = type(node)
        if kind is And:
            stack.append(node.right)
            stack.append(node.left)
            continue
        if kind is Atom:
            out.append((1 << index[node.name], 0))
            continue
        if kind is Not and type(node.arg) is Atom:
            out.append((0, 1 << index[node.arg.name]))
            continue
        pos = neg = 0
        lits = [node]
        while lits:
            g = lits.pop()
            kind = type(g)
            if kind is Or:
                lits.append(g.right)
                lits.append(g.left)
            elif kind is Atom:
                pos |= 1 << index[g.name]
            elif kind is Not and type(g.arg) is Atom:
                neg |= 1 << index[g.arg.name]
            elif kind is not Contradiction:
                return None
        out.append((pos, neg))
    return out


def _split_units(clauses: list[tuple[int, int]]) -> tuple[int, int, tuple[tuple[int, int], ...]]:
    must_t = must_f = 0
    rest = []
    for pos, neg in clauses:
        if neg == 0 and pos & (pos - 1) == 0 and pos:
            must_t |= pos
        elif pos == 0 and neg & (neg - 1) == 0 and neg:
            must_f |= neg
        else:
            rest.append((pos, neg))
    return must_t, must_f, tuple(rest)


def cnf_eval2(clauses: list[tuple[int, int]]) -> Callable[[int], int]:
    must_t, must_f, rest = _split_units(clauses)
    if len(rest) == 1:
        (rp, rn), = rest

        def ev(b: int) -> int:
            return int(b & must_t == must_t and not b & must_f and bool(b & rp or ~b & rn))
        return ev

    def ev(b: int) -> int:
        if b & must_t != must_t or b & must_f:
            return 0
        for pos, neg in rest:
            if not (b & pos or ~b & neg):
                return 0
        return 1
    return ev


def cnf_eval3(clauses: list[tuple[int, int]]) -> Callable[[int, int], int]:
    must_t, must_f, rest = _split_units(clauses)

    def ev(p: int, n: int) -> int:
        if p & must_t != must_t or n & must_f != must_f:
            return 0
        for pos, neg in rest:
            if not (p & pos or n & neg):
                return 0
        return 1
    return ev


@functools.lru_cache(maxsize=1 << 16)
def compile2(f: Formula, signature: Signature) -> Callable[[int], int]:
    """Return ``bits -> 0/1`` evaluating ``f`` classically."""
    _check_covered(f, signature)
    masks = clause_masks(f, signature)
    if masks is not None:
        return cnf_eval2(masks)
    try:
        return eval(compile("lambda b: " + _expr2(f, signature.index), "<formula>", "eval"))
    except (SyntaxError, RecursionError, MemoryError):
        index = signature.index
        return lambda b: _interp2(f, index, b)


@functools.lru_cache(maxsize=1 << 16)
def compile3(f: Formula, signature: Signature) -> Callable[[int, int], int]:
    """Return ``(pos, neg) -> 0/1`` telling whether ``f`` is designated (T or B)."""
    _check_covered(f, signature)
    masks = clause_masks(f, signature)
    if masks is not None:
        return cnf_eval3(masks)
    try:
        return eval(compile("lambda p, n: " + _expr3(f, signature.index, True), "<formula>", "eval"))
    except (SyntaxError, RecursionError, MemoryError):
        index = signature.index
        return lambda p, n: _interp3(f, index, p, n, True)


@functools.lru_cache(maxsize=1 << 16)
def _compile3_false(f: Formula, signature: Signature) -> Callable[[int, int], int]:
    try:
        return eval(compile("lambda p, n: " + _expr3(f, signature.index, False), "<formula>", "eval"))
    except (SyntaxError, RecursionError, MemoryError):
        index = signature.index
        return lambda p, n: _interp3(f, index, p, n, False)


def clear_caches() -> None:
    """Drop compiled evaluators (used to start timing runs from a cold state)."""
    compile2.cache_clear()
    compile3.cache_clear()
    _compile3_false.cache_clear()


def eval2(w: Interpretation, f: Formula) -> bool:
    return bool(compile2(f, w.signature)(w.bits))


def eval3(v: ThreeValuedInterpretation, f: Formula) -> TruthValue:
    t = compile3(f, v.signature)(v.pos, v.neg)
    fl = _compile3_false(f, v.signature)(v.pos, v.neg)
    return _TV_FROM_PARTS[(t, fl)]


def satisfies2(w: Interpretation, formulas: Iterable[Formula]) -> bool:
    sig, bits = w.signature, w.bits
    return all(compile2(f, sig)(bits) for f in formulas)


def satisfies3(v: ThreeValuedInterpretation, formulas: Iterable[Formula]) -> bool:
    """True iff every formula evaluates to T or B under ``v``."""
    sig, p, n = v.signature, v.pos, v.neg
    return all(compile3(f, sig)(p, n) for f in formulas)


# ---------------------------------------------------------------------------
# Knowledge bases


class KnowledgeBase(Sequence[Formula]):
    """A finite set of formulas with a fixed canonical enumeration.

    The enumeration is the insertion order.  Syntactic duplicates are
    rejected.  The signature defaults to the atoms of the formulas but may be
    any superset of them.
    """

    __slots__ = ("formulas", "signature", "_positions")

    def __init__(self, formulas: Iterable[Formula] = (), signature: Optional[Signature] = None):
        fs = tuple(formulas)
        positions: dict[Formula, int] = {}
        for i, f in enumerate(fs):
            if not isinstance(f, Formula):
                raise TypeError(f"not a formula: {f!r}")
            if f in positions:
                raise DuplicateFormulaError(
                    f"duplicate formula {to_text(f)!r} at positions {positions[f]} and {i}"
                )
            positions[f] = i
        own = Signature.of(fs)
        if signature is None:
            signature = own
        elif not set(own.atoms) <= set(signature.atoms):
            raise ValueError("signature does not cover the knowledge base")
        self.formulas = fs
        self.signature = signature
        self._positions = positions

    def __len__(self) -> int:
        return len(self.formulas)

    def __getitem__(self, i):
        return self.formulas[i]

    def __iter__(self) -> Iterator[Formula]:
        return iter(self.formulas)

    def __contains__(self, f) -> bool:
        return f in self._positions

    def position(self, f: Formula) -> int:
        return self._positions[f]

    def subset(self, indices: Iterable[int]) -> "KnowledgeBase":
        """Sub-knowledge-base over the same signature, in canonical order."""
        return KnowledgeBase((self.formulas[i] for i in sorted(set(indices))), self.signature)

    def without(self, index: int) -> "KnowledgeBase":
        return KnowledgeBase(
            (f for i, f in enumerate(self.formulas) if i != index), self.signature
        )

    def with_formula(self, f: Formula) -> "KnowledgeBase":
        """``self ∪ {f}``; a formula already present leaves the KB unchanged."""
        if f in self._positions:
            return self
        return KnowledgeBase(self.formulas + (f,), self.signature.union(f.atoms))

    def as_set(self) -> frozenset[Formula]:
        return frozenset(self.formulas)

    def to_text(self) -> str:
        return "".join(to_text(f) + "\n" for f in self.formulas)

    def __eq__(self, other) -> bool:
        return isinstance(other, KnowledgeBase) and self.formulas == other.formulas

    def __hash__(self) -> int:
        return hash(self.formulas)

    def __repr__(self) -> str:
        return "KnowledgeBase([" + ", ".join(to_text(f) for f in self.formulas) + "])"

    @classmethod
    def parse(cls, text: str, signature: Optional[Signature] = None, strict: bool = False) -> "KnowledgeBase":
        return parse_kb(text, signature, strict)

    @classmethod
    def from_file(cls, path, **kwargs) -> "KnowledgeBase":
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        if str(path).endswith(".cnf"):
            return kb_from_dimacs(text)
        return parse_kb(text, **kwargs)


def parse_kb(text: str, signature: Optional[Signature] = None, strict: bool = False) -> KnowledgeBase:
    """Parse the line-oriented KB format: one formula per line, ``#`` comments."""
    formulas: list[Formula] = []
    seen: dict[Formula, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        if not line.strip():
            continue
        f = parse_formula(line, signature, strict, line=lineno)
        if f in seen:
            raise DuplicateFormulaError(
                f"line {lineno}: duplicate of the formula on line {seen[f]}"
            )
        seen[f] = lineno
        formulas.append(f)
    return KnowledgeBase(formulas, signature)


def kb_from_dimacs(text: str) -> KnowledgeBase:
    """Read DIMACS CNF; variable ``i`` becomes atom ``x{i}``.

    Repeated clauses collapse into one formula since a knowledge base is a set.
    """
    declared_vars = None
    clauses: list[list[int]] = []
    current: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("c") or line.startswith("%"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf" or not parts[2].isdigit():
                raise FormulaSyntaxError("malformed DIMACS header", lineno, 1)
            declared_vars = int(parts[2])
            continue
        for tok in line.split():
            try:
                lit = int(tok)
            except ValueError:
                raise FormulaSyntaxError(f"bad literal {tok!r}", lineno, line.find(tok) + 1) from None
            if declared_vars is not None and abs(lit) > declared_vars:
                raise FormulaSyntaxError(f"variable {abs(lit)} exceeds header", lineno, line.find(tok) + 1)
            if lit == 0:
                clauses.append(current)
                current = []
            else:
                current.append(lit)
    if current:
        clauses.append(current)
    if declared_vars is None:
        raise FormulaSyntaxError("missing 'p cnf' header", 1, 1)
    formulas: list[Formula] = []
    seen: set[Formula] = set()
    for clause in clauses:
        lits = [Atom(f"x{abs(l)}") if l > 0 else Not(Atom(f"x{abs(l)}")) for l in clause]
        f = disjoin(lits)
        if f not in seen:
            seen.add(f)
            formulas.append(f)
    return KnowledgeBase(formulas)


def _clause_literals(f: Formula) -> Optional[list[tuple[str, bool]]]:
    if isinstance(f, Contradiction):
        return []
    if isinstance(f, Atom):
        return [(f.name, True)]
    if isinstance(f, Not) and isinstance(f.arg, Atom):
        return [(f.arg.name, False)]
    if isinstance(f, Or):
        out = []
        for g in _flatten(f):
            lits = _clause_literals(g)
            if lits is None:
                return None
            out.extend(lits)
        return out
    return None


def kb_to_dimacs(kb: KnowledgeBase) -> str:
    """Write a KB of clauses as DIMACS, numbering atoms in signature order."""
    numbered = [re.fullmatch(r"x([1-9][0-9]*)", a) for a in kb.signature.atoms]
    if all(numbered):
        index = {m.group(0): int(m.group(1)) for m in numbered}
    else:
        index = {a: i + 1 for i, a in enumerate(kb.signature.atoms)}
    lines = [f"p cnf {max(index.values(), default=0)} {len(kb)}"]
    for f in kb:
        lits = _clause_literals(f)
        if lits is None:
            raise ValueError(f"formula {to_text(f)!r} is not a clause")
        lines.append(" ".join(str(index[a] if pos else -index[a]) for a, pos in lits) + " 0")
    return "\n".join(lines) + "\n"
