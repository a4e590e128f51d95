"""Formula streams and stream-based inconsistency measures.

A stream is any total map from positions to formulas.  Three stream measures
are provided:

* :class:`WindowMeasure` applies an exact measure to the most recent ``w``
  formulas and folds the results with an aggregator.
* :class:`HsPopulationMeasure` keeps ``m`` candidate hitting sets that are
  grown and randomly thinned as formulas arrive.
* :class:`CPopulationMeasure` does the same with three-valued
  interpretations and counts conflicting atoms.

All measures report 0 at position 0.  :func:`run_stream` drives a measure
over a stream and records a sampled trace.
"""

from __future__ import annotations

import csv
import functools
import math
import random
import time
import warnings
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence, Union

from . import sat
from .formula import (
    Formula,
    Interpretation,
    KnowledgeBase,
    Signature,
    ThreeValuedInterpretation,
    clause_masks,
    cnf_eval2,
    cnf_eval3,
    compile2,
    compile3,
)
from .measures import MEASURES, MeasureTimeout, Value, evaluate, format_value

DEFAULT_CADENCE = 100


class ContradictoryFormula(ValueError):
    code = "CONTRADICTORY_FORMULA"


class StreamSpecError(ValueError):
    """Malformed stream measure specification."""


# ---------------------------------------------------------------------------
# Streams


class PropositionalStream:
    """Base class: ``stream(i)`` is the formula at position ``i``."""

    signature: Optional[Signature] = None

    def __call__(self, i: int) -> Formula:
        raise NotImplementedError

    def take(self, n: int, start: int = 0) -> list[Formula]:
        return [self(i) for i in range(start, start + n)]


class KBStream(PropositionalStream):
    """Cycles through a knowledge base in canonical order."""

    def __init__(self, kb: KnowledgeBase):
        if len(kb) == 0:
            raise ValueError("cannot stream an empty knowledge base")
        self.kb = kb
        self.signature = kb.signature

    def __call__(self, i: int) -> Formula:
        if i < 0:
            raise IndexError("stream positions are non-negative")
        return self.kb[i % len(self.kb)]

    def __repr__(self) -> str:
        return f"KBStream(n={len(self.kb)})"


class ReplayStream(PropositionalStream):
    """Replays a recorded formula sequence, cyclically so it stays total.

    Unlike a knowledge base the sequence may repeat formulas.
    """

    def __init__(self, formulas: Sequence[Formula]):
        if not formulas:
            raise ValueError("cannot replay an empty formula sequence")
        self.formulas = list(formulas)
        self.signature = Signature.of(self.formulas)

    @classmethod
    def from_file(cls, path) -> "ReplayStream":
        from .formula import parse_formula

        formulas = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                text = line.split("#", 1)[0].strip()
                if text:
                    formulas.append(parse_formula(text, line=lineno))
        return cls(formulas)

    def __call__(self, i: int) -> Formula:
        if i < 0:
            raise IndexError("stream positions are non-negative")
        return self.formulas[i % len(self.formulas)]


class GeneratorStream(PropositionalStream):
    """Wraps a function of the position.  Pass a signature if population
    measures are going to consume the stream."""

    def __init__(self, fn: Callable[[int], Formula], signature: Optional[Signature] = None):
        self.fn = fn
        self.signature = signature

    def __call__(self, i: int) -> Formula:
        return self.fn(i)


def kb_stream(kb: KnowledgeBase) -> KBStream:
    return KBStream(kb)


# ---------------------------------------------------------------------------
# Aggregators and decay schedules


@dataclass(frozen=True)
class Aggregator:
    """``max`` or exponential smoothing ``alpha*x + (1-alpha)*y``.

    The first argument is always the new value.
    """

    kind: str = "max"
    alpha: float = 0.5

    def __post_init__(self):
        if self.kind not in ("max", "smooth"):
            raise ValueError(f"unknown aggregator {self.kind!r}")
        if self.kind == "smooth":
            if not 0.0 <= self.alpha <= 1.0:
                raise ValueError("smoothing factor must lie in [0, 1]")
            if self.alpha in (0.0, 1.0):
                warnings.warn(
                    f"smooth:{self.alpha:g} does not move strictly between its arguments; "
                    "stream convergence guarantees need 0 < alpha < 1",
                    stacklevel=3,
                )

    @classmethod
    def parse(cls, text: str) -> "Aggregator":
        text = text.strip()
        if text == "max":
            return cls("max")
        if text.startswith("smooth:"):
            try:
                alpha = float(text.split(":", 1)[1])
            except ValueError:
                raise StreamSpecError(f"bad smoothing factor in {text!r}") from None
            return cls("smooth", alpha)
        raise StreamSpecError(f"unknown aggregator {text!r}; use 'max' or 'smooth:ALPHA'")

    def __call__(self, x: float, y: float) -> float:
        if self.kind == "max":
            return max(x, y)
        # avoid inf * 0 when one side is infinite
        if self.alpha == 1.0:
            return x
        if self.alpha == 0.0:
            return y
        return self.alpha * x + (1.0 - self.alpha) * y

    def __str__(self) -> str:
        return "max" if self.kind == "max" else f"smooth:{self.alpha:g}"


@dataclass(frozen=True)
class DecaySchedule:
    """Perturbation probability after ``i`` formulas; only ``recip`` exists."""

    kind: str = "recip"

    def __post_init__(self):
        if self.kind != "recip":
            raise ValueError(f"unknown decay schedule {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "DecaySchedule":
        if text.strip() != "recip":
            raise StreamSpecError(f"unknown decay schedule {text!r}; only 'recip' is supported")
        return cls("recip")

    def __call__(self, i: int) -> float:
        return 1.0 / (i + 1)

    def __str__(self) -> str:
        return self.kind


# ---------------------------------------------------------------------------
# Window measure


@dataclass
class WindowState:
    capacity: Optional[int]
    window: deque = field(default_factory=deque)
    last_value: Value = 0
    iteration: int = 0
    timed_out: bool = False

    def __post_init__(self):
        if self.capacity is not None and self.capacity < 1:
            raise ValueError("window capacity must be at least 1")
        self.window = deque(self.window, maxlen=self.capacity)

    def contents(self) -> KnowledgeBase:
        # the window is a set of formulas; keep first occurrence order
        return KnowledgeBase(dict.fromkeys(self.window))


def window_update(
    state: WindowState,
    f: Formula,
    base: str,
    g: Aggregator,
    time_budget: Optional[float] = None,
) -> Value:
    """Push ``f``, re-evaluate ``base`` on the window and aggregate.

    If the base measure runs out of time the previous value is kept and
    ``state.timed_out`` is set.
    """
    i = state.iteration
    state.window.append(f)
    state.iteration += 1
    if i == 0:
        state.last_value = 0
        return 0
    try:
        v = evaluate(base, state.contents(), time_budget=time_budget)
    except (MeasureTimeout, sat.BudgetExceeded):
        state.timed_out = True
        return state.last_value
    state.last_value = g(v, state.last_value)
    return state.last_value


# ---------------------------------------------------------------------------
# Population measures


@dataclass
class HsCandidatePopulation:
    """``m`` candidate hitting sets, each a set of interpretation bit vectors."""

    signature: Signature
    m: int
    candidates: list = field(default_factory=list)
    N: int = 0
    current_value: float = 0.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("population size must be at least 1")
        if not self.candidates:
            self.candidates = [set() for _ in range(self.m)]
        if len(self.candidates) != self.m:
            raise ValueError("candidate count does not match m")

    def interpretations(self, j: int) -> list[Interpretation]:
        return [Interpretation(self.signature, b) for b in sorted(self.candidates[j])]


@functools.lru_cache(maxsize=1 << 16)
def _prepare(f: Formula, signature: Signature, three_valued: bool) -> Callable:
    """Validate ``f`` for a population over ``signature`` and return its evaluator."""
    if not signature.covers(f):
        missing = sorted(f.atoms - set(signature.atoms))
        raise ValueError(f"formula mentions atoms outside the population signature: {missing}")
    masks = clause_masks(f, signature)
    ok = None if masks is None else sat.masks_satisfiable(masks)
    if ok is None:
        ok = sat.is_satisfiable(f)
    if not ok:
        raise ContradictoryFormula(f"formula has no model: {f}")
    if masks is None:
        return compile3(f, signature) if three_valued else compile2(f, signature)
    return cnf_eval3(masks) if three_valued else cnf_eval2(masks)


def hs_update(
    pop: HsCandidatePopulation,
    f: Formula,
    g: Aggregator,
    decay: DecaySchedule,
    rng: random.Random,
) -> float:
    ev = _prepare(f, pop.signature, False)
    pop.N += 1
    p = decay(pop.N)
    new_value = 0.0
    m = len(pop.candidates)
    for C in pop.candidates:
        if rng.random() < p and C:
            C.discard(rng.choice(sorted(C)))
        if not any(ev(w) for w in C):
            C.add(sat.random_model(f, rng, pop.signature).bits)
        new_value += (len(C) - 1) / m
    pop.current_value = g(new_value, pop.current_value)
    return pop.current_value


@dataclass
class CCandidatePopulation:
    """``m`` three-valued interpretations as ``(pos, neg)`` bit-vector pairs.

    An atom is B when its bit is set in both vectors.  All candidates start
    with every atom true.
    """

    signature: Signature
    m: int
    candidates: list = field(default_factory=list)
    N: int = 0
    current_value: float = 0.0

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("population size must be at least 1")
        if not self.candidates:
            self.candidates = [(self.signature.full_mask, 0) for _ in range(self.m)]
        if len(self.candidates) != self.m:
            raise ValueError("candidate count does not match m")

    def interpretation(self, j: int) -> ThreeValuedInterpretation:
        pos, neg = self.candidates[j]
        return ThreeValuedInterpretation(self.signature, pos, neg)

    def conflicts(self) -> list[int]:
        return [(p & n).bit_count() for p, n in self.candidates]


def _set_bits(x: int) -> list[int]:
    out = []
    while x:
        low = x & -x
        out.append(low.bit_length() - 1)
        x ^= low
    return out


def c_update(
    pop: CCandidatePopulation,
    f: Formula,
    g: Aggregator,
    decay: DecaySchedule,
    rng: random.Random,
) -> float:
    designated = _prepare(f, pop.signature, True)
    pop.N += 1
    p = decay(pop.N)
    f_mask = 0
    for a in f.atoms:
        f_mask |= 1 << pop.signature.index[a]
    new_value = 0.0
    m = len(pop.candidates)
    for j, (pos, neg) in enumerate(pop.candidates):
        if rng.random() < p:
            both = pos & neg
            if both:
                k = rng.choice(_set_bits(both))
                if rng.random() < 0.5:
                    neg &= ~(1 << k)  # B -> T
                else:
                    pos &= ~(1 << k)  # B -> F
        while not designated(pos, neg):
            # f is satisfiable, so turning all of its atoms to B designates it
            k = rng.choice(_set_bits(f_mask & ~(pos & neg)))
            pos |= 1 << k
            neg |= 1 << k
        pop.candidates[j] = (pos, neg)
        new_value += (pos & neg).bit_count() / m
    pop.current_value = g(new_value, pop.current_value)
    return pop.current_value


def clear_caches() -> None:
    _prepare.cache_clear()
    sat.clear_caches()


# ---------------------------------------------------------------------------
# Stream measures with a uniform step interface


class StreamMeasure:
    """Consumes one formula per :meth:`step` and returns the current value."""

    spec: str = ""
    timed_out: bool = False

    def step(self, f: Formula) -> Value:
        raise NotImplementedError


class WindowMeasure(StreamMeasure):
    def __init__(self, base: str, w: Optional[int], g: Aggregator, time_budget: Optional[float] = None):
        if base not in MEASURES:
            raise StreamSpecError(f"unknown base measure {base!r}")
        self.base = base
        self.g = g
        self.time_budget = time_budget
        self.state = WindowState(w)
        w_text = "inf" if w is None else str(w)
        self.spec = f"window:{base}:{w_text}:{g}"

    @property
    def timed_out(self) -> bool:
        return self.state.timed_out

    def step(self, f: Formula) -> Value:
        return window_update(self.state, f, self.base, self.g, self.time_budget)


class _PopulationMeasure(StreamMeasure):
    family = ""
    update = None
    population_type = None

    def __init__(self, signature: Signature, m: int, g: Aggregator, decay: DecaySchedule,
                 rng: Union[random.Random, int, None] = None):
        if signature is None:
            raise ValueError("population measures need the stream signature")
        self.g = g
        self.decay = decay
        self.rng = rng if isinstance(rng, random.Random) else random.Random(rng)
        self.population = type(self).population_type(signature, m)
        self.position = 0
        self.spec = f"{self.family}:{m}:{g}:{decay}"

    def step(self, f: Formula) -> float:
        i = self.position
        self.position += 1
        if i == 0:
            # position 0 reports 0 and leaves the population untouched
            return 0
        return type(self).update(self.population, f, self.g, self.decay, self.rng)


class HsPopulationMeasure(_PopulationMeasure):
    family = "hs"
    update = staticmethod(hs_update)
    population_type = HsCandidatePopulation


class CPopulationMeasure(_PopulationMeasure):
    family = "c"
    update = staticmethod(c_update)
    population_type = CCandidatePopulation


def make_measure(
    spec: str,
    signature: Optional[Signature] = None,
    seed: Union[int, random.Random, None] = None,
    time_budget: Optional[float] = None,
) -> StreamMeasure:
    """Build a stream measure from ``window:BASE:W:G``, ``hs:M:G:F`` or ``c:M:G:F``.

    ``W`` is a positive integer or ``inf``; ``G`` is ``max`` or
    ``smooth:ALPHA`` (so it may itself contain a colon).
    """
    parts = spec.strip().split(":")
    family = parts[0]
    try:
        if family == "window":
            if len(parts) < 4:
                raise StreamSpecError(f"expected window:BASE:W:G, got {spec!r}")
            base, w_text = parts[1], parts[2]
            g = Aggregator.parse(":".join(parts[3:]))
            w = None if w_text in ("inf", "∞") else int(w_text)
            return WindowMeasure(base, w, g, time_budget)
        if family in ("hs", "c"):
            if len(parts) < 4:
                raise StreamSpecError(f"expected {family}:M:G:F, got {spec!r}")
            m = int(parts[1])
            g = Aggregator.parse(":".join(parts[2:-1]))
            decay = DecaySchedule.parse(parts[-1])
            cls = HsPopulationMeasure if family == "hs" else CPopulationMeasure
            return cls(signature, m, g, decay, seed)
    except ValueError as e:
        if isinstance(e, StreamSpecError):
            raise
        raise StreamSpecError(f"bad measure spec {spec!r}: {e}") from None
    raise StreamSpecError(f"unknown stream measure family {family!r}")


# ---------------------------------------------------------------------------
# Driving a stream


@dataclass(frozen=True)
class TracePoint:
    iteration: int  # number of formulas consumed so far
    value: Value
    elapsed_micros: int  # cumulative time spent inside the measure
    timeout: bool = False


@dataclass
class Trace:
    points: list[TracePoint] = field(default_factory=list)
    aborted: bool = False
    stopped: bool = False
    iterations_done: int = 0
    elapsed_micros: int = 0

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def final_value(self) -> Value:
        return self.points[-1].value if self.points else 0

    def values(self) -> list[Value]:
        return [p.value for p in self.points]


def run_stream(
    measure: StreamMeasure,
    stream: PropositionalStream,
    iterations: int,
    cadence: int = DEFAULT_CADENCE,
    timeout: Optional[float] = None,
    probe: Optional[Callable[[int, Value], None]] = None,
    start: int = 0,
    until: Optional[Callable[[Value], bool]] = None,
) -> Trace:
    """Feed ``iterations`` formulas to ``measure``.

    A trace point is taken after every ``cadence`` iterations and after the
    last one.  ``probe`` (if given) sees every iteration's value, outside
    the timed region.  If a single iteration exceeds ``timeout`` seconds, or
    the measure reports a timeout, processing stops and the last trace point
    carries the flag.  ``until`` stops the run (with a final trace point) as
    soon as it accepts a value.
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    if cadence < 1:
        raise ValueError("cadence must be at least 1")
    trace = Trace()
    spent = 0
    for k in range(iterations):
        f = stream(start + k)
        t0 = time.perf_counter_ns()
        value = measure.step(f)
        dt = time.perf_counter_ns() - t0
        spent += dt
        over = measure.timed_out or (timeout is not None and dt > timeout * 1e9)
        if probe is not None:
            probe(k, value)
        done = until is not None and until(value)
        if over or done or (k + 1) % cadence == 0 or k == iterations - 1:
            trace.points.append(TracePoint(k + 1, value, spent // 1000, over))
        if over or done:
            trace.aborted = over
            trace.stopped = done and not over
            trace.iterations_done = k + 1
            break
    else:
        trace.iterations_done = iterations
    trace.elapsed_micros = spent // 1000
    return trace


TRACE_COLUMNS = ("measure", "kb_id", "seed", "iteration", "value", "elapsed_micros", "timeout_flag")


def trace_rows(trace: Trace, measure: str, kb_id: str, seed: int) -> Iterable[list]:
    for p in trace.points:
        yield [measure, kb_id, seed, p.iteration, format_value(p.value), p.elapsed_micros, int(p.timeout)]


def write_trace_csv(path, trace: Trace, measure: str, kb_id: str, seed: int) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        w.writerows(trace_rows(trace, measure, kb_id, seed))


def converged_at(values: Sequence[float], target: float, tol: float = 1.0) -> Optional[int]:
    """Index of the first value within ``tol`` of ``target``, or None."""
    for i, v in enumerate(values):
        if not math.isinf(v) and abs(v - target) <= tol:
            return i
    return None
