"""Acceptance criteria.  Each test records one PASS/FAIL line, printed in the terminal summary."""

import itertools
import math
import random
import time
from collections import Counter

import pytest

from inkstream.bench import ExperimentConfig, run_experiment, runtime_ratio
from inkstream.formula import Atom, KnowledgeBase, Not, disjoin, parse_kb
from inkstream.measures import (
    MEASURES, i_c, i_c_bruteforce, i_eta, i_hs, i_hs_bruteforce, i_mi, i_mi_c, min_consistent_partition,
)
from inkstream.mus import enumerate_mi, free_formulas
from inkstream.sampler import SampleSpec, sample
from inkstream.sat import is_consistent
from inkstream.stream import Aggregator, WindowMeasure, kb_stream, make_measure, run_stream

from kbgen import fresh_atoms, random_consistent_formula, random_formula, random_kb, rewrite_kb, weaken
from oracles import minimal_inconsistent_subsets

pytestmark = pytest.mark.acceptance

LP_TOL = 1e-6


def same(x, y) -> bool:
    if x == y:
        return True
    return not (math.isinf(x) or math.isinf(y)) and abs(x - y) <= LP_TOL


def at_least(x, y) -> bool:
    return x >= y or same(x, y)


# --- 1. example values -------------------------------------------------------------

def test_example_values(report):
    K1 = parse_kb("a\nb | c\n!a & !b\nd\n")
    K2 = parse_kb("a\n!a\nb\n!b\n")
    K3 = parse_kb("a & b & c\n!a & !b & !c\na & !b\n")
    t0 = time.perf_counter()
    checks = [
        ("I_MI(K1)", i_mi(K1), 1, 0),
        ("I_MIc(K1)", i_mi_c(K1), 0.5, 0),
        ("I_c(K1)", i_c(K1), 2, 0),
        ("I_eta(K1)", i_eta(K1), 0.5, 0),
        ("I_MI(K2)", i_mi(K2), 2, 0),
        ("I_MIc(K2)", i_mi_c(K2), 1, 0),
        ("I_c(K2)", i_c(K2), 2, 0),
        ("I_eta(K2)", i_eta(K2), 0.5, 0),
        ("I_hs(K1)", i_hs(K1), 1, 0),
        ("I_hs(K2)", i_hs(K2), 1, 0),
        ("I_hs(K3)", i_hs(K3), 2, 0),
        ("I_eta({a,!a})", i_eta(parse_kb("a\n!a\n")), 0.5, 1e-6),
        ("I_eta({a,b,!a|!b})", i_eta(parse_kb("a\nb\n!a | !b\n")), 1 / 3, 1e-6),
    ]
    elapsed = time.perf_counter() - t0
    wrong = [f"{name}={got} (expected {want})" for name, got, want, tol in checks
             if not (got == want if tol == 0 else abs(got - want) <= tol)]
    ok = not wrong and elapsed < 1.0
    report("C1 example values", ok,
           f"{len(checks) - len(wrong)}/{len(checks)} exact, {elapsed:.3f}s" + (f"; mismatches: {wrong}" if wrong else ""))
    assert not wrong, wrong
    assert elapsed < 1.0


# --- 2. axioms -----------------------------------------------------------------------

PROPERTIES = ("consistency", "monotony", "free-formula", "safe-formula", "syntax", "dominance")


def test_axioms(report):
    t0 = time.perf_counter()
    violations: Counter = Counter()
    examples: dict = {}

    def check(name, prop, ok, witness):
        if not ok:
            violations[(name, prop)] += 1
            examples.setdefault((name, prop), witness)

    for seed in range(500):
        rng = random.Random(seed)
        kb = random_kb(rng, max_atoms=8, max_formulas=8)
        atoms = list(kb.signature.atoms)
        consistent = is_consistent(list(kb))
        extra = random_formula(rng, atoms)
        free = free_formulas(kb)
        safe = random_consistent_formula(rng, fresh_atoms(kb))
        rewritten = None
        for _ in range(5):
            rewritten = rewrite_kb(kb, rng)
            if rewritten is not None:
                break
        alpha = random_consistent_formula(rng, atoms)
        beta = weaken(alpha, rng, atoms)
        for name, measure in MEASURES.items():
            v = measure(kb)
            check(name, "consistency", (v == 0) == consistent, kb)
            check(name, "monotony", at_least(measure(kb.with_formula(extra)), v), (kb, extra))
            for i in free:
                check(name, "free-formula", same(measure(kb.without(i)), v), (kb, i))
            check(name, "safe-formula", same(measure(kb.with_formula(safe)), v), (kb, safe))
            if rewritten is not None:
                check(name, "syntax", same(measure(rewritten), v), (kb, rewritten))
            check(name, "dominance",
                  at_least(measure(kb.with_formula(alpha)), measure(kb.with_formula(beta))), (kb, alpha, beta))
    elapsed = time.perf_counter() - t0
    total = sum(violations.values())
    table = ", ".join(f"{n}/{p}={c}" for (n, p), c in sorted(violations.items())) or "none"
    report("C2 axiom suite", total == 0 and elapsed < 120,
           f"500 KBs x {len(MEASURES)} measures x {len(PROPERTIES)} properties, {total} violations ({table}), "
           f"{elapsed:.1f}s")
    assert elapsed < 120
    assert total == 0, {k: examples[k] for k in violations}


# --- 3. oracle equivalence ---------------------------------------------------------------

def test_oracle_equivalence(report):
    t0 = time.perf_counter()
    mismatches = Counter()
    for seed in range(300):
        kb = random_kb(random.Random(10**6 + seed), max_atoms=8, max_formulas=10)
        if i_hs(kb) != i_hs_bruteforce(kb):
            mismatches["hs"] += 1
        if i_c(kb) != i_c_bruteforce(kb):
            mismatches["c"] += 1
        if set(enumerate_mi(kb).mis) != minimal_inconsistent_subsets(kb):
            mismatches["mi"] += 1
    elapsed = time.perf_counter() - t0
    total = sum(mismatches.values())
    report("C3 oracle equivalence", total == 0 and elapsed < 300,
           f"300 KBs, {total} mismatches {dict(mismatches) or ''}, {elapsed:.1f}s")
    assert total == 0 and elapsed < 300


# --- 4. partitions and eta bounds ----------------------------------------------------------

def test_partition_and_eta_bounds(report):
    partition_bad = left_bad = right_bad = order_bad = bounded = 0
    for seed in range(200):
        rng = random.Random(2 * 10**6 + seed)
        pair = [random_kb(rng, max_atoms=8, max_formulas=8, depth=2, satisfiable=True) for _ in range(2)]
        hs_values, eta_values = [], []
        for kb in pair:
            h = i_hs(kb)
            e = i_eta(kb)
            hs_values.append(h)
            eta_values.append(e)
            if len(min_consistent_partition(kb)) != i_hs_bruteforce(kb) + 1:
                partition_bad += 1
            if 0 < h < math.inf:
                bounded += 1
                if not (1 - 1 / h < e + LP_TOL):
                    left_bad += 1
                if not (e <= 1 - 1 / (h + 1) + LP_TOL):
                    right_bad += 1
        for x, y in itertools.permutations(range(2)):
            if eta_values[x] <= eta_values[y] + LP_TOL and not hs_values[x] <= hs_values[y]:
                order_bad += 1
    total = partition_bad + left_bad + right_bad + order_bad
    report("C4 partitions and eta bounds", total == 0,
           f"200 pairs ({bounded} KBs with 0<I_hs<inf): partition {partition_bad}, left bound {left_bad}, "
           f"right bound {right_bad}, ordering {order_bad} violations")
    assert total == 0


# --- 5. window measures -------------------------------------------------------------------------

def window_values(kb, base, w, g, iterations):
    m = WindowMeasure(base, w, g)
    s = kb_stream(kb)
    return [m.step(s(i)) for i in range(iterations)]


def single_mi_kb(rng, size):
    """A minimal inconsistent KB with ``size`` formulas."""
    atoms = [f"p{i}" for i in range(size - 1)]
    signs = [rng.random() < 0.5 for _ in atoms]
    lits = [Atom(a) if s else Not(Atom(a)) for a, s in zip(atoms, signs)]
    closing = disjoin([Not(Atom(a)) if s else Atom(a) for a, s in zip(atoms, signs)])
    formulas = lits + [closing]
    rng.shuffle(formulas)
    return KnowledgeBase(formulas)


def test_window_properties(report):
    lower_bad = conv_bad = zero_bad = 0
    g_max, g_smooth = Aggregator("max"), Aggregator("smooth", 0.75)
    for seed in range(60):
        kb = random_kb(random.Random(3 * 10**6 + seed), max_atoms=5, max_formulas=6, min_formulas=2)
        n = len(kb)
        for base, exact in MEASURES.items():
            value = exact(kb)
            for w, g in itertools.product((1, 3, None), (g_max, g_smooth)):
                if not all(at_least(value, v) for v in window_values(kb, base, w, g, 3 * n)):
                    lower_bad += 1
            vals = window_values(kb, base, None, g_max, 3 * n)
            if not all(same(v, value) for v in vals[n - 1:]):
                conv_bad += 1
    for seed in range(40):
        rng = random.Random(4 * 10**6 + seed)
        size = rng.randint(2, 6)
        kb = single_mi_kb(rng, size)
        assert len(enumerate_mi(kb)) == 1 and len(enumerate_mi(kb).mis[0]) == size
        for base in MEASURES:
            for w in range(1, size):
                if any(v != 0 for v in window_values(kb, base, w, g_max, 10 * size)):
                    zero_bad += 1
    total = lower_bad + conv_bad + zero_bad
    report("C5 window measures", total == 0,
           f"lower bound {lower_bad}, one-pass convergence {conv_bad}, w<|M| stays zero {zero_bad} violations")
    assert total == 0


# --- 6. stream convergence ----------------------------------------------------------------------

def test_stream_convergence(report):
    t0 = time.perf_counter()
    within = {}
    finals = {}
    for family in ("hs", "c"):
        hits, values = 0, []
        for k in range(100):
            kb = sample(SampleSpec(200, 10, seed=5 * 10**6 + k, target=(family, 4)))
            m = make_measure(f"{family}:10:smooth:0.75:recip", kb.signature, seed=k)
            v = run_stream(m, kb_stream(kb), 3 * len(kb), cadence=len(kb)).final_value
            values.append(v)
            hits += abs(v - 4) <= 1
        within[family] = hits
        finals[family] = (min(values), sum(values) / len(values), max(values))
    elapsed = time.perf_counter() - t0
    ok = within["hs"] >= 90 and within["c"] >= 90 and elapsed < 600
    detail = "; ".join(f"S_{f}: {within[f]}/100 within +-1 of 4 (final min/mean/max "
                       f"{finals[f][0]:.2f}/{finals[f][1]:.2f}/{finals[f][2]:.2f})" for f in ("hs", "c"))
    report("C6 stream convergence", ok, f"{detail}, {elapsed:.1f}s")
    assert elapsed < 600
    assert within["hs"] >= 90, finals["hs"]
    assert within["c"] >= 90, finals["c"]


# --- 7. scalability -----------------------------------------------------------------------------

def test_scalability(report, tmp_path):
    cfg = ExperimentConfig(
        experiment="scalability",
        measures=["hs:5:smooth:0.75:recip", "hs:10:smooth:0.75:recip"],
        num_atoms=20, target="hs:10", sizes=list(range(500, 5001, 500)), trials=10,
        max_passes=3, tolerance=1.0, probe_cadence=500, master_seed=0,
    )
    res = run_experiment(cfg, tmp_path)
    m5, m10 = res.scalability["hs:5:smooth:0.75:recip"], res.scalability["hs:10:smooth:0.75:recip"]
    ratio = runtime_ratio(m5, m10)
    r2_ok = m5.r_squared >= 0.9 and m10.r_squared >= 0.9
    ratio_ok = 1.5 <= ratio <= 2.5
    report("C7 scalability", r2_ok and ratio_ok,
           f"R^2 m=5 {m5.r_squared:.3f}, m=10 {m10.r_squared:.3f} (>= 0.9); runtime ratio m=10/m=5 {ratio:.3f} "
           f"(in [1.5, 2.5]); converged {sum(m5.converged)}/100 and {sum(m10.converged)}/100")
    assert r2_ok, (m5.r_squared, m10.r_squared)
    assert ratio_ok, ratio


# --- 8. determinism ---------------------------------------------------------------------------------

def test_determinism(report, tmp_path):
    configs = {
        "runtime": dict(experiment="runtime", measures=["hs:5:smooth:0.75:recip", "c:5:smooth:0.75:recip",
                                                        "window:mi:5:max"],
                        num_formulas=60, num_atoms=8, trials=3, iterations=200, probe_cadence=20),
        "accuracy": dict(experiment="accuracy", measures=["hs:5:smooth:0.75:recip", "c:5:smooth:0.75:recip"],
                         target="hs:3", num_formulas=60, num_atoms=8, trials=3, iterations=180, probe_cadence=20),
        "scalability": dict(experiment="scalability", measures=["hs:5:smooth:0.75:recip"], target="hs:3",
                            num_atoms=8, sizes=[40, 80], trials=3, probe_cadence=20),
    }
    differing = []
    for name, kw in configs.items():
        outs = []
        for run in range(2):
            out = tmp_path / f"{name}-{run}"
            run_experiment(ExperimentConfig(master_seed=7, **kw), out)
            outs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
        if outs[0] != outs[1] or not outs[0]:
            differing.append(name)
    report("C8 determinism", not differing,
           f"records/accuracy/scalability CSVs byte-identical across repeated runs"
           + (f"; differing: {differing}" if differing else ""))
    assert not differing


# --- runtime ordering ------------------------------------------------------------------------------------

def test_runtime_ordering(report, tmp_path):
    population = ["hs:10:smooth:0.75:recip", "c:10:smooth:0.75:recip"]
    windows = [f"window:{b}:{w}:max" for b in ("mi", "mic") for w in (5, 10, 20)]
    cfg = ExperimentConfig(experiment="runtime", measures=population + windows, num_formulas=100, num_atoms=10,
                           trials=10, iterations=800, probe_cadence=100)
    res = run_experiment(cfg, tmp_path)
    per_it = {r.measure: r.per_iteration_ms for r in res.runtime}
    slowest_pop = max(per_it[m] for m in population)
    fastest_win = min(per_it[m] for m in windows)
    ok = slowest_pop < fastest_win
    report("Runtime ordering (population < window-MI per iteration)", ok,
           ", ".join(f"{m} {per_it[m]:.4f}ms" for m in population + windows)
           + f"; factor {fastest_win / slowest_pop:.1f}")
    assert ok
