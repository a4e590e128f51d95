"""Command line interface: ``inkstream measure|stream|sample|bench``.

Exit codes: 0 success, 1 usage error, 2 unreadable or malformed input,
3 budget or timeout exhausted.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import sat
from .formula import DuplicateFormulaError, FormulaSyntaxError, KnowledgeBase, UnknownAtomError
from .measures import MEASURES, ContradictionPresent, MeasureTimeout, evaluate, format_value
from .sat import BudgetExceeded, SignatureTooLarge

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_BUDGET = 0, 1, 2, 3

log = logging.getLogger("inkstream")


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_kb(path: str) -> KnowledgeBase:
    try:
        return KnowledgeBase.from_file(path)
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror or e}") from None


def _clause_length(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("..")
    try:
        return (int(lo), int(hi)) if sep else (int(lo), int(lo))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO..HI, got {text!r}") from None


def cmd_measure(args) -> int:
    kb = _load_kb(args.kb)
    value = evaluate(args.measure, kb, time_budget=args.budget)
    print(format_value(value))
    return EXIT_OK


def cmd_stream(args) -> int:
    from .stream import StreamSpecError, kb_stream, make_measure, run_stream, write_trace_csv

    kb = _load_kb(args.kb)
    try:
        measure = make_measure(args.measure, kb.signature, args.seed, time_budget=args.timeout)
    except StreamSpecError as e:
        raise UsageError(str(e)) from None
    if args.iterations < 1:
        raise UsageError("--iterations must be at least 1")
    trace = run_stream(measure, kb_stream(kb), args.iterations, args.cadence, timeout=args.timeout)
    if args.trace:
        write_trace_csv(args.trace, trace, measure.spec, Path(args.kb).stem, args.seed)
    print(format_value(trace.final_value))
    if trace.aborted:
        print(f"aborted after {trace.iterations_done} iterations: per-iteration timeout", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_OK


def cmd_sample(args) -> int:
    from .formula import kb_to_dimacs
    from .sampler import SampleSpec, sample, write_kb

    try:
        target = SampleSpec.parse_target(args.target) if args.target else None
        spec = SampleSpec(args.formulas, args.atoms, args.clause_length, args.seed, target)
        kb = sample(spec)
        if args.out:
            write_kb(kb, args.out, dimacs=args.dimacs)
        else:
            sys.stdout.write(kb_to_dimacs(kb) if args.dimacs else kb.to_text())
    except ValueError as e:
        # includes an exhausted sample space and DIMACS export of non-clausal samples
        raise UsageError(str(e)) from None
    return EXIT_OK


def cmd_bench(args) -> int:
    from .bench import ExperimentConfig, run_experiment

    try:
        cfg = ExperimentConfig.load(args.config)
    except OSError as e:
        raise InputError(f"cannot read {args.config}: {e.strerror or e}") from None
    if args.workers is not None:
        if args.workers < 1:
            raise UsageError("--workers must be at least 1")
        cfg.workers = args.workers
    try:
        result = run_experiment(cfg, args.out)
    except ValueError as e:
        # bad measure spec or impossible sample request inside the config
        raise InputError(f"{args.config}: {e}") from None
    sys.stdout.write(result.summary)
    print(f"outputs written to {result.output_dir}")
    return EXIT_BUDGET if any(r.aborted for r in result.results) else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="inkstream", description="Inconsistency measures for knowledge bases and formula streams.")
    p.add_argument("--sat", metavar="BACKEND", help="SAT backend: 'dpll' (default) or 'external:PATH'")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("measure", help="compute an exact inconsistency measure")
    m.add_argument("--kb", required=True, help="knowledge base file (one formula per line, or .cnf DIMACS)")
    m.add_argument("--measure", required=True, choices=sorted(MEASURES))
    m.add_argument("--budget", type=float, default=None, help="time budget in seconds")
    m.set_defaults(func=cmd_measure)

    s = sub.add_parser("stream", help="run a stream measure over the KB-stream of a file")
    s.add_argument("--kb", required=True)
    s.add_argument("--measure", required=True, help="window:BASE:W:G, hs:M:G:F or c:M:G:F")
    s.add_argument("--iterations", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--trace", help="write the sampled trace to this CSV file")
    s.add_argument("--cadence", type=int, default=100, help="trace sampling cadence (default 100)")
    s.add_argument("--timeout", type=float, default=None, help="per-iteration timeout in seconds")
    s.set_defaults(func=cmd_stream)

    g = sub.add_parser("sample", help="sample a random knowledge base")
    g.add_argument("--formulas", type=int, required=True)
    g.add_argument("--atoms", type=int, required=True)
    g.add_argument("--target", help="hs:V or c:T for a prescribed inconsistency value")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--clause-length", type=_clause_length, default=(2, 4), metavar="LO..HI")
    g.add_argument("--out", help="output file (default: stdout)")
    g.add_argument("--dimacs", action="store_true", help="write DIMACS CNF (random CNF samples only)")
    g.set_defaults(func=cmd_sample)

    b = sub.add_parser("bench", help="run an experiment described by a TOML config")
    b.add_argument("--config", required=True)
    b.add_argument("--out", help="output directory (overrides output_dir)")
    b.add_argument("--workers", type=int, default=None)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    from .bench import ConfigError
    from .stream import ContradictoryFormula

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # usage errors exit 1, --help exits 0
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    previous = None
    try:
        if args.sat:
            try:
                previous = sat.set_backend(sat.backend_from_spec(args.sat))
            except ValueError as e:
                raise UsageError(str(e)) from None
        return args.func(args)
    except UsageError as e:
        print(f"inkstream: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, FormulaSyntaxError, UnknownAtomError, DuplicateFormulaError, ConfigError,
            ContradictionPresent, ContradictoryFormula) as e:
        print(f"inkstream: input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (MeasureTimeout, BudgetExceeded, SignatureTooLarge) as e:
        print(f"inkstream: budget exhausted: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except (OSError, RuntimeError) as e:
        # e.g. an external solver that cannot be started or gives no verdict
        print(f"inkstream: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        if previous is not None:
            sat.set_backend(previous)


if __name__ == "__main__":
    sys.exit(main())
