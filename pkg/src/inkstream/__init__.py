"""Exact and stream-based inconsistency measures for propositional knowledge bases."""

from .formula import (
    FALSE,
    And,
    Atom,
    Formula,
    Interpretation,
    KnowledgeBase,
    Not,
    Or,
    Signature,
    ThreeValuedInterpretation,
    TruthValue,
    parse_formula,
    parse_kb,
)
from .measures import evaluate, i_c, i_eta, i_hs, i_mi, i_mi_c
from .mus import enumerate_mi
from .sampler import SampleSpec, sample
from .stream import kb_stream, make_measure, run_stream

__version__ = "0.1.0"

__all__ = [
    "FALSE", "And", "Atom", "Formula", "Interpretation", "KnowledgeBase", "Not", "Or",
    "Signature", "ThreeValuedInterpretation", "TruthValue", "parse_formula", "parse_kb",
    "evaluate", "i_c", "i_eta", "i_hs", "i_mi", "i_mi_c", "enumerate_mi",
    "SampleSpec", "sample", "kb_stream", "make_measure", "run_stream",
]
