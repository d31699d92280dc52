"""Symbolic interval bounds on the moments of cost accumulators in
probabilistic programs, with central-moment and tail-probability
post-processing and a Monte-Carlo validation oracle."""

from .lang import parse_program, pretty_print, validate
from .interp import estimate_moments, run_trace, step, RandomSource
from .analysis import analyze_program
from .contexts import infer_contexts
from .soundness import check_bounded_update, check_soundness, check_termination_moment
from .postproc import central_upper, tail_cantelli, tail_chebyshev, tail_curve, tail_markov
from .cli import run_analyze, run_bench

__all__ = [
    "parse_program", "pretty_print", "validate",
    "estimate_moments", "run_trace", "step", "RandomSource",
    "analyze_program", "infer_contexts",
    "check_soundness", "check_termination_moment", "check_bounded_update",
    "central_upper", "tail_markov", "tail_cantelli", "tail_chebyshev", "tail_curve",
    "run_analyze", "run_bench",
]
