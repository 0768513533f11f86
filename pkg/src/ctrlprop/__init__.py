"""Controlled propagation of complex finite-domain constraints.

Complex constraints built from primitives with or/and/not are decomposed
lazily: a subconstraint is only expanded, and a primitive only queried, when
its truth or falsity is asserted or asked for.  An eager, uncontrolled
baseline is available for comparison.
"""

from .constraints import (
    FALSE,
    TRUE,
    And,
    Const,
    Eq,
    EqConst,
    Leq,
    Lt,
    Member,
    Neq,
    Not,
    Or,
    OrImplied,
    Prim,
    all_of,
    any_of,
    evaluate,
    to_eager,
)
from .control import CF, CT, IR, ControlStore
from .domains import ANY, INST, MAX, MIN, DomainStore, FiniteDomain, Inconsistency, Trail, UsageError
from .kernel import Counters, Solver, is_relevant
from .library import (
    build_alldifferent_tp,
    build_clause,
    build_different_tp,
    build_lex,
    build_uncontrolled,
)
from .search import SearchConfig, emit_trace, random_search, run_benchmark

__version__ = "0.1.0"
