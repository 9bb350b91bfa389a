from .core import (
    LE, EQ, GE,
    LPResult,
    LPStatus,
    SolverConfig,
    StandardLP,
    Workspace,
    certificate_gap,
    dump_lp,
    solve_lp,
)

__all__ = [
    "LE", "EQ", "GE",
    "LPResult", "LPStatus", "SolverConfig", "StandardLP", "Workspace",
    "certificate_gap", "dump_lp", "solve_lp",
]
