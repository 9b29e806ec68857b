"""Asynchronous and distributed data augmentation samplers."""

from .engine import (
    DAKernel,
    DelayModel,
    DrawMatrix,
    RunStats,
    SelectionPolicy,
    estimated_r,
    run_chain,
    select_wait_count,
)
from .errors import ChainError, DomainError, FactorizationError

__all__ = [
    "DAKernel", "DelayModel", "DrawMatrix", "RunStats", "SelectionPolicy",
    "estimated_r", "run_chain", "select_wait_count",
    "ChainError", "DomainError", "FactorizationError",
]
