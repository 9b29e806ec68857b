"""Exception types shared across the package."""

import numpy as np


class DomainError(ValueError):
    """A distribution or model parameter lies outside its support."""


class FactorizationError(np.linalg.LinAlgError):
    """A matrix that must be symmetric positive definite failed Cholesky."""


class ChainError(RuntimeError):
    """A sampler run aborted; ``iteration`` is the failing 0-based cycle index."""

    def __init__(self, message, iteration=None, worker=None):
        super().__init__(message)
        self.iteration = iteration
        self.worker = worker
