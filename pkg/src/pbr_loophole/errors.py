from __future__ import annotations


class InfeasibleError(Exception):
    """Valid input with no solution.

    ``residual`` is how far the best attempt misses: the best achievable
    forbidden-outcome probability for the circuit search, or the budget
    violation ``p**n - (1 - eta**n)`` for the adversary construction.
    """

    def __init__(self, message: str, residual: float, best=None):
        super().__init__(message)
        self.residual = residual
        self.best = best
