"""Closed-form threshold mathematics.

The chain is: angle -> minimal qubit count -> single-system overlap p ->
critical efficiency ``(1 - p**n) ** (1/n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .overlap_models import EpistemicModel, ModelKind, invert_parameter, overlap_p

# Slack on the continuous qubit count 1/log2(1 + tan(theta/2)) before taking the
# ceiling. Absorbs roundoff at branch points (theta_min(2) evaluates to pi/4 + 2e-16)
# and angles quoted to 6 decimals, e.g. 0.785398.
_BRANCH_GUARD = 1e-6

DEFAULT_N_MAX = 50


@dataclass(frozen=True)
class ThresholdPoint:
    theta: float
    n: int
    p: float
    eta: float

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if abs(self.eta - critical_efficiency(self.p, self.n)) > 1e-12:
            raise ValueError("eta is inconsistent with (p, n)")


@dataclass(frozen=True)
class DesignOptimum:
    n_star: int
    theta_min: float
    eta: float
    kind: ModelKind


def critical_efficiency(p: float, n: int) -> float:
    """Largest detector efficiency at which overlap runs can all be hidden.

    Overlap on all ``n`` subsystems happens with probability ``p**n`` and must
    fit inside the no-click budget ``1 - eta**n``.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return (1.0 - p**n) ** (1.0 / n)


def theta_min(n: int) -> float:
    """Smallest state angle for which an n-qubit circuit forbids one outcome per preparation."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    return 2.0 * math.atan(2.0 ** (1.0 / n) - 1.0)


def min_qubits(theta: float) -> int:
    if not 0.0 < theta < math.pi / 2:
        raise ValueError(f"theta must lie in (0, pi/2), got {theta}")
    continuous = 1.0 / math.log2(1.0 + math.tan(theta / 2.0))
    return max(2, math.ceil(continuous - _BRANCH_GUARD))


def eta_of_theta(theta: float, model: EpistemicModel) -> ThresholdPoint:
    n = min_qubits(theta)
    p = overlap_p(model, theta)
    return ThresholdPoint(theta=theta, n=n, p=p, eta=critical_efficiency(p, n))


def optimal_design(model: EpistemicModel, n_max: int = DEFAULT_N_MAX) -> DesignOptimum:
    """Qubit count (and its minimal angle) giving the lowest critical efficiency."""
    if n_max < 2:
        raise ValueError(f"n_max must be >= 2, got {n_max}")
    best: DesignOptimum | None = None
    for n in range(2, n_max + 1):
        theta = theta_min(n)
        eta = critical_efficiency(overlap_p(model, theta), n)
        # strict '<' keeps the smaller n on ties
        if best is None or eta < best.eta:
            best = DesignOptimum(n_star=n, theta_min=theta, eta=eta, kind=model.kind)
    assert best is not None
    return best


def critical_model_parameter(
    eta: float,
    kind: ModelKind | str,
    reoptimize: bool = False,
    n_max: int = DEFAULT_N_MAX,
) -> float:
    """Smallest model parameter ruled out by detectors of efficiency ``eta``.

    By default the design is pinned at the optimum for the maximal model of
    this kind (n=4 for Omega, n=3 for k). With ``reoptimize`` the design is the
    one minimizing the critical parameter at this ``eta``. A result above 1
    means every model of this kind survives.
    """
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    kind = ModelKind(kind)
    if reoptimize:
        designs = [(n, theta_min(n)) for n in range(2, n_max + 1)]
    else:
        opt = optimal_design(EpistemicModel(kind, 1.0), n_max)
        designs = [(opt.n_star, opt.theta_min)]
    values = []
    for n, theta in designs:
        p_crit = (1.0 - eta**n) ** (1.0 / n)
        values.append(invert_parameter(kind, p_crit, theta))
    return min(values)


def mermin_threshold(n: int) -> float:
    """Efficiency needed to violate the n-partite Mermin inequality, for comparison."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    return n / (2 * n - 1)


def sweep_eta_theta(
    model: EpistemicModel, theta_lo: float, theta_hi: float, steps: int
) -> list[ThresholdPoint]:
    if not 0.0 < theta_lo < theta_hi < math.pi / 2:
        raise ValueError("need 0 < theta_lo < theta_hi < pi/2")
    if steps < 2:
        raise ValueError(f"steps must be >= 2, got {steps}")
    return [eta_of_theta(float(t), model) for t in np.linspace(theta_lo, theta_hi, steps)]


def table_one(n_values: range = range(2, 8)) -> list[tuple[float, int, float, float]]:
    """Rows ``(theta_min, n_star, eta_omega, eta_k)`` for the maximal models."""
    rows = []
    omega, k = EpistemicModel.omega(1.0), EpistemicModel.k(1.0)
    for n in n_values:
        theta = theta_min(n)
        rows.append(
            (
                theta,
                n,
                critical_efficiency(overlap_p(omega, theta), n),
                critical_efficiency(overlap_p(k, theta), n),
            )
        )
    return rows
