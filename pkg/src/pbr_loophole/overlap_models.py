"""Single-system overlap probability under the two epistemicity measures."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class ModelKind(str, Enum):
    OMEGA = "omega"  # p = Omega * |<psi_2|psi_1>|^2
    K = "k"  # p = k * (1 - sin theta)


@dataclass(frozen=True)
class EpistemicModel:
    kind: ModelKind
    parameter: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if not 0.0 <= self.parameter <= 1.0:
            raise ValueError(f"model parameter must lie in [0, 1], got {self.parameter}")

    @classmethod
    def omega(cls, value: float = 1.0) -> EpistemicModel:
        return cls(ModelKind.OMEGA, value)

    @classmethod
    def k(cls, value: float = 1.0) -> EpistemicModel:
        return cls(ModelKind.K, value)


def _check_theta(theta: float) -> None:
    if not 0.0 < theta < math.pi / 2:
        raise ValueError(f"theta must lie in (0, pi/2), got {theta}")


def overlap_shape(kind: ModelKind | str, theta: float) -> float:
    """Overlap of the maximal model (parameter 1) at angle ``theta``."""
    _check_theta(theta)
    if ModelKind(kind) is ModelKind.OMEGA:
        return math.cos(theta) ** 2
    return 1.0 - math.sin(theta)


def overlap_p(model: EpistemicModel, theta: float) -> float:
    return model.parameter * overlap_shape(model.kind, theta)


def invert_parameter(kind: ModelKind | str, p: float, theta: float) -> float:
    """Model parameter that yields overlap ``p`` at ``theta``.

    Values above 1 are returned as-is; they mean no model of this kind
    reaches that overlap.
    """
    if p < 0:
        raise ValueError(f"overlap probability must be nonnegative, got {p}")
    return p / overlap_shape(kind, theta)
