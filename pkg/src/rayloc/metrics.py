"""Recall-at-threshold localization metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import EmptyDomainError
from .floorplan import TWO_PI, Pose

ANGULAR_GATE = math.pi / 6.0  # 30 degrees


@dataclass(frozen=True)
class EvalRecord:
    predicted: Pose
    ground_truth: Pose

    @property
    def position_error(self) -> float:
        return self.predicted.distance_to(self.ground_truth)

    @property
    def angular_error(self) -> float:
        """Wrapped absolute heading difference in [0, pi]."""
        delta = abs(self.predicted.theta - self.ground_truth.theta) % TWO_PI
        return min(delta, TWO_PI - delta)


@dataclass(frozen=True)
class EvalReport:
    recall_0_1m: float
    recall_0_5m: float
    recall_1m: float
    recall_1m_30deg: float
    n: int

    def as_dict(self) -> dict:
        return {
            "recall_0.1m": self.recall_0_1m,
            "recall_0.5m": self.recall_0_5m,
            "recall_1m": self.recall_1m,
            "recall_1m_30deg": self.recall_1m_30deg,
            "n": self.n,
        }


def evaluate(records: list[EvalRecord]) -> EvalReport:
    """Fraction of records with position error strictly below each threshold;
    the joint metric additionally requires angular error strictly below 30
    degrees."""
    if not records:
        raise EmptyDomainError("no evaluation records")
    n = len(records)
    hits = [0, 0, 0, 0]
    for record in records:
        err = record.position_error
        ang = record.angular_error
        if err < 0.1:
            hits[0] += 1
        if err < 0.5:
            hits[1] += 1
        if err < 1.0:
            hits[2] += 1
        if err < 1.0 and ang < ANGULAR_GATE:
            hits[3] += 1
    return EvalReport(
        recall_0_1m=hits[0] / n,
        recall_0_5m=hits[1] / n,
        recall_1m=hits[2] / n,
        recall_1m_30deg=hits[3] / n,
        n=n,
    )
