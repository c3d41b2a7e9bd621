"""Worst-case policy values over an outcome-level W1 ambiguity ball.

For policies taking values in {0, 1/2, 1} (1/2 = fair randomization between
arms), the worst case over distributions within W1 distance r of the training
distribution has a closed form: committing to an arm costs r, randomizing
costs r/2, so

    worst_case = mean over x of [ pi(x) mu1(x) + (1 - pi(x)) mu0(x)
                                  - r * 1{pi(x) != 1/2} - (r/2) * 1{pi(x) = 1/2} ].

``check_shift_equivalence`` verifies the exact identity with the abstaining
value: worst_case(pi, r) = V^(r/2)(pi with 1/2 replaced by *) - r.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Union

import numpy as np

from .errors import InputError
from .model import ABSTAIN, AbstainingPolicy, BinaryPolicy, _as_matrix

__all__ = [
    "RandomizingPolicy",
    "GridRandomizingPolicy",
    "ShiftCheck",
    "worst_case_value",
    "check_shift_equivalence",
]

RANDOMIZE = 0.5


class RandomizingPolicy:
    """A decision rule x -> {0, 1/2, 1}; 1/2 randomizes fairly between arms."""

    def decide(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @staticmethod
    def from_binary(policy: BinaryPolicy) -> "RandomizingPolicy":
        return _WrappedRandomizing(lambda x: policy.decide(x).astype(np.float64))

    @staticmethod
    def from_abstaining(policy: AbstainingPolicy) -> "RandomizingPolicy":
        def fn(x: np.ndarray) -> np.ndarray:
            labels = policy.decide(x).astype(np.float64)
            return np.where(labels == ABSTAIN, RANDOMIZE, labels)

        return _WrappedRandomizing(fn)


@dataclass(frozen=True)
class _WrappedRandomizing(RandomizingPolicy):
    fn: Callable[[np.ndarray], np.ndarray]

    def decide(self, x: np.ndarray) -> np.ndarray:
        out = np.asarray(self.fn(_as_matrix(x)), dtype=np.float64).ravel()
        _validate_levels(out)
        return out


@dataclass(frozen=True)
class GridRandomizingPolicy(RandomizingPolicy):
    """Explicit {0, 1/2, 1} assignment per enumerated covariate point."""

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        vals = np.asarray(self.values, dtype=np.float64).ravel()
        if pts.shape[0] != vals.shape[0]:
            raise InputError("points and values must align")
        _validate_levels(vals)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)
        lut = {pts[i].tobytes(): float(vals[i]) for i in range(pts.shape[0])}
        object.__setattr__(self, "_lut", lut)

    def decide(self, x: np.ndarray) -> np.ndarray:
        x = _as_matrix(x)
        lut: dict = self._lut  # type: ignore[attr-defined]
        out = np.empty(x.shape[0], dtype=np.float64)
        for i in range(x.shape[0]):
            val = lut.get(np.ascontiguousarray(x[i]).tobytes())
            if val is None:
                raise InputError("covariate point not in the policy's grid")
            out[i] = val
        return out


def _validate_levels(values: np.ndarray) -> None:
    if values.size and not np.all(np.isin(values, (0.0, 0.5, 1.0))):
        raise InputError("randomizing policies must output values in {0, 1/2, 1}")


class ShiftCheck(NamedTuple):
    lhs: float
    rhs: float
    gap: float


MeanPair = Union[tuple, Callable[[int, np.ndarray], np.ndarray]]


def _conditional_means(means: MeanPair, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if callable(means):
        return (
            np.asarray(means(0, x), dtype=np.float64).ravel(),
            np.asarray(means(1, x), dtype=np.float64).ravel(),
        )
    mu0, mu1 = means
    return (
        np.asarray(mu0, dtype=np.float64).ravel(),
        np.asarray(mu1, dtype=np.float64).ravel(),
    )


def worst_case_value(
    policy: RandomizingPolicy,
    x: np.ndarray,
    means: MeanPair,
    shift_radius: float,
) -> float:
    """Worst-case value of a {0, 1/2, 1} policy over the W1 ball.

    Args:
        policy: The randomizing policy.
        x: Covariate points to average over, shape (n, dim).
        means: Either a pair of arrays (mu0, mu1) aligned with x, or a
            callable (arm, x) -> means (e.g. a simulation oracle or a fitted
            nuisance's outcome function).
        shift_radius: Ambiguity radius r >= 0.
    """
    if shift_radius < 0:
        raise InputError("shift radius must be >= 0")
    x = _as_matrix(x)
    mu0, mu1 = _conditional_means(means, x)
    v = policy.decide(x)
    randomize = v == RANDOMIZE
    penalty = np.where(randomize, shift_radius / 2.0, shift_radius)
    return float(np.mean(v * mu1 + (1.0 - v) * mu0 - penalty))


def check_shift_equivalence(
    policy: RandomizingPolicy,
    x: np.ndarray,
    means: MeanPair,
    shift_radius: float,
) -> ShiftCheck:
    """Verify worst_case(pi, r) = V^(r/2)(star-converted pi) - r on a grid.

    Both sides are computed from the same conditional means; the identity is
    exact, so the gap is floating-point noise only.
    """
    x = _as_matrix(x)
    lhs = worst_case_value(policy, x, means, shift_radius)
    mu0, mu1 = _conditional_means(means, x)
    v = policy.decide(x)
    randomize = v == RANDOMIZE
    bonus = shift_radius / 2.0
    abstain_value = np.where(
        randomize, 0.5 * (mu0 + mu1) + bonus, v * mu1 + (1.0 - v) * mu0
    )
    rhs = float(np.mean(abstain_value)) - shift_radius
    return ShiftCheck(lhs=lhs, rhs=rhs, gap=abs(lhs - rhs))
