"""Core domain types: samples, datasets, policies, policy classes, nuisances.

Provides:

- ``Sample`` / ``Dataset``: logged observations (x, d, y) with optional known
  propensities, an overlap bound ``kappa``, and CSV round-tripping.
- Binary treatment policies (axis threshold, linear threshold, table,
  constant), the abstaining wrapper built from a (base, member) pair, and the
  composite policies used downstream (baseline imputation, margin splice).
- ``PolicyClass``: a finite enumeration of binary policies with a declared
  VC dimension, materialized as a label matrix for vectorized evaluation.
- ``NuisanceModel``: an (outcome regression, propensity) pair with clipped
  propensity outputs.
- JSON (de)serialization for policies with a ``kind`` discriminator.

All types are immutable after construction; policy evaluation is pure, so
everything here is safe to share across threads.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Sequence, Union

import numpy as np

from .errors import InputError

#: Label emitted by abstaining policies where they defer the decision.
ABSTAIN = -1

_PROP_TOL = 1e-9


def _as_matrix(x: np.ndarray | Sequence[float]) -> np.ndarray:
    """Coerce a covariate input to a 2-D float array (n, dim)."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise InputError(f"covariates must be 1-D or 2-D, got ndim={arr.ndim}")
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# Samples and datasets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Sample:
    """A single logged observation (x, d, y) with an optional known propensity."""

    x: np.ndarray
    d: int
    y: float
    propensity: Optional[float] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", _frozen(np.asarray(self.x, dtype=np.float64).ravel()))
        if self.d not in (0, 1):
            raise InputError(f"treatment indicator must be 0 or 1, got {self.d}")


@dataclass(frozen=True)
class Dataset:
    """Logged observations held as column arrays.

    Args:
        x: Covariates, shape (n, dim).
        d: Treatment indicators in {0, 1}, shape (n,).
        y: Outcomes, shape (n,).
        kappa: Declared overlap bound, in (0, 0.5].
        propensity: Known P(D=1|X) per sample (or None if unknown); when
            present every value must lie in [kappa, 1-kappa].
        bounded_outcomes: Whether outcomes are guaranteed to lie in [0, 1];
            operations relying on [0, 1] boundedness only do so when set.
        tag: Identity tag used to assert disjointness between nuisance-fitting
            data and learning data.
    """

    x: np.ndarray
    d: np.ndarray
    y: np.ndarray
    kappa: float
    propensity: Optional[np.ndarray] = None
    bounded_outcomes: bool = False
    tag: Optional[str] = None

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim != 2:
            raise InputError("x must be 2-D (n, dim)")
        n = x.shape[0]
        if n == 0:
            raise InputError("dataset must contain at least one sample")
        d = np.asarray(self.d, dtype=np.int8).ravel()
        y = np.asarray(self.y, dtype=np.float64).ravel()
        if d.shape[0] != n or y.shape[0] != n:
            raise InputError("x, d, y must have matching first dimensions")
        if not np.all((d == 0) | (d == 1)):
            raise InputError("treatment indicators must be in {0, 1}")
        if not (0.0 < self.kappa <= 0.5):
            raise InputError(f"kappa must lie in (0, 0.5], got {self.kappa}")
        prop = self.propensity
        if prop is not None:
            prop = np.asarray(prop, dtype=np.float64).ravel()
            if prop.shape[0] != n:
                raise InputError("propensity must have one entry per sample")
            lo, hi = self.kappa - _PROP_TOL, 1.0 - self.kappa + _PROP_TOL
            if np.any(prop < lo) or np.any(prop > hi):
                raise InputError(
                    f"propensities must lie in [{self.kappa}, {1 - self.kappa}]"
                )
            object.__setattr__(self, "propensity", _frozen(prop))
        if self.bounded_outcomes and (np.any(y < -_PROP_TOL) or np.any(y > 1 + _PROP_TOL)):
            raise InputError("bounded_outcomes is set but outcomes fall outside [0, 1]")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "d", _frozen(d))
        object.__setattr__(self, "y", _frozen(y))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def has_propensity(self) -> bool:
        return self.propensity is not None

    def sample(self, i: int) -> Sample:
        p = None if self.propensity is None else float(self.propensity[i])
        return Sample(x=self.x[i], d=int(self.d[i]), y=float(self.y[i]), propensity=p)

    def iter_samples(self) -> Iterator[Sample]:
        return (self.sample(i) for i in range(self.n))

    def subset(self, idx: np.ndarray) -> "Dataset":
        """Row subset; the tag derives from the parent tag and the index set."""
        idx = np.asarray(idx, dtype=np.intp)
        tag = self.tag
        if tag is not None:
            digest = hashlib.sha1(np.sort(idx).tobytes()).hexdigest()[:8]
            tag = f"{tag}#{digest}"
        prop = None if self.propensity is None else self.propensity[idx]
        return Dataset(
            x=self.x[idx], d=self.d[idx], y=self.y[idx], kappa=self.kappa,
            propensity=prop, bounded_outcomes=self.bounded_outcomes, tag=tag,
        )

    @classmethod
    def from_samples(
        cls,
        samples: Sequence[Sample],
        kappa: float,
        bounded_outcomes: bool = False,
        tag: Optional[str] = None,
    ) -> "Dataset":
        if not samples:
            raise InputError("cannot build a dataset from zero samples")
        dims = {s.x.shape[0] for s in samples}
        if len(dims) != 1:
            raise InputError(f"samples mix covariate dimensions: {sorted(dims)}")
        have_prop = [s.propensity is not None for s in samples]
        if any(have_prop) and not all(have_prop):
            raise InputError("either all samples carry a propensity or none do")
        prop = (
            np.array([s.propensity for s in samples], dtype=np.float64)
            if all(have_prop)
            else None
        )
        return cls(
            x=np.stack([s.x for s in samples]),
            d=np.array([s.d for s in samples], dtype=np.int8),
            y=np.array([s.y for s in samples], dtype=np.float64),
            kappa=kappa,
            propensity=prop,
            bounded_outcomes=bounded_outcomes,
            tag=tag,
        )

    # -- CSV format: header x0,...,x{dim-1},d,y[,prop] ----------------------

    def to_csv(self, path_or_buf) -> None:
        """Write the dataset in the canonical CSV format."""
        close = False
        if isinstance(path_or_buf, (str, bytes)):
            buf = open(path_or_buf, "w", newline="", encoding="utf-8")
            close = True
        else:
            buf = path_or_buf
        try:
            writer = csv.writer(buf, lineterminator="\n")
            header = [f"x{j}" for j in range(self.dim)] + ["d", "y"]
            if self.propensity is not None:
                header.append("prop")
            writer.writerow(header)
            for i in range(self.n):
                row = [format(v, ".17g") for v in self.x[i]]
                row.append(str(int(self.d[i])))
                row.append(format(self.y[i], ".17g"))
                if self.propensity is not None:
                    row.append(format(self.propensity[i], ".17g"))
                writer.writerow(row)
        finally:
            if close:
                buf.close()

    @classmethod
    def from_csv(
        cls,
        path_or_buf,
        kappa: float,
        bounded_outcomes: bool = False,
        tag: Optional[str] = None,
    ) -> "Dataset":
        """Read a dataset from the canonical CSV format."""
        close = False
        if isinstance(path_or_buf, (str, bytes)):
            buf = open(path_or_buf, "r", newline="", encoding="utf-8")
            close = True
        else:
            buf = path_or_buf
        try:
            reader = csv.reader(buf)
            header = next(reader, None)
            if header is None:
                raise InputError("empty CSV")
            header = [h.strip() for h in header]
            has_prop = header[-1] == "prop"
            expected_dim = len(header) - (3 if has_prop else 2)
            expected = [f"x{j}" for j in range(expected_dim)] + ["d", "y"]
            if has_prop:
                expected.append("prop")
            if header != expected:
                raise InputError(
                    f"unexpected CSV header {header!r}; expected {expected!r}"
                )
            rows = [r for r in reader if r]
        finally:
            if close:
                buf.close()
        if not rows:
            raise InputError("CSV contains no data rows")
        data = np.array(rows, dtype=np.float64)
        x = data[:, :expected_dim]
        d = data[:, expected_dim]
        y = data[:, expected_dim + 1]
        prop = data[:, expected_dim + 2] if has_prop else None
        return cls(
            x=x, d=d.astype(np.int8), y=y, kappa=kappa, propensity=prop,
            bounded_outcomes=bounded_outcomes, tag=tag,
        )

    def to_csv_string(self) -> str:
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------


class BinaryPolicy:
    """A deterministic decision rule x -> {0, 1}.

    Subclasses implement ``decide`` on 2-D covariate arrays; single-point
    evaluation goes through ``evaluate_policy``.
    """

    kind: str = ""

    def decide(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def expected_dim(self) -> Optional[int]:
        """Covariate dimension this policy requires, if it pins one."""
        return None

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantPolicy(BinaryPolicy):
    label: int

    kind = "constant"

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise InputError("constant policy label must be 0 or 1")

    def decide(self, x: np.ndarray) -> np.ndarray:
        x = _as_matrix(x)
        return np.full(x.shape[0], self.label, dtype=np.int8)

    def to_json(self) -> dict:
        return {"kind": "constant", "label": int(self.label)}


@dataclass(frozen=True)
class AxisThresholdPolicy(BinaryPolicy):
    """Treat iff the feature is above (or at/below) a threshold.

    direction "above": 1{x_j > t}; direction "below": 1{x_j <= t}.
    """

    feature: int
    threshold: float
    direction: str = "above"

    kind = "axis"

    def __post_init__(self) -> None:
        if self.direction not in ("above", "below"):
            raise InputError(f"direction must be 'above' or 'below', got {self.direction!r}")
        if self.feature < 0:
            raise InputError("feature index must be nonnegative")

    def decide(self, x: np.ndarray) -> np.ndarray:
        x = _as_matrix(x)
        if self.feature >= x.shape[1]:
            raise InputError(
                f"policy needs feature {self.feature} but covariates have dim {x.shape[1]}"
            )
        above = x[:, self.feature] > self.threshold
        labels = above if self.direction == "above" else ~above
        return labels.astype(np.int8)

    def to_json(self) -> dict:
        return {
            "kind": "axis",
            "feature": int(self.feature),
            "threshold": float(self.threshold),
            "direction": self.direction,
        }


@dataclass(frozen=True)
class LinearThresholdPolicy(BinaryPolicy):
    """Treat iff w.x + b > 0."""

    weights: np.ndarray
    intercept: float

    kind = "linear"

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "weights", _frozen(np.asarray(self.weights, dtype=np.float64).ravel())
        )

    def expected_dim(self) -> Optional[int]:
        return self.weights.shape[0]

    def decide(self, x: np.ndarray) -> np.ndarray:
        x = _as_matrix(x)
        if x.shape[1] != self.weights.shape[0]:
            raise InputError(
                f"policy expects dim {self.weights.shape[0]}, got {x.shape[1]}"
            )
        return (x @ self.weights + self.intercept > 0).astype(np.int8)

    def to_json(self) -> dict:
        return {
            "kind": "linear",
            "weights": [float(w) for w in self.weights],
            "intercept": float(self.intercept),
        }


@dataclass(frozen=True)
class TablePolicy(BinaryPolicy):
    """Explicit label per enumerated covariate point (exact match).

    Points not in the table take ``default`` when provided, otherwise
    evaluation raises.
    """

    points: np.ndarray
    labels: np.ndarray
    default: Optional[int] = None

    kind = "table"

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        labels = np.asarray(self.labels, dtype=np.int8).ravel()
        if pts.shape[0] != labels.shape[0]:
            raise InputError("points and labels must align")
        if labels.size and not np.all((labels == 0) | (labels == 1)):
            raise InputError("table labels must be in {0, 1}")
        if self.default is not None and self.default not in (0, 1):
            raise InputError("table default label must be 0, 1 or None")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "labels", _frozen(labels))
        lut = {pts[i].tobytes(): int(labels[i]) for i in range(pts.shape[0])}
        object.__setattr__(self, "_lut", lut)

    def expected_dim(self) -> Optional[int]:
        return self.points.shape[1] if self.points.size else None

    def decide(self, x: np.ndarray) -> np.ndarray:
        x = _as_matrix(x)
        dim = self.expected_dim()
        if dim is not None and x.shape[1] != dim:
            raise InputError(f"policy expects dim {dim}, got {x.shape[1]}")
        lut: dict = self._lut  # type: ignore[attr-defined]
        out = np.empty(x.shape[0], dtype=np.int8)
        for i in range(x.shape[0]):
            label = lut.get(np.ascontiguousarray(x[i]).tobytes(), self.default)
            if label is None:
                raise InputError(
                    "covariate point not in table and no default label set"
                )
            out[i] = label
        return out

    def to_json(self) -> dict:
        return {
            "kind": "table",
            "points": [[float(v) for v in row] for row in self.points],
            "labels": [int(v) for v in self.labels],
            "default": None if self.default is None else int(self.default),
        }


@dataclass(frozen=True)
class AbstainingPolicy:
    """Abstain exactly where ``member`` disagrees with ``base``.

    Output is member(x) (= base(x)) where the two agree, ABSTAIN elsewhere,
    so the abstention region is exactly the disagreement set.
    """

    base: BinaryPolicy
    member: BinaryPolicy

    kind = "abstaining"

    def decide(self, x: np.ndarray) -> np.ndarray:
        x = _as_matrix(x)
        base = self.base.decide(x)
        member = self.member.decide(x)
        return np.where(member == base, member, ABSTAIN).astype(np.int8)

    def abstains(self, x: np.ndarray) -> np.ndarray:
        x = _as_matrix(x)
        return self.base.decide(x) != self.member.decide(x)

    def to_json(self) -> dict:
        return {
            "kind": "abstaining",
            "base": self.base.to_json(),
            "member": self.member.to_json(),
        }


@dataclass(frozen=True)
class ImputedPolicy(BinaryPolicy):
    """Binary policy equal to ``fallback`` where ``decision`` abstains."""

    decision: AbstainingPolicy
    fallback: BinaryPolicy

    kind = "imputed"

    def decide(self, x: np.ndarray) -> np.ndarray:
        x = _as_matrix(x)
        labels = self.decision.decide(x)
        mask = labels == ABSTAIN
        if np.any(mask):
            labels = labels.copy()
            labels[mask] = self.fallback.decide(x[mask])
        return labels.astype(np.int8)

    def to_json(self) -> dict:
        return {
            "kind": "imputed",
            "decision": self.decision.to_json(),
            "fallback": self.fallback.to_json(),
        }


@dataclass(frozen=True)
class SplicedPolicy(BinaryPolicy):
    """Margin-wrapper splice: the abstaining stage's label off its abstention
    region, a refinement rule on it (with a fallback for unseen points)."""

    decision: AbstainingPolicy
    refine: BinaryPolicy
    fallback: Optional[BinaryPolicy] = None

    kind = "spliced"

    def decide(self, x: np.ndarray) -> np.ndarray:
        x = _as_matrix(x)
        labels = self.decision.decide(x)
        mask = labels == ABSTAIN
        if np.any(mask):
            labels = labels.copy()
            sub = x[mask]
            if isinstance(self.refine, TablePolicy) and self.fallback is not None:
                lut: dict = self.refine._lut  # type: ignore[attr-defined]
                filled = np.empty(sub.shape[0], dtype=np.int8)
                missing = np.zeros(sub.shape[0], dtype=bool)
                for i in range(sub.shape[0]):
                    hit = lut.get(np.ascontiguousarray(sub[i]).tobytes())
                    if hit is None:
                        missing[i] = True
                    else:
                        filled[i] = hit
                if np.any(missing):
                    filled[missing] = self.fallback.decide(sub[missing])
                labels[mask] = filled
            else:
                labels[mask] = self.refine.decide(sub)
        return labels.astype(np.int8)

    def to_json(self) -> dict:
        out = {
            "kind": "spliced",
            "decision": self.decision.to_json(),
            "refine": self.refine.to_json(),
        }
        if self.fallback is not None:
            out["fallback"] = self.fallback.to_json()
        return out


Policy = Union[BinaryPolicy, AbstainingPolicy]


def evaluate_policy(policy: Policy, x: np.ndarray | Sequence[float]) -> int:
    """Evaluate a policy at a single covariate point.

    Returns 0 or 1 for binary policies; abstaining policies may also return
    ABSTAIN. Dimension mismatches raise InputError.
    """
    arr = np.asarray(x, dtype=np.float64).ravel().reshape(1, -1)
    return int(policy.decide(arr)[0])


def disagreement_mass(p1: BinaryPolicy, p2: BinaryPolicy, data: Dataset) -> float:
    """Fraction of the dataset's samples on which two policies disagree."""
    return float(np.mean(p1.decide(data.x) != p2.decide(data.x)))


# ---------------------------------------------------------------------------
# Policy JSON round-trip
# ---------------------------------------------------------------------------


def policy_from_json(obj: Union[dict, str]) -> Policy:
    """Reconstruct a policy from its JSON object (or JSON string)."""
    if isinstance(obj, str):
        obj = json.loads(obj)
    if not isinstance(obj, dict) or "kind" not in obj:
        raise InputError("policy JSON must be an object with a 'kind' field")
    kind = obj["kind"]
    if kind == "constant":
        return ConstantPolicy(label=int(obj["label"]))
    if kind == "axis":
        return AxisThresholdPolicy(
            feature=int(obj["feature"]),
            threshold=float(obj["threshold"]),
            direction=str(obj["direction"]),
        )
    if kind == "linear":
        return LinearThresholdPolicy(
            weights=np.asarray(obj["weights"], dtype=np.float64),
            intercept=float(obj["intercept"]),
        )
    if kind == "table":
        return TablePolicy(
            points=np.asarray(obj["points"], dtype=np.float64),
            labels=np.asarray(obj["labels"], dtype=np.int8),
            default=None if obj.get("default") is None else int(obj["default"]),
        )
    if kind == "abstaining":
        base = policy_from_json(obj["base"])
        member = policy_from_json(obj["member"])
        return AbstainingPolicy(base=base, member=member)  # type: ignore[arg-type]
    if kind == "imputed":
        decision = policy_from_json(obj["decision"])
        fallback = policy_from_json(obj["fallback"])
        return ImputedPolicy(decision=decision, fallback=fallback)  # type: ignore[arg-type]
    if kind == "spliced":
        decision = policy_from_json(obj["decision"])
        refine = policy_from_json(obj["refine"])
        fallback = obj.get("fallback")
        return SplicedPolicy(
            decision=decision,  # type: ignore[arg-type]
            refine=refine,  # type: ignore[arg-type]
            fallback=None if fallback is None else policy_from_json(fallback),  # type: ignore[arg-type]
        )
    raise InputError(f"unknown policy kind {kind!r}")


# ---------------------------------------------------------------------------
# Policy classes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolicyClass:
    """Finite ordered enumeration of binary policies with a declared VC dim."""

    policies: tuple
    vc_dim: int

    def __post_init__(self) -> None:
        if not self.policies:
            raise InputError("policy class must be nonempty")
        if self.vc_dim < 1:
            raise InputError("declared VC dimension must be >= 1")
        object.__setattr__(self, "policies", tuple(self.policies))

    def __len__(self) -> int:
        return len(self.policies)

    def __getitem__(self, i: int) -> BinaryPolicy:
        return self.policies[i]

    def label_matrix(self, x: np.ndarray) -> np.ndarray:
        """Labels of every member on every row of x, shape (K, n)."""
        x = _as_matrix(x)
        fast = self._shared_table_labels(x)
        if fast is not None:
            return fast
        return np.stack([p.decide(x) for p in self.policies])

    def _shared_table_labels(self, x: np.ndarray) -> Optional[np.ndarray]:
        """Vectorized labeling when every member is a TablePolicy over the
        same support: one point-index lookup serves the whole class."""
        first = self.policies[0]
        if not isinstance(first, TablePolicy) or len(self.policies) < 8:
            return None
        key = first.points.tobytes()
        default = first.default
        for p in self.policies[1:]:
            if (
                not isinstance(p, TablePolicy)
                or p.points.tobytes() != key
                or p.default != default
            ):
                return None
        if x.shape[1] != first.points.shape[1]:
            raise InputError(
                f"policy expects dim {first.points.shape[1]}, got {x.shape[1]}"
            )
        lut = {first.points[i].tobytes(): i for i in range(first.points.shape[0])}
        point_of = np.empty(x.shape[0], dtype=np.intp)
        missing = np.zeros(x.shape[0], dtype=bool)
        for i in range(x.shape[0]):
            hit = lut.get(np.ascontiguousarray(x[i]).tobytes())
            if hit is None:
                if default is None:
                    raise InputError(
                        "covariate point not in table and no default label set"
                    )
                missing[i] = True
                point_of[i] = 0
            else:
                point_of[i] = hit
        table = np.stack([p.labels for p in self.policies])
        out = table[:, point_of]
        if missing.any():
            out[:, missing] = default
        return out

    def dedup_on(self, x: np.ndarray) -> tuple["PolicyClass", np.ndarray]:
        """Drop members whose labelings on x duplicate an earlier member.

        Returns the deduplicated class and the kept original indices (sorted
        ascending, so the lowest-index representative of each labeling
        survives and the class order is preserved).
        """
        labels = self.label_matrix(x)
        seen: dict[bytes, int] = {}
        keep: list[int] = []
        for i in range(labels.shape[0]):
            key = labels[i].tobytes()
            if key not in seen:
                seen[key] = i
                keep.append(i)
        idx = np.array(keep, dtype=np.intp)
        return PolicyClass(tuple(self.policies[i] for i in keep), self.vc_dim), idx


def axis_threshold_class(
    dim: int,
    thresholds: Sequence[float] | np.ndarray,
    directions: Sequence[str] = ("above",),
    features: Optional[Sequence[int]] = None,
    include_constants: bool = False,
    vc_dim: Optional[int] = None,
) -> PolicyClass:
    """Axis-threshold policies on a per-feature grid (plus optional constants)."""
    feats = list(range(dim)) if features is None else list(features)
    policies: list[BinaryPolicy] = []
    for j in feats:
        for direction in directions:
            for t in thresholds:
                policies.append(AxisThresholdPolicy(j, float(t), direction))
    if include_constants:
        policies.append(ConstantPolicy(0))
        policies.append(ConstantPolicy(1))
    if vc_dim is None:
        vc_dim = 2 if (len(feats) > 1 or len(directions) > 1) else 1
    return PolicyClass(tuple(policies), vc_dim)


# ---------------------------------------------------------------------------
# Nuisances
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NuisanceModel:
    """Outcome-regression / propensity pair used for DR pseudo-outcomes.

    ``outcome_fn(arm, x2d)`` estimates E[Y(arm)|X]; ``propensity_fn(x2d)``
    estimates P(D=1|X) and is clipped to [kappa, 1-kappa] on evaluation.
    ``err_dr_bound`` is a known (or asserted) upper bound on the nuisance
    product error; ``source_tag`` marks the dataset the fit came from so
    learners can assert disjointness.
    """

    outcome_fn: Callable[[int, np.ndarray], np.ndarray]
    propensity_fn: Callable[[np.ndarray], np.ndarray]
    kappa: float
    err_dr_bound: Optional[float] = None
    source_tag: Optional[str] = None

    def __post_init__(self) -> None:
        if not (0.0 < self.kappa <= 0.5):
            raise InputError(f"kappa must lie in (0, 0.5], got {self.kappa}")
        if self.err_dr_bound is not None and self.err_dr_bound < 0:
            raise InputError("err_dr_bound must be >= 0")

    def g(self, arm: int, x: np.ndarray) -> np.ndarray:
        if arm not in (0, 1):
            raise InputError("arm must be 0 or 1")
        x = _as_matrix(x)
        return np.asarray(self.outcome_fn(arm, x), dtype=np.float64).ravel()

    def p(self, x: np.ndarray) -> np.ndarray:
        x = _as_matrix(x)
        raw = np.asarray(self.propensity_fn(x), dtype=np.float64).ravel()
        return np.clip(raw, self.kappa, 1.0 - self.kappa)
