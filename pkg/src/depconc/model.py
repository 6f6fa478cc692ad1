"""Finite metric product spaces and joint laws over them.

States are stored densely in canonical order: lexicographic with the first
coordinate most significant, which is numpy's C order for an array of shape
``(m_1, ..., m_n)``. Coordinates are indexed from 0 in this API.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import CapExceeded, DimensionMismatch, InvalidLaw, InvalidMetric, ZeroConditioningEvent

DEFAULT_STATE_CAP = 2_000_000
NORM_TOL = 1e-12


def state_cap() -> int:
    """Current state-space cap (``DEPCONC_STATE_CAP`` overrides the default)."""
    raw = os.environ.get("DEPCONC_STATE_CAP")
    if raw:
        return int(raw)
    return DEFAULT_STATE_CAP


def _as_probability(vec, name: str) -> np.ndarray:
    p = np.asarray(vec, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InvalidLaw(f"{name}: expected a non-empty vector")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise InvalidLaw(f"{name}: entries must be finite and nonnegative")
    if abs(p.sum() - 1.0) > NORM_TOL:
        raise InvalidLaw(f"{name}: sums to {float(p.sum())!r}, not 1")
    return p


def _as_kernel(mat, name: str) -> np.ndarray:
    k = np.asarray(mat, dtype=float)
    if k.ndim != 2:
        raise InvalidLaw(f"{name}: expected a matrix")
    if not np.all(np.isfinite(k)) or np.any(k < 0):
        raise InvalidLaw(f"{name}: entries must be finite and nonnegative")
    bad = np.abs(k.sum(axis=1) - 1.0) > NORM_TOL
    if np.any(bad):
        row = int(np.flatnonzero(bad)[0])
        raise InvalidLaw(f"{name}: row {row} sums to {float(k[row].sum())!r}, not 1")
    return k


@dataclass(frozen=True, eq=False)
class CoordinateSpace:
    """A finite alphabet with a metric matrix."""

    size: int
    metric: np.ndarray
    labels: tuple[str, ...] | None = None
    check_triangle: bool = True

    def __post_init__(self):
        m = np.array(self.metric, dtype=float)
        if self.size < 1:
            raise InvalidMetric("size must be positive")
        if m.shape != (self.size, self.size):
            raise InvalidMetric(f"metric shape {m.shape} does not match size {self.size}")
        if not np.all(np.isfinite(m)):
            raise InvalidMetric("metric entries must be finite")
        if not np.allclose(m, m.T, rtol=0, atol=1e-12):
            raise InvalidMetric("metric is not symmetric")
        if np.any(np.diag(m) != 0):
            raise InvalidMetric("metric must vanish on the diagonal")
        off = ~np.eye(self.size, dtype=bool)
        if np.any(m[off] <= 0):
            raise InvalidMetric("metric must be strictly positive off the diagonal")
        if self.check_triangle and self.size > 2:
            # d(a,c) <= d(a,b) + d(b,c) for all a,b,c
            via = m[:, :, None] + m[None, :, :]
            if np.any(m[:, None, :] > via + 1e-12):
                raise InvalidMetric("metric violates the triangle inequality")
        m.setflags(write=False)
        object.__setattr__(self, "metric", m)
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != self.size:
                raise InvalidMetric("labels length does not match size")
            object.__setattr__(self, "labels", labels)

    @classmethod
    def trivial(cls, size: int, alpha: float = 1.0, labels=None) -> "CoordinateSpace":
        """Scaled trivial metric ``alpha * 1{x != z}``."""
        if not alpha > 0:
            raise InvalidMetric("alpha must be positive")
        return cls(size, alpha * (1.0 - np.eye(size)), labels)

    @cached_property
    def diameter(self) -> float:
        return float(self.metric.max())

    @cached_property
    def min_distance(self) -> float:
        """Smallest off-diagonal distance (the diameter when size is 1)."""
        if self.size == 1:
            return self.diameter
        return float(self.metric[~np.eye(self.size, dtype=bool)].min())

    @cached_property
    def alpha(self) -> float | None:
        """Scale of a scaled trivial metric, None for any other metric."""
        if self.size == 1:
            return 1.0
        off = self.metric[~np.eye(self.size, dtype=bool)]
        if np.all(off == off[0]):
            return float(off[0])
        return None


@dataclass(frozen=True, eq=False)
class JointLaw:
    """A joint law in one of four representations.

    Use the ``explicit``, ``markov``, ``gibbs_chain`` and ``product``
    constructors rather than the raw initializer.
    """

    kind: str
    pmf: np.ndarray | None = None
    initial: np.ndarray | None = None
    kernels: tuple[np.ndarray, ...] = ()
    potentials: tuple[np.ndarray, ...] = ()
    marginals: tuple[np.ndarray, ...] = ()

    @classmethod
    def explicit(cls, pmf) -> "JointLaw":
        return cls("explicit", pmf=_as_probability(pmf, "pmf"))

    @classmethod
    def markov(cls, initial, kernels: Sequence) -> "JointLaw":
        init = _as_probability(initial, "initial")
        ks = tuple(_as_kernel(k, f"kernels[{i}]") for i, k in enumerate(kernels))
        prev = init.size
        for i, k in enumerate(ks):
            if k.shape[0] != prev:
                raise InvalidLaw(f"kernels[{i}]: has {k.shape[0]} rows, expected {prev}")
            prev = k.shape[1]
        return cls("markov", initial=init, kernels=ks)

    @classmethod
    def gibbs_chain(cls, potentials: Sequence) -> "JointLaw":
        ps = []
        for i, psi in enumerate(potentials):
            a = np.asarray(psi, dtype=float)
            if a.ndim != 2:
                raise InvalidLaw(f"potentials[{i}]: expected a matrix")
            if not np.all(np.isfinite(a)) or np.any(a <= 0):
                raise InvalidLaw(f"potentials[{i}]: entries must be finite and strictly positive")
            if ps and ps[-1].shape[1] != a.shape[0]:
                raise InvalidLaw(f"potentials[{i}]: shape {a.shape} does not chain with the previous potential")
            ps.append(a)
        return cls("gibbs_chain", potentials=tuple(ps))

    @classmethod
    def product(cls, marginals: Sequence) -> "JointLaw":
        ms = tuple(_as_probability(m, f"marginals[{i}]") for i, m in enumerate(marginals))
        if not ms:
            raise InvalidLaw("marginals: need at least one coordinate")
        return cls("product", marginals=ms)

    def sizes(self) -> tuple[int, ...] | None:
        """Coordinate sizes implied by the law, or None if not determined."""
        if self.kind == "markov":
            return (self.initial.size,) + tuple(k.shape[1] for k in self.kernels)
        if self.kind == "product":
            return tuple(m.size for m in self.marginals)
        if self.kind == "gibbs_chain" and self.potentials:
            return (self.potentials[0].shape[0],) + tuple(p.shape[1] for p in self.potentials)
        return None


def materialize(law: JointLaw, coordinates: Sequence[CoordinateSpace], cap: int | None = None) -> np.ndarray:
    """Dense joint pmf of ``law`` in canonical order."""
    sizes = tuple(c.size for c in coordinates)
    total = int(np.prod(sizes, dtype=np.int64))
    cap = state_cap() if cap is None else cap
    if total > cap:
        raise CapExceeded(f"state space has {total} states, cap is {cap}")
    implied = law.sizes()
    if implied is not None and implied != sizes:
        raise DimensionMismatch(f"law sizes {implied} do not match coordinates {sizes}")

    if law.kind == "explicit":
        if law.pmf.size != total:
            raise DimensionMismatch(f"pmf has {law.pmf.size} entries, expected {total}")
        return law.pmf.copy()
    if law.kind == "product":
        joint = law.marginals[0]
        for m in law.marginals[1:]:
            joint = np.multiply.outer(joint, m)
        return np.ravel(joint)
    if law.kind == "markov":
        joint = law.initial
        for k in law.kernels:
            # joint[..., a] * k[a, b]
            joint = joint[..., None] * k.reshape((1,) * (joint.ndim - 1) + k.shape)
        return np.ravel(joint)
    if law.kind == "gibbs_chain":
        if not law.potentials:
            return np.full(total, 1.0 / total)
        joint = law.potentials[0]
        for psi in law.potentials[1:]:
            joint = joint[..., None] * psi.reshape((1,) * (joint.ndim - 1) + psi.shape)
        z = joint.sum()
        if not np.isfinite(z) or z <= 0:
            raise InvalidLaw("potentials: partition function is not finite and positive")
        return np.ravel(joint / z)
    raise InvalidLaw(f"unknown law representation {law.kind!r}")


@dataclass(frozen=True, eq=False)
class ProductModel:
    coordinates: tuple[CoordinateSpace, ...]
    law: JointLaw
    cap: int | None = field(default=None, repr=False)

    def __post_init__(self):
        coords = tuple(self.coordinates)
        if not coords:
            raise InvalidLaw("a model needs at least one coordinate")
        object.__setattr__(self, "coordinates", coords)
        implied = self.law.sizes()
        if implied is not None and implied != self.sizes:
            raise DimensionMismatch(f"law sizes {implied} do not match coordinates {self.sizes}")

    @property
    def n(self) -> int:
        return len(self.coordinates)

    @cached_property
    def sizes(self) -> tuple[int, ...]:
        return tuple(c.size for c in self.coordinates)

    @cached_property
    def num_states(self) -> int:
        return int(np.prod(self.sizes, dtype=np.int64))

    @cached_property
    def pmf(self) -> np.ndarray:
        p = materialize(self.law, self.coordinates, self.cap)
        p.setflags(write=False)
        return p

    @property
    def joint(self) -> np.ndarray:
        """The pmf reshaped to ``sizes``."""
        return self.pmf.reshape(self.sizes)

    @cached_property
    def diameters(self) -> np.ndarray:
        return np.array([c.diameter for c in self.coordinates])

    @cached_property
    def alphas(self) -> np.ndarray | None:
        """Per-coordinate scales when every metric is scaled trivial."""
        a = [c.alpha for c in self.coordinates]
        if any(x is None for x in a):
            return None
        return np.array(a, dtype=float)

    def with_unit_metrics(self) -> "ProductModel":
        return ProductModel(tuple(CoordinateSpace.trivial(m) for m in self.sizes), self.law, self.cap)

    def with_law(self, law: JointLaw) -> "ProductModel":
        return ProductModel(self.coordinates, law, self.cap)

    def states(self) -> np.ndarray:
        """All configurations, one row per state, in canonical order."""
        return np.indices(self.sizes).reshape(self.n, -1).T

    def distance(self, x, z) -> float:
        """Product metric: sum of coordinate distances."""
        return float(sum(c.metric[a, b] for c, a, b in zip(self.coordinates, x, z)))


def as_table(values, model: ProductModel) -> np.ndarray:
    """Validate a function table against ``model`` and return it as a flat array."""
    f = np.asarray(values, dtype=float).ravel()
    if f.size != model.num_states:
        raise DimensionMismatch(f"function table has {f.size} entries, expected {model.num_states}")
    if not np.all(np.isfinite(f)):
        raise ValueError("function table entries must be finite")
    return f


def marginal_conditional(model: ProductModel, target: Sequence[int], given: dict[int, int] | None = None) -> np.ndarray:
    """Law of ``X^target`` given ``X_j = given[j]``, flattened in canonical order of ``target``.

    Raises ZeroConditioningEvent when the conditioning event has probability zero.
    """
    target = list(target)
    given = dict(given or {})
    if set(target) & set(given):
        raise ValueError("target and conditioning index sets must be disjoint")
    if len(set(target)) != len(target):
        raise ValueError("target indices repeat")
    joint = model.joint
    index = [slice(None)] * model.n
    for j, v in given.items():
        index[j] = v
    sub = joint[tuple(index)]
    free = [i for i in range(model.n) if i not in given]
    drop = tuple(k for k, i in enumerate(free) if i not in target)
    sub = sub.sum(axis=drop)
    kept = [i for i in free if i in target]
    sub = np.transpose(sub, [kept.index(i) for i in target])
    total = sub.sum()
    if total <= 0:
        raise ZeroConditioningEvent(f"P(X_J = x_J) = 0 for J = {sorted(given)}")
    return np.ravel(sub / total)


def _pair_diffs(arr: np.ndarray, axis: int):
    """Differences arr[..a..] - arr[..b..] along ``axis`` for all a < b, stacked last."""
    m = arr.shape[axis]
    a, b = np.triu_indices(m, k=1)
    moved = np.moveaxis(arr, axis, -1)
    return moved[..., a] - moved[..., b], a, b


def oscillation_vector(f, model: ProductModel) -> np.ndarray:
    """Local oscillations delta_i(f) with 0/0 = 0.

    NaN entries of ``f`` are treated as unused states and skipped.
    """
    table = np.asarray(f, dtype=float).reshape(model.sizes)
    out = np.zeros(model.n)
    for i, coord in enumerate(model.coordinates):
        if coord.size < 2:
            continue
        diffs, a, b = _pair_diffs(table, i)
        ratio = np.abs(diffs) / coord.metric[a, b]
        if np.all(np.isnan(ratio)):
            continue
        out[i] = np.nanmax(ratio)
    return out


def lipschitz_seminorm(f, model: ProductModel, chunk: int = 512) -> float:
    """sup |f(x) - f(y)| / rho(x, y) over all pairs x != y, by enumeration."""
    table = as_table(f, model)
    states = model.states()
    S = states.shape[0]
    best = 0.0
    for lo in range(0, S, chunk):
        x = states[lo:lo + chunk]
        d = np.zeros((x.shape[0], S))
        for i, coord in enumerate(model.coordinates):
            d += coord.metric[x[:, i][:, None], states[:, i][None, :]]
        num = np.abs(table[lo:lo + chunk, None] - table[None, :])
        mask = d > 0
        if np.any(mask):
            best = max(best, float((num[mask] / d[mask]).max()))
    return best
