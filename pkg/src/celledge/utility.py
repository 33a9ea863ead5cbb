"""Concave, non-decreasing rate utilities and their supergradients.

The central objects are the sum of the k smallest entries of a rate vector
(concave, non-smooth, the cell-edge objective) and its convex mirror, the
sum of the k largest. Around them sits a small composition tree: leaves
select rate slots, interior nodes apply concavity-preserving combinations
(non-negative weighted sums, minima, sums-of-smallest, geometric means).
Every tree evaluates to a scalar together with a supergradient over the
full slot vector, obtained by the chain rule.

Sorting ties break toward the lower index everywhere, which makes both
values and supergradients deterministic.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

# Barrier-mode floor for the log-domain atoms (log sums, alpha-fair,
# harmonic and geometric means). Without barrier mode a non-positive rate
# reaching one of those atoms is a hard error.
RATE_FLOOR = 1e-12


class UtilityDomainError(ValueError):
    """A log-domain atom saw a non-positive rate; `slot` is the offender."""

    def __init__(self, message, slot=None):
        super().__init__(message)
        self.slot = slot


def _check_k(k, n):
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")


def sum_smallest(x, k):
    """Sum of the k smallest entries of x."""
    x = np.asarray(x, dtype=float)
    _check_k(k, x.size)
    if k == x.size:
        return float(x.sum())
    return float(np.partition(x, k - 1)[:k].sum())


def sum_largest(x, k):
    """Sum of the k largest entries; identically -sum_smallest(-x, k)."""
    x = np.asarray(x, dtype=float)
    _check_k(k, x.size)
    return -sum_smallest(-x, k)


def smallest_k_indicator(x, k):
    """0/1 weights marking the k smallest entries, ties to the lower index.

    The result is a supergradient of sum_smallest at x.
    """
    x = np.asarray(x, dtype=float)
    _check_k(k, x.size)
    w = np.zeros(x.size)
    w[np.argsort(x, kind="stable")[:k]] = 1.0
    return w


def largest_k_indicator(x, k):
    """0/1 weights marking the k largest entries, ties to the lower index."""
    x = np.asarray(x, dtype=float)
    _check_k(k, x.size)
    w = np.zeros(x.size)
    w[np.argsort(-x, kind="stable")[:k]] = 1.0
    return w


def kq_from_percentile(q, n):
    """Number of rates inside the q-th percentile of n users: ceil(q n / 100), clamped."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return min(max(int(math.ceil(q * n / 100.0)), 1), n)


# ---------------------------------------------------------------------------
# Composition tree
# ---------------------------------------------------------------------------


def _resolve(over, n):
    if over is None:
        return np.arange(n)
    idx = np.asarray(over, dtype=int)
    if idx.size < 1 or idx.min() < 0 or idx.max() >= n:
        raise ValueError(f"slot selector out of range for {n} slots")
    return idx


def _positive(values, idx, floor):
    """Apply the log-domain guard: floor in barrier mode, raise otherwise."""
    if floor is not None:
        return np.maximum(values, floor)
    bad = np.nonzero(values <= 0.0)[0]
    if bad.size:
        slot = int(idx[bad[0]])
        raise UtilityDomainError(f"non-positive rate at slot {slot}", slot=slot)
    return values


class UtilityNode:
    """Base class; subclasses implement value_and_weights."""

    def value(self, rates, floor=None):
        return self.value_and_weights(np.asarray(rates, dtype=float), floor)[0]

    def weights(self, rates, floor=None):
        return self.value_and_weights(np.asarray(rates, dtype=float), floor)[1]

    def value_and_weights(self, rates, floor=None):
        raise NotImplementedError


@dataclass(frozen=True)
class Sum(UtilityNode):
    over: tuple | None = None

    def value_and_weights(self, rates, floor=None):
        idx = _resolve(self.over, rates.size)
        w = np.zeros(rates.size)
        w[idx] = 1.0
        return float(rates[idx].sum()), w


@dataclass(frozen=True)
class SumSmallest(UtilityNode):
    """Sum of the k smallest selected rates (the percentile utility)."""

    k: int
    over: tuple | None = None

    def value_and_weights(self, rates, floor=None):
        idx = _resolve(self.over, rates.size)
        x = rates[idx]
        _check_k(self.k, x.size)
        if self.k == x.size:
            # degenerates to the plain sum; keep the evaluation identical
            val = float(x.sum())
            sel = np.arange(x.size)
        else:
            order = np.argsort(x, kind="stable")[: self.k]
            val = float(x[order].sum())
            sel = order
        w = np.zeros(rates.size)
        w[idx[sel]] = 1.0
        return val, w


@dataclass(frozen=True)
class Min(UtilityNode):
    over: tuple | None = None

    def value_and_weights(self, rates, floor=None):
        idx = _resolve(self.over, rates.size)
        j = int(np.argmin(rates[idx]))
        w = np.zeros(rates.size)
        w[idx[j]] = 1.0
        return float(rates[idx[j]]), w


@dataclass(frozen=True)
class LogSum(UtilityNode):
    """Proportional-fair atom: sum of log rates over the selected slots."""

    over: tuple | None = None

    def value_and_weights(self, rates, floor=None):
        idx = _resolve(self.over, rates.size)
        x = _positive(rates[idx], idx, floor)
        w = np.zeros(rates.size)
        w[idx] = 1.0 / x
        return float(np.log(x).sum()), w


@dataclass(frozen=True)
class AlphaFair(UtilityNode):
    """Sum of r^(1-alpha)/(1-alpha); normalized=True subtracts the additive
    constant so the family converges to LogSum as alpha -> 1."""

    alpha: float
    over: tuple | None = None
    normalized: bool = False

    def __post_init__(self):
        if self.alpha <= 0 or self.alpha == 1.0:
            raise ValueError("alpha must be positive and != 1")

    def value_and_weights(self, rates, floor=None):
        idx = _resolve(self.over, rates.size)
        x = _positive(rates[idx], idx, floor)
        pw = x ** (1.0 - self.alpha)
        if self.normalized:
            pw = pw - 1.0
        w = np.zeros(rates.size)
        w[idx] = x ** (-self.alpha)
        return float(pw.sum() / (1.0 - self.alpha)), w


@dataclass(frozen=True)
class HarmonicMean(UtilityNode):
    over: tuple | None = None

    def value_and_weights(self, rates, floor=None):
        idx = _resolve(self.over, rates.size)
        x = _positive(rates[idx], idx, floor)
        s = float((1.0 / x).sum())
        n = x.size
        w = np.zeros(rates.size)
        w[idx] = n / (s * s * x * x)
        return n / s, w


@dataclass(frozen=True)
class WeightedSum(UtilityNode):
    """Non-negative weighted sum of child utilities."""

    terms: tuple  # of (weight, node) pairs

    def __post_init__(self):
        if not self.terms:
            raise ValueError("weighted sum needs at least one term")
        if any(w < 0 for w, _ in self.terms):
            raise ValueError("weights must be non-negative")

    def value_and_weights(self, rates, floor=None):
        total = 0.0
        grad = np.zeros(rates.size)
        for w, child in self.terms:
            v, g = child.value_and_weights(rates, floor)
            total += w * v
            grad += w * g
        return total, grad


@dataclass(frozen=True)
class SumSmallestOf(UtilityNode):
    """Sum of the k smallest child-utility values (percentile over children)."""

    k: int
    children: tuple

    def value_and_weights(self, rates, floor=None):
        _check_k(self.k, len(self.children))
        pairs = [c.value_and_weights(rates, floor) for c in self.children]
        vals = np.array([p[0] for p in pairs])
        sel = np.argsort(vals, kind="stable")[: self.k]
        grad = np.zeros(rates.size)
        for j in sel:
            grad += pairs[j][1]
        return float(vals[sel].sum()), grad


@dataclass(frozen=True)
class MinOf(UtilityNode):
    """Minimum over child utilities (tie to the lower child index)."""

    children: tuple

    def value_and_weights(self, rates, floor=None):
        pairs = [c.value_and_weights(rates, floor) for c in self.children]
        vals = np.array([p[0] for p in pairs])
        j = int(np.argmin(vals))
        return float(vals[j]), pairs[j][1]


@dataclass(frozen=True)
class GeometricMean(UtilityNode):
    """Geometric mean of child utilities; children must evaluate positive
    (same guard policy as the log-domain atoms)."""

    children: tuple

    def value_and_weights(self, rates, floor=None):
        pairs = [c.value_and_weights(rates, floor) for c in self.children]
        vals = np.array([p[0] for p in pairs])
        if floor is not None:
            vals = np.maximum(vals, floor)
        elif np.any(vals <= 0.0):
            raise UtilityDomainError("non-positive child value under geometric mean")
        n = len(pairs)
        gm = float(np.exp(np.log(vals).mean()))
        grad = np.zeros(rates.size)
        for v, (_, g) in zip(vals, pairs):
            grad += (gm / (n * v)) * g
        return gm, grad


def evaluate(spec, rates, barrier=False):
    """Utility value of `spec` on the rate vector."""
    return spec.value(np.asarray(rates, dtype=float), RATE_FLOOR if barrier else None)


def supergradient(spec, rates, barrier=False):
    """A supergradient of `spec` at the rate vector (chain rule through the tree)."""
    return spec.weights(np.asarray(rates, dtype=float), RATE_FLOOR if barrier else None)


def value_and_supergradient(spec, rates, barrier=False):
    return spec.value_and_weights(np.asarray(rates, dtype=float), RATE_FLOOR if barrier else None)


def per_group(groups, factory):
    """Build one child node per slot group, e.g. per-cell percentile nodes.

    `factory(indices)` returns the node for one group.
    """
    return tuple(factory(tuple(int(i) for i in g)) for g in groups)


# ---------------------------------------------------------------------------
# JSON expression trees
# ---------------------------------------------------------------------------


def _over_to_json(over):
    return "all" if over is None else [int(i) for i in over]


def _over_from_json(obj):
    if obj == "all":
        return None
    return tuple(int(i) for i in obj)


def to_json_dict(node):
    if isinstance(node, Sum):
        return {"sum": _over_to_json(node.over)}
    if isinstance(node, SumSmallest):
        return {"slqp": {"kq": node.k, "over": _over_to_json(node.over)}}
    if isinstance(node, Min):
        return {"min": _over_to_json(node.over)}
    if isinstance(node, LogSum):
        return {"logsum": _over_to_json(node.over)}
    if isinstance(node, AlphaFair):
        return {"afair": {"alpha": node.alpha, "over": _over_to_json(node.over),
                          "normalized": node.normalized}}
    if isinstance(node, HarmonicMean):
        return {"hmean": _over_to_json(node.over)}
    if isinstance(node, WeightedSum):
        return {"wsum": [[w, to_json_dict(c)] for w, c in node.terms]}
    if isinstance(node, SumSmallestOf):
        return {"slqpof": {"kq": node.k, "children": [to_json_dict(c) for c in node.children]}}
    if isinstance(node, MinOf):
        return {"minof": [to_json_dict(c) for c in node.children]}
    if isinstance(node, GeometricMean):
        return {"gmean": [to_json_dict(c) for c in node.children]}
    raise TypeError(f"unknown utility node {type(node).__name__}")


def from_json_dict(obj):
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ValueError(f"utility spec must be a single-key object, got {obj!r}")
    kind, body = next(iter(obj.items()))
    if kind == "sum":
        return Sum(_over_from_json(body))
    if kind == "slqp":
        return SumSmallest(int(body["kq"]), _over_from_json(body["over"]))
    if kind == "min":
        return Min(_over_from_json(body))
    if kind == "logsum":
        return LogSum(_over_from_json(body))
    if kind == "afair":
        return AlphaFair(float(body["alpha"]), _over_from_json(body["over"]),
                         bool(body.get("normalized", False)))
    if kind == "hmean":
        return HarmonicMean(_over_from_json(body))
    if kind == "wsum":
        return WeightedSum(tuple((float(w), from_json_dict(c)) for w, c in body))
    if kind == "slqpof":
        return SumSmallestOf(int(body["kq"]), tuple(from_json_dict(c) for c in body["children"]))
    if kind == "minof":
        return MinOf(tuple(from_json_dict(c) for c in body))
    if kind == "gmean":
        return GeometricMean(tuple(from_json_dict(c) for c in body))
    raise ValueError(f"unknown utility kind {kind!r}")


def to_json(node):
    return json.dumps(to_json_dict(node))


def from_json(text):
    return from_json_dict(json.loads(text))
