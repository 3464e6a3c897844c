"""Shapley-value attribution for probability models.

Three engines share one value function (the interventional expectation over
an explicit background set), so they can be checked against each other:

* ``exact_shapley``: full coalition enumeration, feasible up to 20 features.
* ``kernel_shap``: constrained weighted least squares over sampled coalitions;
  with full enumeration it reproduces the exact values.
* ``tree_shap``: closed-form per-leaf computation for forests, exact for the
  same value function at a fraction of the cost.

Per-sample attributions aggregate into a global ranking of mean absolute
values, normalized so the strongest feature scores 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .forest import Forest

EXACT_FEATURE_LIMIT = 20


class FingerprintMismatch(ValueError):
    """Model and data were built against different feature columns."""


@dataclass
class CoalitionValueFunction:
    """value(S) = mean over background rows b of f(x on S, b elsewhere)."""

    predict: Callable[[np.ndarray], np.ndarray]
    x: np.ndarray
    background: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(-1)
        self.background = np.asarray(self.background, dtype=float)
        if self.background.ndim != 2 or len(self.background) == 0:
            raise ValueError("background must be a non-empty matrix")
        if self.background.shape[1] != len(self.x):
            raise ValueError("background width differs from the explained row")

    @property
    def p(self) -> int:
        return len(self.x)

    def value(self, subset: Sequence[int]) -> float:
        mask = 0
        for j in subset:
            mask |= 1 << int(j)
        return float(self.values_for_masks(np.array([mask]))[0])

    def values_for_masks(self, masks: np.ndarray, chunk: int = 2048) -> np.ndarray:
        """One evaluation per coalition bitmask, averaged over the background."""
        masks = np.asarray(masks, dtype=np.int64)
        nb = len(self.background)
        out = np.empty(len(masks))
        for start in range(0, len(masks), chunk):
            part = masks[start : start + chunk]
            Z = np.repeat(self.background[None, :, :], len(part), axis=0)
            for j in range(self.p):
                sel = (part >> j) & 1 == 1
                Z[sel, :, j] = self.x[j]
            preds = np.asarray(self.predict(Z.reshape(-1, self.p)), dtype=float)
            out[start : start + len(part)] = preds.reshape(len(part), nb).mean(axis=1)
        return out

    def base_value(self) -> float:
        return float(np.mean(self.predict(self.background)))

    def full_value(self) -> float:
        return float(self.predict(self.x.reshape(1, -1))[0])


def coalition_value(vf: CoalitionValueFunction, subset: Sequence[int]) -> float:
    return vf.value(subset)


@dataclass
class Explanation:
    """Per-sample attribution: base value plus one contribution per feature."""

    phi: np.ndarray
    base_value: float
    predicted: float
    method: str
    coalition_budget: int | str | None = None

    def additivity_gap(self) -> float:
        return abs(self.base_value + float(self.phi.sum()) - self.predicted)


def _subset_weights(p: int) -> np.ndarray:
    """w[s] = s! (p-s-1)! / p! for s = 0..p-1."""
    fp = math.factorial(p)
    return np.array(
        [math.factorial(s) * math.factorial(p - s - 1) / fp for s in range(p)]
    )


def _popcounts(n_masks: int) -> np.ndarray:
    counts = np.zeros(n_masks, dtype=np.int64)
    for i in range(1, n_masks):
        counts[i] = counts[i >> 1] + (i & 1)
    return counts


def exact_shapley(vf: CoalitionValueFunction) -> Explanation:
    """Per-feature weighted average marginal contribution, by enumeration.

    Every coalition's value is evaluated exactly once; cost is O(2^p) value
    evaluations, so p is capped at 20.
    """
    p = vf.p
    if p > EXACT_FEATURE_LIMIT:
        raise ValueError(
            f"{p} features exceeds the exact enumeration limit "
            f"({EXACT_FEATURE_LIMIT}); use kernel_shap instead"
        )
    n_masks = 1 << p
    vals = vf.values_for_masks(np.arange(n_masks))
    sizes = _popcounts(n_masks)
    w = _subset_weights(p)
    phi = np.zeros(p)
    all_masks = np.arange(n_masks)
    for j in range(p):
        bit = 1 << j
        without = all_masks[(all_masks & bit) == 0]
        phi[j] = float(np.sum(w[sizes[without]] * (vals[without | bit] - vals[without])))
    return Explanation(
        phi=phi, base_value=float(vals[0]), predicted=float(vals[-1]), method="exact"
    )


# --- kernel method -----------------------------------------------------------

def _kernel_weight(p: int, size: int) -> float:
    """Coalition weight (p-1) / (C(p,s) * s * (p-s)) for 0 < s < p."""
    return (p - 1) / (math.comb(p, size) * size * (p - size))


def _size_mass(p: int, size: int) -> float:
    # total weight of all coalitions of one size: C(p,s) * kernel = (p-1)/(s(p-s))
    return (p - 1) / (size * (p - size))


def _sample_coalitions(
    p: int, budget: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Coalition masks and weights: deterministic rings of size 1 and p-1
    first, then seeded size-weighted sampling for the remaining budget."""
    full = (1 << p) - 1
    n_avail = budget - 2  # empty and full coalitions are handled as constraints
    if n_avail >= (1 << p) - 2:
        masks = np.array([m for m in range(1, full)], dtype=np.int64)
        sizes = _popcounts(1 << p)[masks]
        weights = np.array([_kernel_weight(p, int(s)) for s in sizes])
        return masks, weights

    masks: list[int] = []
    weights: list[float] = []
    singles = [1 << j for j in range(p)]
    pairs_complement = [full ^ (1 << j) for j in range(p)]
    for ring in (singles, pairs_complement):
        for m in ring:
            if len(masks) < n_avail:
                masks.append(m)
                weights.append(_kernel_weight(p, int(bin(m).count("1"))))

    n_samples = n_avail - len(masks)
    inner_sizes = list(range(2, p - 1))
    if n_samples > 0 and inner_sizes:
        mass = np.array([_size_mass(p, s) for s in inner_sizes])
        probs = mass / mass.sum()
        counts: dict[int, int] = {}
        chosen = rng.choice(len(inner_sizes), size=n_samples, p=probs)
        for c in chosen:
            s = inner_sizes[int(c)]
            members = rng.choice(p, size=s, replace=False)
            m = 0
            for j in members:
                m |= 1 << int(j)
            counts[m] = counts.get(m, 0) + 1
        remaining_mass = float(mass.sum())
        for m, cnt in sorted(counts.items()):
            masks.append(m)
            weights.append(cnt / n_samples * remaining_mass)
    return np.array(masks, dtype=np.int64), np.array(weights)


def kernel_shap(
    vf: CoalitionValueFunction,
    coalition_budget: int | str = "full",
    seed: int = 0,
) -> Explanation:
    """Weighted least-squares fit of an additive surrogate over coalitions.

    The fit is constrained so the intercept equals the background mean and the
    contributions sum to the prediction gap. ``coalition_budget`` counts value
    evaluations including the empty and full coalitions; ``"full"`` enumerates
    everything (and then agrees with exact enumeration).
    """
    p = vf.p
    if coalition_budget == "full":
        if p > EXACT_FEATURE_LIMIT:
            raise ValueError(f"full enumeration infeasible for p={p}")
        budget = (1 << p)  # everything
    else:
        budget = int(coalition_budget)
        if budget < p + 2:
            raise ValueError(f"coalition budget {budget} below minimum {p + 2}")

    base = vf.base_value()
    fx = vf.full_value()
    delta = fx - base

    last_error: Exception | None = None
    for attempt_seed in (seed, seed + 1):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([attempt_seed])))
        masks, weights = _sample_coalitions(p, budget, rng)
        vals = vf.values_for_masks(masks)

        Z = np.zeros((len(masks), p))
        for j in range(p):
            Z[:, j] = (masks >> j) & 1
        y = vals - base

        A = (Z * weights[:, None]).T @ Z
        b = (Z * weights[:, None]).T @ y
        K = np.zeros((p + 1, p + 1))
        K[:p, :p] = A
        K[:p, p] = 1.0
        K[p, :p] = 1.0
        rhs = np.concatenate([b, [delta]])
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError as exc:
            last_error = exc
            continue
        if not np.all(np.isfinite(sol)):
            last_error = RuntimeError("non-finite kernel solution")
            continue
        return Explanation(
            phi=sol[:p], base_value=base, predicted=fx, method="kernel",
            coalition_budget=coalition_budget,
        )
    raise RuntimeError(f"kernel system singular after re-sampling: {last_error}")


# --- tree method -------------------------------------------------------------

@lru_cache(maxsize=None)
def _indicator_tables(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Shapley values of the indicator game u(S) = [X in S and B disjoint S].

    ``table_x[a, c]`` is the value of each member of X when |X|=a, |B|=c;
    ``table_b[a, c]`` the (negative) value of each member of B. Computed with
    exact rational arithmetic, returned as floats.
    """
    fact = [Fraction(math.factorial(i)) for i in range(p + 1)]
    fp = fact[p]

    def w(s: int) -> Fraction:
        return fact[s] * fact[p - s - 1] / fp

    table_x = np.zeros((p + 1, p + 1))
    table_b = np.zeros((p + 1, p + 1))
    for a in range(p + 1):
        for c in range(p + 1 - a):
            free = p - a - c
            if a >= 1:
                acc = Fraction(0)
                for m in range(free + 1):
                    acc += math.comb(free, m) * w(a - 1 + m)
                table_x[a, c] = float(acc)
            if c >= 1:
                acc = Fraction(0)
                for m in range(free + 1):
                    acc += math.comb(free, m) * w(a + m)
                table_b[a, c] = float(-acc)
    return table_x, table_b


def _tree_paths(tree) -> list[tuple[float, list[tuple[int, float, bool]]]]:
    """All root-to-leaf paths as (leaf probability, [(feature, threshold,
    leaf_is_on_left_side)])."""
    paths = []

    def walk(node: int, conds: list[tuple[int, float, bool]]):
        f = int(tree.feature[node])
        if f < 0:
            paths.append((float(tree.prob[node]), list(conds)))
            return
        thr = float(tree.threshold[node])
        conds.append((f, thr, True))
        walk(int(tree.left[node]), conds)
        conds.pop()
        conds.append((f, thr, False))
        walk(int(tree.right[node]), conds)
        conds.pop()

    walk(0, [])
    return paths


def tree_shap(
    forest: Forest,
    x: np.ndarray,
    background: np.ndarray,
    fingerprint: str | None = None,
) -> Explanation:
    """Exact Shapley values for a forest under the interventional value
    function, by per-leaf closed form over (x, background row) pairs.

    For each leaf, the features on its path split into those that must be
    present (x follows the path, the background row does not) and those that
    must be absent; the Shapley value of that two-set indicator game has a
    closed form, and summing it over leaves, background rows, and trees gives
    the same result as full enumeration.
    """
    if fingerprint is not None and forest.schema_fingerprint is not None:
        if fingerprint != forest.schema_fingerprint:
            raise FingerprintMismatch(
                "forest was trained against a different feature column set"
            )
    x = np.asarray(x, dtype=float).reshape(-1)
    background = np.asarray(background, dtype=float)
    if background.ndim != 2 or len(background) == 0:
        raise ValueError("background must be a non-empty matrix")
    if len(x) != forest.n_features or background.shape[1] != forest.n_features:
        raise ValueError("feature width mismatch between forest, x, and background")

    p = forest.n_features
    nb = len(background)
    table_x, table_b = _indicator_tables(p)
    phi = np.zeros(p)

    for tree in forest.trees:
        for leaf_value, conds in _tree_paths(tree):
            if not conds:
                continue  # constant tree: contributes to the base only
            feats: dict[int, list[tuple[float, bool]]] = {}
            for f, thr, is_left in conds:
                feats.setdefault(f, []).append((thr, is_left))
            uf = sorted(feats)
            n_uf = len(uf)
            x_ok = np.empty(n_uf, dtype=bool)
            b_ok = np.ones((nb, n_uf), dtype=bool)
            for i, f in enumerate(uf):
                ok = True
                for thr, is_left in feats[f]:
                    ok = ok and ((x[f] <= thr) == is_left)
                    b_ok[:, i] &= (background[:, f] <= thr) == is_left
                x_ok[i] = ok
            alive = ~((~x_ok) & (~b_ok)).any(axis=1)
            if not alive.any():
                continue
            x_mask = x_ok[None, :] & ~b_ok & alive[:, None]
            b_mask = (~x_ok)[None, :] & b_ok & alive[:, None]
            a = x_mask.sum(axis=1)
            c = b_mask.sum(axis=1)
            coef_x = table_x[a, c]
            coef_b = table_b[a, c]
            for i, f in enumerate(uf):
                phi[f] += leaf_value * float(
                    (x_mask[:, i] * coef_x).sum() + (b_mask[:, i] * coef_b).sum()
                )

    phi /= nb * len(forest.trees)
    base = float(np.mean(forest.predict_proba(background)))
    predicted = float(forest.predict_proba(x.reshape(1, -1))[0])
    return Explanation(phi=phi, base_value=base, predicted=predicted, method="tree")


# --- global aggregation -------------------------------------------------------

@dataclass
class GlobalRanking:
    """Mean |phi| per feature across explained samples, normalized to [0, 1]."""

    feature_names: list[str]
    mean_abs: np.ndarray
    normalized: np.ndarray
    order: list[int]  # feature indices, best first; ties by column order

    def top(self, k: int = 20) -> list[tuple[int, str, float, float]]:
        """(rank, feature name, mean_abs, normalized) for the k best features."""
        rows = []
        for rank, idx in enumerate(self.order[:k], start=1):
            rows.append(
                (rank, self.feature_names[idx], float(self.mean_abs[idx]),
                 float(self.normalized[idx]))
            )
        return rows


def global_ranking(
    explanations: Sequence[Explanation], feature_names: Sequence[str]
) -> GlobalRanking:
    if not explanations:
        raise ValueError("need at least one explanation to rank")
    width = len(explanations[0].phi)
    if any(len(e.phi) != width for e in explanations):
        raise ValueError("explanations disagree on feature count")
    if len(feature_names) != width:
        raise ValueError("feature_names width mismatch")
    mean_abs = np.mean([np.abs(e.phi) for e in explanations], axis=0)
    peak = float(mean_abs.max())
    # All-zero attributions stay zero rather than dividing by zero.
    normalized = mean_abs / peak if peak > 0 else mean_abs.copy()
    order = sorted(range(width), key=lambda j: (-normalized[j], j))
    return GlobalRanking(
        feature_names=list(feature_names), mean_abs=mean_abs,
        normalized=normalized, order=order,
    )


def explain_samples(
    model,
    X_explain: np.ndarray,
    background: np.ndarray,
    method: str,
    coalition_budget: int | str = 2048,
    seed: int = 0,
    fingerprint: str | None = None,
) -> list[Explanation]:
    """Explain each row of ``X_explain`` with the chosen engine."""
    X_explain = np.asarray(X_explain, dtype=float)
    out = []
    for i in range(len(X_explain)):
        x = X_explain[i]
        if method == "tree":
            if not isinstance(model, Forest):
                raise ValueError("tree method requires a forest model")
            out.append(tree_shap(model, x, background, fingerprint=fingerprint))
        else:
            if fingerprint is not None:
                model_fp = getattr(model, "schema_fingerprint", None)
                if model_fp is not None and model_fp != fingerprint:
                    raise FingerprintMismatch(
                        "model was trained against a different feature column set"
                    )
            vf = CoalitionValueFunction(model.predict_proba, x, background)
            if method == "exact":
                out.append(exact_shapley(vf))
            elif method == "kernel":
                out.append(kernel_shap(vf, coalition_budget, seed=seed + i))
            else:
                raise ValueError(f"unknown explanation method {method!r}")
    return out
