"""Shapley attribution engines and a locally weighted linear baseline.

All explainers target the model's positive-class probability. Feature
removal is interventional: the value of a coalition S is the model's mean
prediction over background rows with the coalition's columns overwritten by
the query's values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distance import DistanceParams, delta_to_rows
from .errors import FitError, InvalidInputError, SizeLimitError
from .schema import Dataset, FeatureSchema

# Cap on rows per model call so coalition matrices stay small.
_BATCH_ROWS = 262_144


def derive_seed(base: int, *path: int) -> int:
    """Stable child seed for a (base, path) pair; independent streams."""
    return int(np.random.SeedSequence(base, spawn_key=tuple(path)).generate_state(1)[0])


@dataclass(frozen=True)
class Attribution:
    """Per-feature attributions for one explained instance."""

    phi: np.ndarray
    phi0: float
    method: str
    seed: int | None = None

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=np.float64)
        phi.flags.writeable = False
        object.__setattr__(self, "phi", phi)

    @property
    def total(self) -> float:
        return float(self.phi0 + self.phi.sum())


@dataclass(frozen=True)
class Background:
    """Reference rows used to marginalize removed features."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise InvalidInputError("background needs a non-empty 2-d row matrix")
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)

    @property
    def size(self) -> int:
        return self.rows.shape[0]

    @classmethod
    def from_dataset(cls, data: Dataset, size: int = 100, seed: int = 0) -> "Background":
        if size < 1:
            raise InvalidInputError("background size must be >= 1")
        if data.n_rows <= size:
            return cls(data.X)
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(data.n_rows, size=size, replace=False))
        return cls(data.X[idx])


def _prob1(f, Z: np.ndarray) -> np.ndarray:
    """Positive-class probability for each row, batched to bound memory."""
    n = Z.shape[0]
    if n <= _BATCH_ROWS:
        return f.predict_proba(Z)[:, 1]
    out = np.empty(n, dtype=np.float64)
    for start in range(0, n, _BATCH_ROWS):
        stop = min(start + _BATCH_ROWS, n)
        out[start:stop] = f.predict_proba(Z[start:stop])[:, 1]
    return out


def coalition_value(f, x, coalition, bg: Background) -> float:
    """Mean prediction with ``coalition`` columns pinned to the query."""
    x = np.asarray(x, dtype=np.float64)
    Z = bg.rows.copy()
    idx = np.asarray(coalition, dtype=np.intp)
    if idx.size:
        Z[:, idx] = x[idx]
    return float(_prob1(f, Z).mean())


def shapley_exact(f, x, bg: Background, exact_limit: int = 15) -> Attribution:
    """Exact interventional Shapley values by coalition enumeration."""
    x = np.asarray(x, dtype=np.float64)
    m = x.size
    if m > exact_limit:
        raise SizeLimitError(
            f"exact enumeration over {m} features needs 2^{m} coalitions; "
            f"limit is {exact_limit} (use the sampling explainer instead)"
        )
    n_masks = 1 << m
    bits = ((np.arange(n_masks)[:, None] >> np.arange(m)) & 1).astype(bool)
    B = bg.size

    v = np.empty(n_masks, dtype=np.float64)
    masks_per_chunk = max(1, _BATCH_ROWS // max(B, 1))
    for start in range(0, n_masks, masks_per_chunk):
        stop = min(start + masks_per_chunk, n_masks)
        chunk = bits[start:stop]
        Z = np.where(chunk[:, None, :], x[None, None, :], bg.rows[None, :, :])
        v[start:stop] = _prob1(f, Z.reshape(-1, m)).reshape(-1, B).mean(axis=1)

    sizes = bits.sum(axis=1)
    fact = [math.factorial(i) for i in range(m + 1)]
    weight = np.array(
        [fact[s] * fact[m - 1 - s] / fact[m] for s in range(m)], dtype=np.float64
    )
    phi = np.empty(m, dtype=np.float64)
    all_masks = np.arange(n_masks)
    for j in range(m):
        without = all_masks[~bits[:, j]]
        w = weight[sizes[without]]
        phi[j] = np.dot(w, v[without | (1 << j)] - v[without])
    return Attribution(phi=phi, phi0=float(v[0]), method="exact-shap")


def shapley_mc(f, x, bg: Background, n_perms: int = 2000, seed: int = 0) -> Attribution:
    """Permutation-sampling Shapley estimate.

    Each sampled permutation contributes one telescoping chain of coalition
    values, so the estimate satisfies local accuracy exactly and a feature
    the model never reads gets a bit-exact zero.
    """
    x = np.asarray(x, dtype=np.float64)
    m = x.size
    if n_perms < 1:
        raise InvalidInputError("n_perms must be >= 1")
    rng = np.random.default_rng(seed)
    perms = rng.permuted(np.tile(np.arange(m), (n_perms, 1)), axis=1)
    B = bg.size

    phi = np.zeros(m, dtype=np.float64)
    phi0 = None
    perms_per_chunk = max(1, _BATCH_ROWS // ((m + 1) * B))
    for start in range(0, n_perms, perms_per_chunk):
        chunk = perms[start : start + perms_per_chunk]
        P = chunk.shape[0]
        Z = np.empty((P, m + 1, B, m), dtype=np.float64)
        Z[:, 0] = bg.rows
        pidx = np.arange(P)
        for step in range(1, m + 1):
            Z[:, step] = Z[:, step - 1]
            col = chunk[:, step - 1]
            Z[pidx, step, :, col] = x[col][:, None]
        v = _prob1(f, Z.reshape(-1, m)).reshape(P, m + 1, B).mean(axis=2)
        if phi0 is None:
            phi0 = float(v[0, 0])
        np.add.at(phi, chunk.ravel(), (v[:, 1:] - v[:, :-1]).ravel())
    phi /= n_perms
    return Attribution(phi=phi, phi0=phi0, method="mc-shap", seed=seed)


def lime_explain(
    f,
    x,
    schema: FeatureSchema,
    n_samples: int = 1000,
    seed: int = 0,
    kernel_width: float | None = None,
    alpha: float = 1e-3,
) -> Attribution:
    """Locally weighted ridge fit around ``x`` perturbing every feature.

    Categorical features enter the linear design as match indicators
    against the query value; continuous ones enter as their raw values.
    """
    x = np.asarray(x, dtype=np.float64)
    m = len(schema.features)
    if n_samples < m + 2:
        raise InvalidInputError(
            f"n_samples={n_samples} too small for {m} features (need >= {m + 2})"
        )
    rng = np.random.default_rng(seed)
    Z = np.empty((n_samples, m), dtype=np.float64)
    for j in range(m):
        if schema.is_categorical[j]:
            Z[:, j] = rng.integers(0, schema.vocab_sizes[j], size=n_samples)
        else:
            Z[:, j] = rng.random(n_samples)

    y = _prob1(f, Z)
    d = delta_to_rows(Z, x, DistanceParams.from_schema(schema))
    if kernel_width is None:
        kernel_width = 0.75 * math.sqrt(max(float(d.mean()), 0.0))
    kernel_width = max(float(kernel_width), 1e-9)
    w = np.exp(-(d**2) / kernel_width**2)

    A = np.empty((n_samples, m + 1), dtype=np.float64)
    for j in range(m):
        if schema.is_categorical[j]:
            A[:, j] = (Z[:, j] == x[j]).astype(np.float64)
        else:
            A[:, j] = Z[:, j]
    A[:, m] = 1.0

    G = A.T @ (w[:, None] * A)
    G[np.arange(m), np.arange(m)] += alpha  # intercept stays unpenalized
    rhs = A.T @ (w * y)
    try:
        beta = np.linalg.solve(G, rhs)
    except np.linalg.LinAlgError as exc:
        raise FitError(f"weighted ridge system is singular: {exc}") from exc
    if not np.all(np.isfinite(beta)):
        raise FitError("weighted ridge fit produced non-finite coefficients")
    return Attribution(phi=beta[:m], phi0=float(beta[m]), method="lime", seed=seed)


@dataclass(frozen=True)
class GlobalExplanation:
    """Aggregate of per-instance attributions."""

    mean_phi: np.ndarray
    mean_abs_phi: np.ndarray
    n_instances: int

    def ranking(self) -> np.ndarray:
        """Feature indices by decreasing mean absolute attribution."""
        order = np.lexsort((np.arange(self.mean_abs_phi.size), -self.mean_abs_phi))
        return order


def global_explanation(attributions) -> GlobalExplanation:
    """Average per-instance attributions into a global view."""
    if not attributions:
        raise InvalidInputError("need at least one attribution to aggregate")
    phis = np.stack([a.phi for a in attributions])
    if phis.ndim != 2:
        raise InvalidInputError("attributions have inconsistent arity")
    return GlobalExplanation(
        mean_phi=phis.mean(axis=0),
        mean_abs_phi=np.abs(phis).mean(axis=0),
        n_instances=phis.shape[0],
    )
