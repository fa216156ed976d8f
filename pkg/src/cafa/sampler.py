"""Selective-perturbation neighborhood generator.

Candidates keep the query's uncontrollable feature values, resample every
controllable feature independently (uniform over the vocabulary for
categorical features, truncated Gaussian around the query value for
continuous ones), and survive only when their distance to the query stays
within the proximity threshold. Survivors are labeled by the model and
accumulated until every observed class has the requested count, then each
class is downsampled to exactly that count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .distance import DistanceParams, delta_to_rows
from .errors import InvalidInputError, NeighborhoodImbalanceError
from .schema import Dataset, FeatureSchema, validate_instance

DEFAULT_SIGMA = 0.25
_CHUNK = 1024


@dataclass(frozen=True)
class NeighborhoodSample:
    """Balanced, model-labeled neighborhood of one query instance."""

    data: Dataset
    origin: np.ndarray
    pi: float
    k: int
    stats: dict
    seed: int


def perturb_batch(x, schema: FeatureSchema, rng, n: int, sigma: float = DEFAULT_SIGMA):
    """Draw ``n`` candidates around ``x`` varying only controllable features."""
    out = np.tile(np.asarray(x, dtype=np.float64), (n, 1))
    for j in schema.controllable_idx:
        if schema.is_categorical[j]:
            out[:, j] = rng.integers(0, schema.vocab_sizes[j], size=n)
        else:
            mu = x[j]
            lo = ndtr((0.0 - mu) / sigma)
            hi = ndtr((1.0 - mu) / sigma)
            u = rng.random(n)
            out[:, j] = np.clip(mu + sigma * ndtri(lo + u * (hi - lo)), 0.0, 1.0)
    return out


def perturb_once(x, schema: FeatureSchema, rng, sigma: float = DEFAULT_SIGMA):
    """Single perturbation; uncontrollable features pass through unchanged."""
    return perturb_batch(x, schema, rng, 1, sigma)[0]


def generate_neighborhood(
    x,
    f,
    schema: FeatureSchema,
    pi: float,
    k: int,
    max_attempts: int = 200_000,
    seed: int = 0,
    sigma: float = DEFAULT_SIGMA,
) -> NeighborhoodSample:
    """Rejection-sample a balanced labeled neighborhood of ``x``.

    Raises :class:`NeighborhoodImbalanceError` when the attempt budget runs
    out before at least two classes each reach ``k`` members, which happens
    when the model is (locally) constant over the reachable neighborhood.
    """
    x = validate_instance(schema, x)
    if not 0.0 < pi <= 1.0:
        raise InvalidInputError(f"proximity must be in (0, 1], got {pi}")
    if k < 1:
        raise InvalidInputError("k must be >= 1")
    if max_attempts < 1:
        raise InvalidInputError("max_attempts must be >= 1")

    params = DistanceParams.from_schema(schema)
    rng = np.random.default_rng(seed)
    rows = []
    labels = []
    attempts = 0
    rejected_distance = 0

    def balanced() -> bool:
        if not labels:
            return False
        counts = np.bincount(np.concatenate(labels))
        present = counts[counts > 0]
        return len(present) >= 2 and present.min() >= k

    while not balanced():
        budget = max_attempts - attempts
        if budget <= 0:
            counts = {}
            if labels:
                flat = np.concatenate(labels)
                counts = {int(c): int(n) for c, n in zip(*np.unique(flat, return_counts=True))}
            raise NeighborhoodImbalanceError(
                f"exhausted {max_attempts} attempts before every class reached "
                f"k={k}; observed class counts: {counts or '{}'} "
                f"(the model may be constant within the proximity ball)",
                class_counts=counts,
                attempts=attempts,
            )
        n_draw = min(_CHUNK, budget)
        cand = perturb_batch(x, schema, rng, n_draw, sigma)
        attempts += n_draw
        keep = delta_to_rows(cand, x, params) <= pi
        rejected_distance += int(n_draw - keep.sum())
        if keep.any():
            survivors = cand[keep]
            probs = f.predict_proba(survivors)
            rows.append(survivors)
            labels.append(np.argmax(probs, axis=1).astype(np.int64))

    all_rows = np.concatenate(rows)
    all_labels = np.concatenate(labels)
    classes = np.unique(all_labels)
    picked = []
    for c in classes:
        members = np.flatnonzero(all_labels == c)
        picked.append(members[rng.choice(members.size, size=k, replace=False)])
    keep_idx = np.sort(np.concatenate(picked))
    stats = {
        "attempts": attempts,
        "rejections_distance": rejected_distance,
        "rejections_balance": int(all_rows.shape[0] - k * classes.size),
    }
    data = Dataset.from_normalized(schema, all_rows[keep_idx], all_labels[keep_idx])
    return NeighborhoodSample(data=data, origin=x, pi=float(pi), k=k, stats=stats, seed=seed)
