"""Shared helpers: small schemas, model fakes, random instances."""

from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from cafa.schema import Categorical, Continuous, Feature, FeatureSchema

DATA_DIR = Path(__file__).resolve().parents[1] / "data"

settings.register_profile("suite", deadline=None)
settings.load_profile("suite")


class ProbModel:
    """Model fake driven by a vectorized positive-class probability function.

    Anything exposing predict_proba(X) -> (n, 2) can stand in for a trained
    forest in the explainers and the sampler.
    """

    def __init__(self, fn):
        self.fn = fn

    def predict_proba(self, X):
        p = np.asarray(self.fn(np.asarray(X, dtype=np.float64)), dtype=np.float64)
        return np.column_stack([1.0 - p, p])

    def predict_classes(self, X):
        return np.argmax(self.predict_proba(X), axis=1)


def make_schema(kinds, controllable=None, weights=None, names=None):
    """Build a schema from a list of "cont" / int-vocab-size entries."""
    feats = []
    for i, k in enumerate(kinds):
        kind = Continuous() if k == "cont" else Categorical(tuple(str(c) for c in range(k)))
        feats.append(
            Feature(
                name=names[i] if names else f"f{i}",
                kind=kind,
                controllable=True if controllable is None else bool(controllable[i]),
                weight=1.0 if weights is None else float(weights[i]),
            )
        )
    return FeatureSchema(feats)


def random_instance(schema, rng):
    x = np.empty(schema.arity, dtype=np.float64)
    for j in range(schema.arity):
        if schema.is_categorical[j]:
            x[j] = rng.integers(0, schema.vocab_sizes[j])
        else:
            x[j] = rng.random()
    return x


def random_rows(schema, rng, n):
    return np.stack([random_instance(schema, rng) for _ in range(n)])


@pytest.fixture(scope="session")
def breast_data():
    from cafa.schema import IngestionSpec, load_csv

    spec = IngestionSpec.from_json(DATA_DIR / "breast_cancer.spec.json")
    return load_csv(DATA_DIR / "breast_cancer.csv", spec)
