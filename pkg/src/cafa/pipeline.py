"""End-to-end controllable-factor attribution.

The local pipeline: sample a balanced neighborhood of the query that holds
uncontrollable features fixed, fit a surrogate forest on the model-labeled
neighborhood, explain the surrogate row by row with Shapley values against
a background drawn from the same neighborhood, and average. Uncontrollable
features are constant across the query, every neighborhood row, and every
background row, so their attributions are exactly zero by construction.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .distance import DistanceParams, delta_to_rows, estimate_proximity
from .errors import (
    CorrelationUndefinedError,
    ExplanationError,
    GlobalFailureError,
    InvalidInputError,
    SurrogateError,
    TrainingError,
)
from .explain import (
    Attribution,
    Background,
    derive_seed,
    global_explanation,
    shapley_exact,
    shapley_mc,
)
from .forest import ForestParams, RandomForest, accuracy, train_forest
from .sampler import DEFAULT_SIGMA, NeighborhoodSample, generate_neighborhood
from .schema import Dataset, FeatureSchema, validate_instance

_EXPLAINERS = ("mc", "exact")

# Seed-derivation tags so every pipeline stage gets an independent stream.
_TAG_PROXIMITY = 0
_TAG_NEIGHBORHOOD = 1
_TAG_SURROGATE = 2
_TAG_BACKGROUND = 4
_TAG_ROW = 5
_TAG_SHAP_BG = 6
_TAG_SHAP_MC = 7
_TAG_GLOBAL = 10


@dataclass(frozen=True)
class CafaConfig:
    """Knobs for one local explanation run."""

    k: int = 500
    pi: float | str = "estimate"
    n_pairs: int = 10_000
    surrogate_params: ForestParams = field(default_factory=ForestParams)
    explainer: str = "mc"
    n_perms: int = 10
    n_locals: int | None = None
    background_size: int = 100
    max_attempts: int = 200_000
    sigma: float = DEFAULT_SIGMA
    exact_limit: int = 15
    shap_perms: int = 2000
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInputError("k must be >= 1")
        if self.explainer not in _EXPLAINERS:
            raise InvalidInputError(
                f"explainer must be one of {_EXPLAINERS}, got {self.explainer!r}"
            )
        if isinstance(self.pi, str):
            if self.pi != "estimate":
                raise InvalidInputError("pi must be a float in (0, 1] or 'estimate'")
        elif not 0.0 < float(self.pi) <= 1.0:
            raise InvalidInputError(f"pi must be in (0, 1], got {self.pi}")
        if self.n_perms < 1:
            raise InvalidInputError("n_perms must be >= 1")
        if self.n_locals is not None and self.n_locals < 1:
            raise InvalidInputError("n_locals must be >= 1 when given")
        if self.background_size < 1:
            raise InvalidInputError("background_size must be >= 1")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["surrogate_params"] = self.surrogate_params.to_dict()
        return d


@dataclass(frozen=True)
class ShapComparison:
    """Standard Shapley attribution of the full model plus agreement score."""

    shap: Attribution
    pearson_controllable: float


@dataclass(frozen=True)
class CafaResult:
    """Local explanation output with enough state to audit it."""

    attribution: Attribution
    neighborhood: NeighborhoodSample
    surrogate: RandomForest
    surrogate_quality: float
    per_row_phi: np.ndarray
    explained_rows: np.ndarray
    background: Background
    pi: float
    shap_comparison: ShapComparison | None = None


def resolve_pi(cfg: CafaConfig, schema: FeatureSchema, data: Dataset | None) -> float:
    if not isinstance(cfg.pi, str):
        return float(cfg.pi)
    if data is None:
        raise InvalidInputError(
            "pi='estimate' needs a training dataset to average pairwise distances over"
        )
    return estimate_proximity(
        data, n_pairs=cfg.n_pairs, seed=derive_seed(cfg.seed, _TAG_PROXIMITY)
    )


def _explain_rows(g, rows, idx, bg, cfg: CafaConfig):
    """Shapley-explain the selected surrogate rows; returns (phis, phi0)."""
    m = rows.shape[1]
    phis = np.empty((idx.size, m), dtype=np.float64)
    phi0 = 0.0
    for pos, ri in enumerate(idx):
        if cfg.explainer == "exact":
            attr = shapley_exact(g, rows[ri], bg, exact_limit=cfg.exact_limit)
        else:
            attr = shapley_mc(
                g, rows[ri], bg, n_perms=cfg.n_perms, seed=derive_seed(cfg.seed, _TAG_ROW, int(ri))
            )
        phis[pos] = attr.phi
        phi0 += attr.phi0
    return phis, phi0 / idx.size


def cafa_local(
    x,
    f,
    schema: FeatureSchema,
    cfg: CafaConfig | None = None,
    data: Dataset | None = None,
    with_shap: bool = False,
) -> CafaResult:
    """Explain one instance; uncontrollable features get exactly zero."""
    cfg = cfg or CafaConfig()
    x = validate_instance(schema, x)
    pi = resolve_pi(cfg, schema, data)

    nb = generate_neighborhood(
        x,
        f,
        schema,
        pi=pi,
        k=cfg.k,
        max_attempts=cfg.max_attempts,
        seed=derive_seed(cfg.seed, _TAG_NEIGHBORHOOD),
        sigma=cfg.sigma,
    )

    sparams = dataclasses.replace(
        cfg.surrogate_params, seed=derive_seed(cfg.seed, _TAG_SURROGATE)
    )
    try:
        g = train_forest(nb.data, sparams)
    except TrainingError as exc:
        raise SurrogateError(
            f"surrogate training failed: {exc}", neighborhood_stats=nb.stats
        ) from exc
    quality = accuracy(g, nb.data)

    rows = nb.data.X
    n = rows.shape[0]
    if cfg.n_locals is not None:
        n_locals = cfg.n_locals
        if n_locals > n:
            raise InvalidInputError(f"n_locals={n_locals} exceeds neighborhood size {n}")
    else:
        n_locals = n if cfg.explainer == "mc" else min(200, n)
    if n_locals == n:
        idx = np.arange(n)
    else:
        # Explain the rows closest to the query (ties by acceptance order)
        # so a truncated average still describes the query's vicinity.
        d = delta_to_rows(rows, x, DistanceParams.from_schema(schema))
        idx = np.sort(np.lexsort((np.arange(n), d))[:n_locals])

    bg = Background.from_dataset(
        nb.data, size=cfg.background_size, seed=derive_seed(cfg.seed, _TAG_BACKGROUND)
    )
    per_row_phi, phi0 = _explain_rows(g, rows, idx, bg, cfg)
    phi = per_row_phi.mean(axis=0)
    # Holding uncontrollables fixed everywhere guarantees exact zeros there.
    assert np.all(phi[schema.uncontrollable_idx] == 0.0)

    attribution = Attribution(phi=phi, phi0=phi0, method="cafa", seed=cfg.seed)
    comparison = None
    if with_shap:
        shap = standard_shap(x, f, schema, cfg, data)
        comparison = ShapComparison(
            shap=shap,
            pearson_controllable=pearson(
                attribution.phi[schema.controllable_idx],
                shap.phi[schema.controllable_idx],
            ),
        )
    return CafaResult(
        attribution=attribution,
        neighborhood=nb,
        surrogate=g,
        surrogate_quality=quality,
        per_row_phi=per_row_phi,
        explained_rows=idx,
        background=bg,
        pi=pi,
        shap_comparison=comparison,
    )


def standard_shap(
    x,
    f,
    schema: FeatureSchema,
    cfg: CafaConfig | None = None,
    data: Dataset | None = None,
) -> Attribution:
    """Ordinary full-model Shapley attribution (no controllability masking)."""
    cfg = cfg or CafaConfig()
    x = validate_instance(schema, x)
    if data is None:
        raise InvalidInputError("standard shap needs a dataset to draw background rows from")
    bg = Background.from_dataset(data, size=100, seed=derive_seed(cfg.seed, _TAG_SHAP_BG))
    m = len(schema.features)
    if m <= cfg.exact_limit:
        return shapley_exact(f, x, bg, exact_limit=cfg.exact_limit)
    return shapley_mc(f, x, bg, n_perms=cfg.shap_perms, seed=derive_seed(cfg.seed, _TAG_SHAP_MC))


def pearson(a, b) -> float:
    """Pearson correlation; errors out when either side has zero variance."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size != b.size or a.size < 2:
        raise InvalidInputError("correlation needs two equal-length vectors of size >= 2")
    if np.ptp(a) == 0.0 or np.ptp(b) == 0.0:
        raise CorrelationUndefinedError(
            "correlation undefined: at least one attribution vector is constant"
        )
    return float(np.corrcoef(a, b)[0, 1])


@dataclass(frozen=True)
class CompareResult:
    cafa: CafaResult
    shap: Attribution
    pearson_controllable: float


def compare_with_shap(
    x, f, schema: FeatureSchema, cfg: CafaConfig | None = None, data: Dataset | None = None
) -> CompareResult:
    """Run both attribution methods on one instance and correlate them."""
    cfg = cfg or CafaConfig()
    if schema.controllable_idx.size < 2:
        raise InvalidInputError(
            "comparison needs at least two controllable features to correlate over"
        )
    result = cafa_local(x, f, schema, cfg, data=data, with_shap=True)
    return CompareResult(
        cafa=result,
        shap=result.shap_comparison.shap,
        pearson_controllable=result.shap_comparison.pearson_controllable,
    )


@dataclass(frozen=True)
class GlobalCafaResult:
    """Dataset-level aggregate of per-instance runs."""

    mean_phi: np.ndarray
    mean_abs_phi: np.ndarray
    per_instance: tuple
    skipped: tuple
    pi: float

    @property
    def n_explained(self) -> int:
        return len(self.per_instance)

    def ranking(self) -> np.ndarray:
        order = np.lexsort((np.arange(self.mean_abs_phi.size), -self.mean_abs_phi))
        return order


def cafa_global(
    xs,
    f,
    schema: FeatureSchema,
    cfg: CafaConfig | None = None,
    data: Dataset | None = None,
) -> GlobalCafaResult:
    """Explain many instances with one shared proximity threshold.

    Instances whose neighborhood cannot be balanced are skipped and
    reported; the run only fails when every instance fails.
    """
    cfg = cfg or CafaConfig()
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[0] < 1:
        raise InvalidInputError("need a non-empty 2-d matrix of instances")
    pi = resolve_pi(cfg, schema, data)

    results = []
    skipped = []
    for i in range(xs.shape[0]):
        sub = dataclasses.replace(cfg, pi=pi, seed=derive_seed(cfg.seed, _TAG_GLOBAL, i))
        try:
            results.append((i, cafa_local(xs[i], f, schema, sub, data=data)))
        except ExplanationError as exc:
            skipped.append((i, str(exc)))
    if not results:
        raise GlobalFailureError(
            f"all {xs.shape[0]} instances failed; first failure: {skipped[0][1]}"
        )
    agg = global_explanation([r.attribution for _, r in results])
    return GlobalCafaResult(
        mean_phi=agg.mean_phi,
        mean_abs_phi=agg.mean_abs_phi,
        per_instance=tuple(results),
        skipped=tuple(skipped),
        pi=pi,
    )
