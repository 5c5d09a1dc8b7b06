"""Nonparametric bootstrap over mediation moments.

Rows are resampled with replacement (case resampling, so heteroskedasticity
and misspecification are covered) and the full observed fit is recomputed per
resample. Resample i is a pure function of (seed, i): every estimator
evaluated against the plan sees the same resamples, which keeps robustness
searches and benchmark curves on common random numbers, and results do not
depend on the worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import EstimatorFailed, SingularCovariance, TooManySingularResamples
from .mediation import (
    DEFAULT_CI_MULTIPLIER,
    EffectReport,
    MediationData,
    MediationMoments,
    fit_observed,
)

DEFAULT_RESAMPLES = 1000
MAX_REDRAWS = 10


def resample_rng(seed: int, i: int) -> np.random.Generator:
    """Independent generator for resample ``i`` of a plan seeded by ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(i,)))


@dataclass
class BootstrapPlan:
    """Materialized bootstrap resamples of one dataset.

    moments[i] is the observed fit on rows indices[i]; both are fully
    determined by (seed, i).
    """

    data: MediationData
    n_resamples: int
    seed: int
    moments: list[MediationMoments] = field(repr=False)
    indices: np.ndarray = field(repr=False)  # (B, n)
    n_redraws: int = 0

    @property
    def n(self) -> int:
        return self.data.n


def _draw_one(data: MediationData, seed: int, i: int):
    rng = resample_rng(seed, i)
    redraws = 0
    while True:
        idx = rng.integers(0, data.n, size=data.n)
        try:
            return idx, fit_observed(data.subset(idx)), redraws
        except SingularCovariance:
            redraws += 1
            if redraws > MAX_REDRAWS:
                raise TooManySingularResamples(
                    f"resample {i} stayed singular after {MAX_REDRAWS} redraws")


def bootstrap_moments(data: MediationData, n_resamples: int = DEFAULT_RESAMPLES,
                      seed: int = 0, n_workers: int = 1,
                      indices=None) -> BootstrapPlan:
    """Draw resamples and fit their moments.

    ``indices`` overrides the drawn row indices (a (B, n) integer array);
    it exists for tests that force specific resamples.
    """
    if n_resamples < 1:
        raise ValueError("n_resamples must be >= 1")
    if indices is not None:
        indices = np.asarray(indices)
        results = [(indices[i], fit_observed(data.subset(indices[i])), 0)
                   for i in range(indices.shape[0])]
        n_resamples = indices.shape[0]
    elif n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(lambda i: _draw_one(data, seed, i),
                                    range(n_resamples)))
    else:
        results = [_draw_one(data, seed, i) for i in range(n_resamples)]
    return BootstrapPlan(
        data=data, n_resamples=n_resamples, seed=seed,
        moments=[r[1] for r in results],
        indices=np.vstack([r[0] for r in results]),
        n_redraws=sum(r[2] for r in results),
    )


@dataclass(frozen=True)
class BootstrapSummary:
    std_err: float
    ci_percentile: tuple[float, float]
    values: np.ndarray = field(repr=False)


def bootstrap_se(plan: BootstrapPlan, estimator) -> BootstrapSummary:
    """Bootstrap standard deviation and percentile interval of ``estimator``,
    a function of :class:`MediationMoments`."""
    values = np.empty(plan.n_resamples)
    for i, mm in enumerate(plan.moments):
        try:
            values[i] = estimator(mm)
        except Exception as exc:  # noqa: BLE001 - rewrapped with the index
            raise EstimatorFailed(i, exc) from exc
    std_err = float(values.std(ddof=1)) if values.size > 1 else 0.0
    lo, hi = np.quantile(values, [0.025, 0.975])
    return BootstrapSummary(std_err=std_err, ci_percentile=(float(lo), float(hi)),
                            values=values)


def effect_report(mm_full: MediationMoments, plan: BootstrapPlan, estimator,
                  effect_kind: str, method: str,
                  ci_multiplier=DEFAULT_CI_MULTIPLIER) -> EffectReport:
    """Point estimate on the full sample plus bootstrap SE, normal CI and t."""
    estimate = estimator(mm_full)
    summary = bootstrap_se(plan, estimator)
    return EffectReport.from_estimate(estimate, summary.std_err, effect_kind,
                                      method, ci_multiplier=ci_multiplier)
