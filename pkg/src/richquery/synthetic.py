"""Synthetic desk-scale tasks with a known ground-truth classifier."""

from __future__ import annotations

import numpy as np

from .dataset import AffineScoreFit, EmbeddedItem, GroundTruth, GumbelFit, ItemPool
from .responses import SimulatedAnnotator


def make_synthetic_task(
    n: int,
    raw_dim: int,
    seed: int,
    slope: float = 4.0,
    intercept: float = 0.0,
    score_noise_sd: float = 1.0,
) -> tuple[ItemPool, GroundTruth]:
    """Random unit items plus a random unit classifier scoring them affinely.

    Each item's stored score statistics follow score = slope * x.theta +
    intercept with variance score_noise_sd^2, so simulated annotators of
    either mode are consistent with the returned ground truth.  Labels are
    defined by the score threshold tau = intercept (sign of x.theta).
    """
    rng = np.random.default_rng(seed)
    theta = rng.standard_normal(raw_dim + 1)
    theta /= np.linalg.norm(theta)
    gt = GroundTruth(theta=theta, threshold_tau=intercept)
    items = []
    raw = rng.standard_normal((n, raw_dim))
    raw /= np.linalg.norm(raw, axis=1, keepdims=True)
    for i in range(n):
        x = np.concatenate(([1.0], raw[i]))
        items.append(
            EmbeddedItem(
                id=f"item{i:05d}",
                display=f"item{i:05d}",
                x=x,
                score_mean=float(slope * (x @ theta) + intercept),
                score_var=score_noise_sd**2,
            )
        )
    return ItemPool(items=tuple(items)), gt


def make_gumbel_annotator(
    gt: GroundTruth,
    slope: float,
    intercept: float,
    noise_scale: float,
    seed: int,
    flavor: str = "max",
    label_threshold: float | None = None,
) -> SimulatedAnnotator:
    return SimulatedAnnotator(
        mode="gumbel",
        gt=gt,
        score_model=AffineScoreFit(a=slope, b=intercept, residuals=np.zeros(0), r_squared=1.0),
        noise=GumbelFit(flavor=flavor, location=0.0, scale=noise_scale, ks_statistic=0.0),
        label_threshold=intercept if label_threshold is None else label_threshold,
        rng_seed=seed,
    )
