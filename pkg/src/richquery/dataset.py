"""Item pools: ingestion, ground-truth classifiers, and score-model diagnostics.

Raw items arrive as embedding vectors with per-item score statistics.  They
are unit-normalized and augmented with a leading constant 1, so every stored
vector has squared norm exactly 2 and a linear classifier over it carries
both a direction and an offset.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import optimize, stats

from .errors import (
    DegenerateLabelsError,
    DimensionError,
    ParseError,
    RankDeficiencyError,
    ZeroVarianceError,
)

_NORM_TOL = 1e-9


@dataclass(frozen=True)
class RawItem:
    """One row of an ingested corpus, before augmentation."""

    id: str
    display: str
    vector: np.ndarray
    score_mean: float | None
    score_var: float
    score_samples: np.ndarray | None = None

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=np.float64)
        if not np.all(np.isfinite(vec)):
            raise ParseError(f"item {self.id!r}: non-finite embedding entries")
        if self.score_var < 0:
            raise ParseError(f"item {self.id!r}: negative score variance")
        if self.score_mean is None and self.score_samples is None:
            raise ParseError(f"item {self.id!r}: needs score_mean or score_samples")
        object.__setattr__(self, "vector", vec)


@dataclass(frozen=True)
class EmbeddedItem:
    """Augmented item: x[0] == 1 and x[1:] is the unit-normalized raw vector."""

    id: str
    display: str
    x: np.ndarray
    score_mean: float | None
    score_var: float
    score_samples: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x[0] != 1.0:
            raise DimensionError(f"item {self.id!r}: leading coordinate must be 1")
        tail_norm = float(np.linalg.norm(x[1:]))
        if abs(tail_norm - 1.0) > _NORM_TOL:
            raise DimensionError(
                f"item {self.id!r}: embedding tail norm {tail_norm} not within "
                f"{_NORM_TOL} of 1"
            )
        x = x.copy()
        x.setflags(write=False)
        object.__setattr__(self, "x", x)


def embed_raw(raw: RawItem) -> EmbeddedItem:
    """Unit-normalize the raw vector, then prepend the constant 1."""
    norm = float(np.linalg.norm(raw.vector))
    if norm == 0.0:
        raise ParseError(f"item {raw.id!r}: zero embedding vector cannot be normalized")
    x = np.concatenate(([1.0], raw.vector / norm))
    return EmbeddedItem(
        id=raw.id,
        display=raw.display,
        x=x,
        score_mean=raw.score_mean,
        score_var=raw.score_var,
        score_samples=raw.score_samples,
    )


@dataclass(frozen=True)
class ItemPool:
    """The query universe: a fixed list of augmented items sharing one dimension."""

    items: tuple[EmbeddedItem, ...]
    dim: int = field(init=False)

    def __post_init__(self):
        items = tuple(self.items)
        if not items:
            raise ParseError("empty pool")
        dims = {len(it.x) for it in items}
        if len(dims) != 1:
            raise DimensionError(f"pool mixes dimensions {sorted(dims)}")
        ids = [it.id for it in items]
        if len(set(ids)) != len(ids):
            raise ParseError("duplicate item ids in pool")
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "dim", dims.pop())

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, i: int) -> EmbeddedItem:
        return self.items[i]

    def matrix(self) -> np.ndarray:
        """All item vectors stacked as an (n, dim) array."""
        return np.stack([it.x for it in self.items])

    def score_means(self) -> np.ndarray:
        return np.array(
            [math.nan if it.score_mean is None else it.score_mean for it in self.items]
        )


@dataclass(frozen=True)
class GroundTruth:
    """Unit-norm linear classifier, optionally with the score threshold that
    defines its labels."""

    theta: np.ndarray
    threshold_tau: float | None = None

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=np.float64)
        norm = float(np.linalg.norm(theta))
        if abs(norm - 1.0) > _NORM_TOL:
            raise DimensionError(f"ground-truth norm {norm} not within {_NORM_TOL} of 1")
        theta = theta.copy()
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)


@dataclass(frozen=True)
class AffineScoreFit:
    """Least-squares affine map from boundary distance to score."""

    a: float
    b: float
    residuals: np.ndarray
    r_squared: float


@dataclass(frozen=True)
class GumbelFit:
    """Maximum-likelihood extreme-value fit with its KS goodness statistic."""

    flavor: str  # "max" or "min"
    location: float
    scale: float
    ks_statistic: float

    def __post_init__(self):
        if self.flavor not in ("max", "min"):
            raise ValueError(f"unknown flavor {self.flavor!r}")
        if self.scale <= 0:
            raise ZeroVarianceError("fitted scale must be positive")


def load_pool(path, format: str = "word-csv") -> ItemPool:
    """Read a UTF-8 CSV corpus into an augmented item pool.

    Expected header: ``id,display,score_mean,score_var,v1..vd`` with optional
    trailing ``s1..sk`` columns holding raw score samples (image-style rows).
    Row order is preserved.
    """
    if format not in ("word-csv", "image-csv"):
        raise ParseError(f"unknown format {format!r}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if header[:4] != ["id", "display", "score_mean", "score_var"]:
            raise ParseError(f"{path}: unexpected header {header[:4]}")
        vcols = [i for i, h in enumerate(header) if h.startswith("v")]
        scols = [i for i, h in enumerate(header) if h.startswith("s") and h != "score_mean" and h != "score_var"]
        if not vcols:
            raise ParseError(f"{path}: no embedding columns v1..vd")
        d = len(vcols)
        items = []
        for rownum, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DimensionError(
                    f"{path} row {rownum}: {len(row)} fields, header has {len(header)}"
                )
            try:
                mean_field = row[2].strip()
                score_mean = float(mean_field) if mean_field else None
                score_var = float(row[3])
                vector = np.array([float(row[i]) for i in vcols])
                samples = None
                if scols:
                    vals = [row[i].strip() for i in scols]
                    vals = [v for v in vals if v]
                    if vals:
                        samples = np.array([float(v) for v in vals])
            except ValueError as exc:
                raise ParseError(f"{path} row {rownum}: {exc}") from None
            if len(vector) != d:
                raise DimensionError(f"{path} row {rownum}: dimension {len(vector)} != {d}")
            raw = RawItem(
                id=row[0],
                display=row[1],
                vector=vector,
                score_mean=score_mean,
                score_var=score_var,
                score_samples=samples,
            )
            items.append(embed_raw(raw))
        if not items:
            raise ParseError(f"{path}: no data rows")
    return ItemPool(items=tuple(items))


def _logistic_loss_grad(theta: np.ndarray, X: np.ndarray, y: np.ndarray, ridge: float):
    margins = y * (X @ theta)
    # log(1 + exp(-m)) computed stably
    loss = np.sum(np.logaddexp(0.0, -margins)) + 0.5 * ridge * theta @ theta
    p = 1.0 / (1.0 + np.exp(np.clip(margins, -700, 700)))
    grad = -(X.T @ (y * p)) + ridge * theta
    return loss, grad


def fit_ground_truth(pool: ItemPool, labels: Sequence[int]) -> GroundTruth:
    """Fit a unit-norm classifier reproducing the given {-1,+1} labels.

    Uses a logistic-loss surrogate (exact 0-1 minimization is intractable)
    with a tiny ridge term for identifiability, then normalizes.
    """
    y = np.asarray(labels, dtype=np.float64)
    if len(y) != len(pool):
        raise DegenerateLabelsError("labels must cover all items")
    classes = set(np.sign(y).tolist())
    if classes != {-1.0, 1.0}:
        raise DegenerateLabelsError(f"need both label classes, got {sorted(classes)}")
    X = pool.matrix()
    res = optimize.minimize(
        _logistic_loss_grad,
        x0=np.zeros(pool.dim),
        args=(X, y, 1e-6),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": 500},
    )
    theta = res.x
    norm = float(np.linalg.norm(theta))
    if norm == 0.0:
        raise DegenerateLabelsError("degenerate fit: zero classifier")
    return GroundTruth(theta=theta / norm)


def fit_affine_score(pool: ItemPool, gt: GroundTruth) -> AffineScoreFit:
    """Least-squares fit of score_mean against the signed boundary distance."""
    scores = pool.score_means()
    if np.any(np.isnan(scores)):
        raise ParseError("every item needs score_mean for the affine fit")
    z = pool.matrix() @ gt.theta
    var_z = float(np.var(z))
    if var_z == 0.0:
        raise RankDeficiencyError("all boundary distances identical; slope unidentifiable")
    a = float(np.cov(z, scores, bias=True)[0, 1] / var_z)
    b = float(np.mean(scores) - a * np.mean(z))
    residuals = scores - (a * z + b)
    ss_res = float(residuals @ residuals)
    ss_tot = float(np.sum((scores - np.mean(scores)) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return AffineScoreFit(a=a, b=b, residuals=residuals, r_squared=r_squared)


def _gumbel_max_mle(x: np.ndarray) -> tuple[float, float]:
    """Solve the profile likelihood equations for the max-flavored fit.

    The scale solves beta = mean(x) - sum(x e^{-x/beta}) / sum(e^{-x/beta});
    the location then follows in closed form.  Solved by bracketed root
    finding to near machine precision, which keeps the fit exactly shift- and
    scale-equivariant up to floating point.
    """
    shift = float(np.min(x))
    xs = x - shift  # keeps the exponentials bounded by 1
    xbar = float(np.mean(xs))

    def g(beta: float) -> float:
        e = np.exp(-xs / beta)
        return beta - xbar + float(xs @ e) / float(np.sum(e))

    s = float(np.std(x))
    lo, hi = 1e-8 * s, 20.0 * s
    while g(hi) < 0:
        hi *= 4.0
    beta = optimize.brentq(g, lo, hi, xtol=1e-15 * s, rtol=8.9e-16)
    loc = -beta * math.log(float(np.mean(np.exp(-xs / beta)))) + shift
    return loc, beta


def fit_gumbel(residuals: np.ndarray, flavor: str = "max") -> GumbelFit:
    """Maximum-likelihood extreme-value fit plus the one-sample KS statistic.

    The KS statistic is the raw supremum of |empirical CDF - fitted CDF| over
    the sample points, without small-sample correction.
    """
    x = np.asarray(residuals, dtype=np.float64)
    if len(x) < 30:
        raise ZeroVarianceError(f"need at least 30 residuals, got {len(x)}")
    if not np.all(np.isfinite(x)):
        raise ZeroVarianceError("residuals must be finite")
    if float(np.ptp(x)) == 0.0:
        raise ZeroVarianceError("constant residuals; scale unidentifiable")
    if flavor not in ("max", "min"):
        raise ValueError(f"unknown flavor {flavor!r}")
    if flavor == "max":
        loc, scale = _gumbel_max_mle(x)
        dist = stats.gumbel_r(loc=loc, scale=scale)
    else:
        neg_loc, scale = _gumbel_max_mle(-x)
        loc = -neg_loc
        dist = stats.gumbel_l(loc=loc, scale=scale)
    ks = stats.kstest(x, dist.cdf).statistic
    return GumbelFit(flavor=flavor, location=float(loc), scale=float(scale), ks_statistic=float(ks))
