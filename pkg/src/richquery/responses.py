"""Response models: answer likelihoods and simulated annotators.

Four query kinds are supported.  A plain label query asks for the sign of a
single item.  Exemplar-selection queries ask for the highest- (or lowest-)
scoring item of a set plus its label; the choice follows a logit model with
inverse temperature K.  Ranking queries ask for a full best-first ordering
plus the number of positively labeled items; the ordering follows a
sequential (stagewise softmax) choice model over shrinking remainders.

Sign convention of the label model: P[y=+1 | x, theta] = 1 / (1 + exp(w *
theta.x)).  With positive w this probability decreases as theta.x grows, so
callers that want "high score means positive label" pass negative w.  The
package implements the convention literally and leaves the sign to
configuration.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit, logsumexp

from .dataset import AffineScoreFit, EmbeddedItem, GroundTruth, GumbelFit
from .errors import DimensionError, KindMismatchError


class QueryKind(enum.Enum):
    LABEL = "label"
    SELECT_HIGH = "select_high"
    SELECT_LOW = "select_low"
    RANK = "rank"

    @property
    def is_selection(self) -> bool:
        return self in (QueryKind.SELECT_HIGH, QueryKind.SELECT_LOW)


@dataclass(frozen=True)
class ResponseParams:
    """Likelihood scales: label inverse-scale w, score slope a, noise scale sigma.

    K = a / sigma is the logit inverse temperature of the choice models.
    """

    w: float
    a: float
    sigma: float
    K: float = None  # type: ignore[assignment]

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        k = self.a / self.sigma
        if self.K is None:
            object.__setattr__(self, "K", k)
        elif abs(self.K - k) > 1e-12 * max(1.0, abs(k)):
            raise ValueError(f"K={self.K} inconsistent with a/sigma={k}")


@dataclass(frozen=True)
class Query:
    kind: QueryKind
    items: tuple[EmbeddedItem, ...]

    def __post_init__(self):
        items = tuple(self.items)
        ids = [it.id for it in items]
        if len(set(ids)) != len(ids):
            raise KindMismatchError("query items must have distinct ids")
        if self.kind is QueryKind.LABEL:
            if len(items) != 1:
                raise KindMismatchError("label query takes exactly one item")
        elif len(items) < 2:
            raise KindMismatchError(f"{self.kind.value} query needs at least 2 items")
        object.__setattr__(self, "items", items)

    def __len__(self) -> int:
        return len(self.items)

    def matrix(self) -> np.ndarray:
        return np.stack([it.x for it in self.items])


@dataclass(frozen=True)
class LabelAnswer:
    y: int  # -1 or +1

    def __post_init__(self):
        if self.y not in (-1, 1):
            raise KindMismatchError(f"label must be -1 or +1, got {self.y}")


@dataclass(frozen=True)
class SelectionAnswer:
    index: int  # 0-based into query items
    y: int  # label of the selected item

    def __post_init__(self):
        if self.y not in (-1, 1):
            raise KindMismatchError(f"label must be -1 or +1, got {self.y}")


@dataclass(frozen=True)
class RankingAnswer:
    order: tuple[int, ...]  # permutation of item indices, best first
    threshold: int  # count of positively labeled items, 0..|S|

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(int(i) for i in self.order))

    def validate(self, n_items: int) -> None:
        if sorted(self.order) != list(range(n_items)):
            raise KindMismatchError(f"order {self.order} is not a permutation of 0..{n_items - 1}")
        if not 0 <= self.threshold <= n_items:
            raise KindMismatchError(f"threshold {self.threshold} outside 0..{n_items}")


Response = LabelAnswer | SelectionAnswer | RankingAnswer


def _check_dims(x: np.ndarray, theta: np.ndarray) -> None:
    if x.shape[-1] != theta.shape[-1]:
        raise DimensionError(f"embedding dim {x.shape[-1]} != classifier dim {theta.shape[-1]}")


def label_likelihood(x: np.ndarray, theta: np.ndarray, w: float, y: int) -> float:
    """P[y | x, theta] under the logistic label model."""
    x = np.asarray(x, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    _check_dims(x, theta)
    z = w * float(x @ theta)
    if y == 1:
        return float(expit(-z))
    if y == -1:
        return float(expit(z))
    raise KindMismatchError(f"label must be -1 or +1, got {y}")


def choice_sign(kind: QueryKind) -> float:
    if kind is QueryKind.SELECT_HIGH:
        return 1.0
    if kind is QueryKind.SELECT_LOW:
        return -1.0
    raise KindMismatchError(f"{kind.value} is not a selection kind")


def selection_likelihood(index: int, query: Query, theta: np.ndarray, params: ResponseParams) -> float:
    """Logit probability that ``index`` is picked from the query set."""
    s = choice_sign(query.kind)
    X = query.matrix()
    _check_dims(X, np.asarray(theta))
    g = s * params.K * (X @ np.asarray(theta, dtype=np.float64))
    g = g - np.max(g)  # stable for large |K * theta.x|
    e = np.exp(g)
    return float(e[index] / np.sum(e))


def ranking_likelihood(order: Sequence[int], query: Query, theta: np.ndarray, params: ResponseParams) -> float:
    """Sequential-choice probability of a full best-first ordering."""
    if query.kind is not QueryKind.RANK:
        raise KindMismatchError("ranking_likelihood needs a rank query")
    m = len(query)
    order = list(order)
    if sorted(order) != list(range(m)):
        raise KindMismatchError(f"order {order} is not a permutation of 0..{m - 1}")
    X = query.matrix()
    _check_dims(X, np.asarray(theta))
    g = params.K * (X @ np.asarray(theta, dtype=np.float64))
    logp = 0.0
    for j in range(m - 1):
        rest = order[j:]
        logp += g[order[j]] - logsumexp(g[rest])
    return float(math.exp(logp))


def positive_count_pmf(p_plus: np.ndarray) -> np.ndarray:
    """Distribution of the number of positives among independent item labels.

    Standard convolution over items: entry k is P[exactly k positive labels].
    """
    pmf = np.array([1.0])
    for p in np.asarray(p_plus, dtype=np.float64):
        pmf = np.convolve(pmf, [1.0 - p, p])
    return pmf


def response_likelihood(resp: Response, query: Query, theta: np.ndarray, params: ResponseParams) -> float:
    """Probability of a full response; normalizes to 1 over the outcome space.

    Label: the logistic label model.  Selection: choice probability times the
    label factor of the chosen item.  Rank: ordering probability times the
    probability that the number of independently drawn positive labels equals
    the reported threshold.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if query.kind is QueryKind.LABEL:
        if not isinstance(resp, LabelAnswer):
            raise KindMismatchError("label query needs a LabelAnswer")
        return label_likelihood(query.items[0].x, theta, params.w, resp.y)
    if query.kind.is_selection:
        if not isinstance(resp, SelectionAnswer):
            raise KindMismatchError(f"{query.kind.value} query needs a SelectionAnswer")
        if not 0 <= resp.index < len(query):
            raise KindMismatchError(f"index {resp.index} outside query of size {len(query)}")
        p_choice = selection_likelihood(resp.index, query, theta, params)
        p_label = label_likelihood(query.items[resp.index].x, theta, params.w, resp.y)
        return p_choice * p_label
    if query.kind is QueryKind.RANK:
        if not isinstance(resp, RankingAnswer):
            raise KindMismatchError("rank query needs a RankingAnswer")
        resp.validate(len(query))
        p_order = ranking_likelihood(resp.order, query, theta, params)
        p_plus = np.array(
            [label_likelihood(it.x, theta, params.w, 1) for it in query.items]
        )
        pmf = positive_count_pmf(p_plus)
        return p_order * float(pmf[resp.threshold])
    raise KindMismatchError(f"unknown kind {query.kind}")


def outcome_space_size(kind: QueryKind, set_size: int) -> int:
    """Number of distinct answers a query can produce."""
    if kind is QueryKind.LABEL:
        return 2
    if kind.is_selection:
        return 2 * set_size
    if kind is QueryKind.RANK:
        return math.factorial(set_size + 1)
    raise KindMismatchError(f"unknown kind {kind}")


def enumerate_outcomes(kind: QueryKind, set_size: int) -> list[Response]:
    """Exhaustive outcome list; rankings explode, so keep set_size small."""
    if kind is QueryKind.LABEL:
        return [LabelAnswer(y=-1), LabelAnswer(y=1)]
    if kind.is_selection:
        return [
            SelectionAnswer(index=i, y=y)
            for i in range(set_size)
            for y in (-1, 1)
        ]
    if kind is QueryKind.RANK:
        return [
            RankingAnswer(order=perm, threshold=t)
            for perm in itertools.permutations(range(set_size))
            for t in range(set_size + 1)
        ]
    raise KindMismatchError(f"unknown kind {kind}")


@dataclass
class SimulatedAnnotator:
    """Answers queries from noisy per-item scores.

    ``gumbel`` mode scores items as slope * theta.x + intercept plus
    extreme-value noise.  ``empirical`` mode draws scores from each item's
    stored statistics (sample set if present, else a normal with the stored
    mean and variance).  Either way the answer is deterministic given the
    drawn scores: argmax/argmin for selections, a descending sort for
    rankings, and sign(score - label_threshold) for labels.  The ranking
    threshold is the count of scores above label_threshold.

    Owns its random stream; clone with a fresh seed for parallel use.
    """

    mode: str  # "gumbel" or "empirical"
    gt: GroundTruth | None = None
    score_model: AffineScoreFit | None = None
    noise: GumbelFit | None = None
    label_threshold: float = 0.0
    rng_seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.mode not in ("gumbel", "empirical"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "gumbel":
            if self.gt is None or self.score_model is None or self.noise is None:
                raise ValueError("gumbel mode needs gt, score_model, and noise")
        self._rng = np.random.default_rng(self.rng_seed)

    def _draw_scores(self, items: Sequence[EmbeddedItem]) -> np.ndarray:
        if self.mode == "gumbel":
            X = np.stack([it.x for it in items])
            base = self.score_model.a * (X @ self.gt.theta) + self.score_model.b
            n = len(items)
            if self.noise.flavor == "max":
                noise = self._rng.gumbel(self.noise.location, self.noise.scale, size=n)
            else:
                noise = -self._rng.gumbel(-self.noise.location, self.noise.scale, size=n)
            return base + noise
        scores = np.empty(len(items))
        for i, it in enumerate(items):
            if it.score_samples is not None and len(it.score_samples) > 0:
                scores[i] = self._rng.choice(it.score_samples)
            elif it.score_mean is not None:
                scores[i] = self._rng.normal(it.score_mean, math.sqrt(it.score_var))
            else:
                raise KindMismatchError(f"item {it.id!r} has no score statistics")
        return scores

    def answer(self, query: Query) -> Response:
        scores = self._draw_scores(query.items)
        tau = self.label_threshold
        if query.kind is QueryKind.LABEL:
            return LabelAnswer(y=1 if scores[0] >= tau else -1)
        if query.kind is QueryKind.SELECT_HIGH:
            i = int(np.argmax(scores))
            return SelectionAnswer(index=i, y=1 if scores[i] >= tau else -1)
        if query.kind is QueryKind.SELECT_LOW:
            i = int(np.argmin(scores))
            return SelectionAnswer(index=i, y=1 if scores[i] >= tau else -1)
        if query.kind is QueryKind.RANK:
            order = tuple(int(i) for i in np.argsort(-scores, kind="stable"))
            threshold = int(np.sum(scores >= tau))
            return RankingAnswer(order=order, threshold=threshold)
        raise KindMismatchError(f"unknown kind {query.kind}")


def simulate_answer(query: Query, annotator: SimulatedAnnotator) -> Response:
    """Module-level alias for :meth:`SimulatedAnnotator.answer`."""
    return annotator.answer(query)
