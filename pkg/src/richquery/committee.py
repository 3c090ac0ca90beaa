"""Committee-based informativeness scoring and greedy item-set construction.

A committee is a set of classifier particles drawn from the current belief.
The informativeness proxy of a candidate query is the committee disagreement
over the query's outcome space: the entropy of the mean outcome distribution
minus the mean per-particle entropy, in bits.  Greedy construction appends
the pool item that maximizes this proxy until the set reaches its size.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .belief import GaussianBelief
from .dataset import EmbeddedItem, ItemPool
from .errors import KindMismatchError
from .responses import QueryKind, ResponseParams, outcome_space_size

MAX_EXACT_RANK = 5  # rankings enumerate up to this set size, sample beyond
DEFAULT_MC_DRAWS = 2000


@dataclass(frozen=True)
class Committee:
    particles: np.ndarray  # (n, dim)

    def __post_init__(self):
        particles = np.asarray(self.particles, dtype=np.float64)
        if particles.ndim != 2 or particles.shape[0] < 2:
            raise ValueError("committee needs at least 2 particles")
        if not np.all(np.isfinite(particles)):
            raise ValueError("committee particles must be finite")
        particles = particles.copy()
        particles.setflags(write=False)
        object.__setattr__(self, "particles", particles)

    @property
    def n(self) -> int:
        return self.particles.shape[0]

    @property
    def dim(self) -> int:
        return self.particles.shape[1]


@dataclass(frozen=True)
class OutcomeSpace:
    """How a query kind's outcomes are covered: exhaustively or by sampling."""

    kind: QueryKind
    set_size: int
    exact: bool
    n_outcomes: int
    mc_draws: int = 0


def outcome_space(kind: QueryKind, set_size: int, mc_draws: int = DEFAULT_MC_DRAWS) -> OutcomeSpace:
    if kind is QueryKind.RANK and set_size > MAX_EXACT_RANK:
        return OutcomeSpace(kind, set_size, False, outcome_space_size(kind, set_size), mc_draws)
    return OutcomeSpace(kind, set_size, True, outcome_space_size(kind, set_size))


def sample_committee(belief: GaussianBelief, n: int, seed) -> Committee:
    """Draw n i.i.d. classifier particles from the belief via its factor."""
    if n < 2:
        raise ValueError("committee size must be at least 2")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, belief.dim))
    return Committee(particles=belief.mu + z @ belief.chol.T)


def _permutation_table(m: int) -> np.ndarray:
    return np.array(list(itertools.permutations(range(m))), dtype=np.int64)


class _PoolScores:
    """Per-pool particle scores shared across greedy steps and batch calls."""

    def __init__(self, X: np.ndarray, committee: Committee, params: ResponseParams, kind: QueryKind):
        dots = committee.particles @ X.T  # (N, P)
        sign = -1.0 if kind is QueryKind.SELECT_LOW else 1.0
        self.choice = np.ascontiguousarray(sign * params.K * dots)
        self.label_margin = np.ascontiguousarray(-params.w * dots)
        self.kind = kind
        self.n_pool = X.shape[0]


def _disagreement_batch(
    scores: _PoolScores,
    base_idx: np.ndarray,
    cand_idx: np.ndarray,
    mc_draws: int,
    rng: np.random.Generator | None,
    with_se: bool = False,
):
    kind = scores.kind
    m = len(base_idx) + 1
    if kind is QueryKind.LABEL:
        if len(base_idx) != 0:
            raise KindMismatchError("label outcome spaces take a single item")
        vals = kernels.label_disagreement(scores.label_margin, cand_idx)
        return (vals, np.zeros_like(vals)) if with_se else vals
    if kind.is_selection:
        vals = kernels.selection_disagreement(scores.choice, scores.label_margin, base_idx, cand_idx)
        return (vals, np.zeros_like(vals)) if with_se else vals
    if kind is QueryKind.RANK:
        if m <= MAX_EXACT_RANK:
            perms = _permutation_table(m)
            vals = kernels.rank_disagreement_enum(
                scores.choice, scores.label_margin, base_idx, cand_idx, perms
            )
            return (vals, np.zeros_like(vals)) if with_se else vals
        if rng is None:
            rng = np.random.default_rng(0)
        N = scores.choice.shape[0]
        noise = rng.gumbel(0.0, 1.0, size=(N, mc_draws, m))
        unif = rng.random(size=(N, mc_draws, m))
        vals, se = kernels.rank_disagreement_mc(
            scores.choice, scores.label_margin, base_idx, cand_idx, noise, unif
        )
        return (vals, se) if with_se else vals
    raise KindMismatchError(f"unknown kind {kind}")


def _as_matrix(items) -> np.ndarray:
    if isinstance(items, np.ndarray):
        return np.asarray(items, dtype=np.float64)
    return np.stack(
        [it.x if hasattr(it, "x") else np.asarray(it, dtype=np.float64) for it in items]
    )


def disagreement(
    items: Sequence[EmbeddedItem] | np.ndarray,
    q_kind: QueryKind,
    committee: Committee,
    params: ResponseParams,
    mc_draws: int = DEFAULT_MC_DRAWS,
    seed: int = 0,
    return_se: bool = False,
):
    """Committee disagreement of one candidate item set, in bits.

    Exhaustive over the outcome space where tractable; rankings beyond
    ``MAX_EXACT_RANK`` items fall back to a seeded plug-in sampling estimate
    whose standard error is available via ``return_se``.
    """
    X = _as_matrix(items)
    m = X.shape[0]
    if q_kind is QueryKind.LABEL and m != 1:
        raise KindMismatchError("label disagreement takes exactly one item")
    if m < 1:
        raise KindMismatchError("disagreement needs at least one item")
    # a single-item set is the degenerate start of greedy growth: its outcome
    # space is just the label pair of that item
    scores = _PoolScores(X, committee, params, q_kind)
    base = np.arange(m - 1, dtype=np.int64)
    cand = np.array([m - 1], dtype=np.int64)
    rng = np.random.default_rng(seed)
    res = _disagreement_batch(scores, base, cand, mc_draws, rng, with_se=return_se)
    if return_se:
        vals, se = res
        return float(vals[0]), float(se[0])
    return float(res[0])


def greedy_build(
    pool: ItemPool,
    size: int,
    q_kind: QueryKind,
    committee: Committee,
    params: ResponseParams,
    mc_draws: int = DEFAULT_MC_DRAWS,
    seed: int = 0,
    candidate_idx: Sequence[int] | None = None,
) -> list[int]:
    """Greedily assemble the most informative item set; returns pool indices.

    Each step appends the candidate maximizing the disagreement of the
    extended set; exact ties break toward the lowest pool index.  Ranking
    steps beyond the enumeration limit share their sampling noise across
    candidates so comparisons stay low-variance.  ``candidate_idx`` restricts
    the searched pool (the whole pool by default).
    """
    if size < 1:
        raise ValueError("size must be at least 1")
    if q_kind is QueryKind.LABEL and size != 1:
        raise KindMismatchError("label queries take exactly one item")
    universe = (
        np.arange(len(pool), dtype=np.int64)
        if candidate_idx is None
        else np.asarray(sorted(candidate_idx), dtype=np.int64)
    )
    if len(universe) < size:
        raise ValueError(f"pool of {len(universe)} candidates cannot fill size {size}")
    scores = _PoolScores(pool.matrix(), committee, params, q_kind)
    rng = np.random.default_rng(seed)
    chosen: list[int] = []
    for _ in range(size):
        base = np.array(chosen, dtype=np.int64)
        cand = universe[~np.isin(universe, base)]
        vals = _disagreement_batch(scores, base, cand, mc_draws, rng)
        chosen.append(int(cand[int(np.argmax(vals))]))
    return chosen


def disagreement_mc_ranking(
    items: Sequence[EmbeddedItem] | np.ndarray,
    committee: Committee,
    params: ResponseParams,
    mc_draws: int,
    seed: int = 0,
) -> tuple[float, float]:
    """Force the sampled ranking estimate regardless of set size.

    Returns (estimate, standard error); used to cross-check enumeration.
    """
    X = _as_matrix(items)
    m = X.shape[0]
    scores = _PoolScores(X, committee, params, QueryKind.RANK)
    rng = np.random.default_rng(seed)
    N = committee.n
    noise = rng.gumbel(0.0, 1.0, size=(N, mc_draws, m))
    unif = rng.random(size=(N, mc_draws, m))
    base = np.arange(m - 1, dtype=np.int64)
    cand = np.array([m - 1], dtype=np.int64)
    vals, se = kernels.rank_disagreement_mc(
        scores.choice, scores.label_margin, base, cand, noise, unif
    )
    return float(vals[0]), float(se[0])


def max_disagreement_bits(kind: QueryKind, set_size: int) -> float:
    """Entropy cap of the outcome space, log2 of its size."""
    return math.log2(outcome_space_size(kind, set_size))
