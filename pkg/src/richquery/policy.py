"""Cost-aware query policy: response-time models and information-rate selection.

Human response time is modeled per query kind as an affine function of the
set size.  The information value of a (kind, size) configuration is estimated
as the committee-disagreement proxy averaged over a few probes and expressed
relative to the single-label query; dividing by predicted cost gives an
information rate, and the policy picks the configuration with the highest
rate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .belief import GaussianBelief
from .committee import greedy_build, sample_committee, _PoolScores, _disagreement_batch
from .dataset import ItemPool
from .errors import (
    DegenerateCommitteeError,
    InfeasibleConfigError,
    NoFeasibleQueryError,
    RankDeficiencyError,
)
from .responses import QueryKind, ResponseParams

# Coefficients fitted by least squares on crowdsourced word-annotation
# response times; label queries were timed as a constant.
REFERENCE_COSTS = {
    QueryKind.LABEL: (4.37, 0.0),
    QueryKind.SELECT_HIGH: (4.01, 0.63),
    QueryKind.SELECT_LOW: (4.01, 0.63),
    QueryKind.RANK: (-0.32, 4.41),
}


@dataclass(frozen=True)
class CostModel:
    """Per-kind affine time model: seconds = beta0 + beta1 * |S|.

    Label queries use constant-time semantics (beta1 ignored).  The feasible
    size range declared with the model bounds where predictions are trusted.
    """

    coeffs: dict[QueryKind, tuple[float, float]]
    feasible_sizes: tuple[int, int] = (1, 10)

    def kinds(self) -> list[QueryKind]:
        return list(self.coeffs)


def reference_cost_model() -> CostModel:
    return CostModel(coeffs=dict(REFERENCE_COSTS))


def fit_cost_model(
    observations: Iterable[tuple[QueryKind, int, float]],
    feasible_sizes: tuple[int, int] = (1, 10),
) -> CostModel:
    """Ordinary least squares of seconds on set size, independently per kind.

    Label observations fit a constant (their prediction ignores size).  A
    sloped kind observed at a single size has no identifiable slope.
    """
    by_kind: dict[QueryKind, list[tuple[int, float]]] = {}
    for kind, size, seconds in observations:
        by_kind.setdefault(kind, []).append((int(size), float(seconds)))
    if not by_kind:
        raise RankDeficiencyError("no observations")
    coeffs = {}
    for kind, rows in by_kind.items():
        sizes = np.array([r[0] for r in rows], dtype=np.float64)
        secs = np.array([r[1] for r in rows], dtype=np.float64)
        if kind is QueryKind.LABEL:
            coeffs[kind] = (float(np.mean(secs)), 0.0)
            continue
        if len(np.unique(sizes)) < 2:
            raise RankDeficiencyError(
                f"{kind.value}: need at least 2 distinct set sizes to fit a slope"
            )
        var = float(np.var(sizes))
        beta1 = float(np.cov(sizes, secs, bias=True)[0, 1] / var)
        beta0 = float(np.mean(secs) - beta1 * np.mean(sizes))
        coeffs[kind] = (beta0, beta1)
    return CostModel(coeffs=coeffs, feasible_sizes=feasible_sizes)


def predict_cost(model: CostModel, kind: QueryKind, set_size: int) -> float:
    """Expected seconds to answer one query of the given shape."""
    if kind not in model.coeffs:
        raise InfeasibleConfigError(f"no cost coefficients for kind {kind.value}")
    beta0, beta1 = model.coeffs[kind]
    if kind is QueryKind.LABEL:
        return beta0
    lo, hi = model.feasible_sizes
    if not lo <= set_size <= hi:
        raise InfeasibleConfigError(f"set size {set_size} outside feasible range {lo}..{hi}")
    t = beta0 + beta1 * set_size
    if t <= 0:
        raise InfeasibleConfigError(f"{kind.value} at |S|={set_size} predicts nonpositive time {t}")
    return t


def serialize_cost_model(model: CostModel) -> str:
    """Flat text form, one `kind,beta0,beta1` row per kind."""
    lines = [f"{kind.value},{b0!r},{b1!r}" for kind, (b0, b1) in sorted(model.coeffs.items(), key=lambda kv: kv[0].value)]
    return "\n".join(lines) + "\n"


def parse_cost_model(text: str, feasible_sizes: tuple[int, int] = (1, 10)) -> CostModel:
    coeffs = {}
    for line in text.strip().splitlines():
        kind_s, b0, b1 = line.strip().split(",")
        coeffs[QueryKind(kind_s)] = (float(b0), float(b1))
    return CostModel(coeffs=coeffs, feasible_sizes=feasible_sizes)


@dataclass(frozen=True)
class RateRow:
    kind: QueryKind
    set_size: int
    ratio: float  # information gain relative to the label query
    cost: float  # seconds
    rate: float  # ratio per second


@dataclass(frozen=True)
class InfoRateTable:
    rows: tuple[RateRow, ...]

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))

    def row(self, kind: QueryKind, set_size: int) -> RateRow:
        for r in self.rows:
            if r.kind is kind and r.set_size == set_size:
                return r
        raise KeyError((kind, set_size))


@dataclass
class ProbeSettings:
    """Knobs for the ratio-estimation probes.

    The disagreement proxy of a committee with N particles cannot exceed
    log2(N), and small committees overstate small disagreements, so cells are
    re-evaluated on a larger committee than the one used to build the greedy
    sets; ``eval_committee_size`` controls that second committee.
    """

    committee_size: int = 50
    eval_committee_size: int = 300
    mc_draws: int = 500
    probe_pool_size: int | None = 200  # subsample of the pool scanned per probe


def estimate_info_ratios(
    pool: ItemPool,
    belief: GaussianBelief,
    grid: Sequence[tuple[QueryKind, int]],
    params: ResponseParams,
    probe: ProbeSettings = ProbeSettings(),
    n_probes: int = 3,
    seed: int = 0,
) -> dict[tuple[QueryKind, int], float]:
    """Average disagreement per grid cell, relative to the label query.

    Each probe resamples the committee, greedily builds one item set per kind
    at that kind's largest grid size, and reads the proxy at every smaller
    grid size off the greedy prefixes (greedy sets are nested, so prefixes
    share the random draws across sizes).  The label cell anchors the ratios
    at exactly 1.
    """
    cells = list(grid)
    if not cells:
        raise ValueError("empty grid")
    if (QueryKind.LABEL, 1) not in cells:
        raise ValueError("grid must contain the (label, 1) reference cell")
    sizes_by_kind: dict[QueryKind, list[int]] = {}
    for kind, size in cells:
        sizes_by_kind.setdefault(kind, []).append(size)
    sums = {cell: 0.0 for cell in cells}
    rng = np.random.default_rng(seed)
    for p in range(n_probes):
        committee = sample_committee(belief, probe.committee_size, rng.integers(2**63))
        eval_committee = sample_committee(belief, probe.eval_committee_size, rng.integers(2**63))
        if probe.probe_pool_size is not None and probe.probe_pool_size < len(pool):
            cand = rng.choice(len(pool), size=probe.probe_pool_size, replace=False)
            cand_idx = sorted(int(i) for i in cand)
        else:
            cand_idx = None
        for kind, sizes in sizes_by_kind.items():
            top = max(sizes)
            chosen = greedy_build(
                pool,
                top,
                kind,
                committee,
                params,
                mc_draws=probe.mc_draws,
                seed=int(rng.integers(2**63)),
                candidate_idx=cand_idx,
            )
            scores = _PoolScores(pool.matrix(), eval_committee, params, kind)
            probe_rng = np.random.default_rng(int(rng.integers(2**63)))
            for size in sizes:
                base = np.array(chosen[: size - 1], dtype=np.int64)
                cand_last = np.array([chosen[size - 1]], dtype=np.int64)
                val = _disagreement_batch(scores, base, cand_last, probe.mc_draws, probe_rng)
                sums[(kind, size)] += float(val[0])
    label_mean = sums[(QueryKind.LABEL, 1)] / n_probes
    if label_mean <= 0.0:
        raise DegenerateCommitteeError(
            "label reference information is zero; committee carries no disagreement"
        )
    ratios = {}
    for cell, total in sums.items():
        ratios[cell] = (total / n_probes) / label_mean
    ratios[(QueryKind.LABEL, 1)] = 1.0
    return ratios


def build_rate_table(
    ratios: dict[tuple[QueryKind, int], float], cost_model: CostModel
) -> InfoRateTable:
    rows = []
    for (kind, size), ratio in sorted(ratios.items(), key=lambda kv: (kv[0][0].value, kv[0][1])):
        cost = predict_cost(cost_model, kind, size)
        rows.append(RateRow(kind=kind, set_size=size, ratio=ratio, cost=cost, rate=ratio / cost))
    return InfoRateTable(rows=tuple(rows))


def select_query_config(table: InfoRateTable) -> tuple[QueryKind, int]:
    """Highest information rate wins; ties prefer cheaper, then smaller queries."""
    if not table.rows:
        raise NoFeasibleQueryError("empty rate table")
    feasible = [r for r in table.rows if r.cost > 0]
    if not feasible or all(r.rate <= 0 for r in feasible):
        raise NoFeasibleQueryError("no configuration has a positive information rate")
    best = max(feasible, key=lambda r: (r.rate, -r.cost, -r.set_size))
    return best.kind, best.set_size
