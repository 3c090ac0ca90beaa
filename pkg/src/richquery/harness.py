"""Experiment orchestration: run learning loops against simulated annotators.

A run repeatedly picks a query (kind, size, and items according to the
configured policy), asks the simulated annotator, folds the answer into the
Gaussian belief, and records alignment and accuracy metrics, until the
covariance-determinant stopping rule fires or the interaction cap is hit.
Runs are deterministic functions of their configuration: all randomness flows
from the explicit seeds through separate named streams, so two policies that
share a configuration consume identical annotator randomness.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from .belief import (
    GaussianBelief,
    StoppingRule,
    UpdateSettings,
    isotropic_belief,
    joint_update,
    label_update,
    ranking_update,
    should_stop,
)
from .committee import greedy_build, sample_committee
from .dataset import GroundTruth, ItemPool, load_pool
from .errors import ConfigError, DegenerateLabelsError, NumericalDegeneracyError, RichQueryError
from .policy import (
    CostModel,
    ProbeSettings,
    build_rate_table,
    estimate_info_ratios,
    predict_cost,
    reference_cost_model,
    select_query_config,
)
from .responses import (
    LabelAnswer,
    Query,
    QueryKind,
    RankingAnswer,
    Response,
    ResponseParams,
    SelectionAnswer,
)
from .synthetic import make_gumbel_annotator, make_synthetic_task

_SIGNED_TO_Y01 = {1: 0, -1: 1}


def apply_response(
    belief: GaussianBelief,
    query: Query,
    resp: Response,
    params: ResponseParams,
    settings: UpdateSettings = UpdateSettings(),
) -> GaussianBelief:
    """Dispatch one observed answer to the matching belief update."""
    if query.kind is QueryKind.LABEL:
        if not isinstance(resp, LabelAnswer):
            raise ConfigError("label query needs a LabelAnswer")
        return label_update(
            belief, query.items[0].x, _SIGNED_TO_Y01[resp.y], params.w, settings
        )
    if query.kind.is_selection:
        if not isinstance(resp, SelectionAnswer):
            raise ConfigError(f"{query.kind.value} query needs a SelectionAnswer")
        return joint_update(belief, query, resp, params, settings)
    if query.kind is QueryKind.RANK:
        if not isinstance(resp, RankingAnswer):
            raise ConfigError("rank query needs a RankingAnswer")
        return ranking_update(belief, query, resp, params, settings)
    raise ConfigError(f"unknown kind {query.kind}")


@dataclass(frozen=True)
class ExperimentConfig:
    # pool source: a CSV corpus or a generated task
    pool_csv: str | None = None
    pool_format: str = "word-csv"
    synthetic_n: int | None = None
    synthetic_dim: int | None = None
    synthetic_seed: int = 0
    # query policy: fixed kind, rate-adaptive, or random-item baseline
    policy: str = "fixed"  # fixed | rate | random
    kind: str = "select"  # label | select | select_high | select_low | rank
    set_size: int = 4
    # response model
    w: float = -0.5
    a: float = 2.0
    sigma: float = 2.0
    intercept: float = 0.0
    noise_flavor: str = "max"
    label_threshold: float | None = None  # defaults to intercept
    # belief initialization; default variance matches a centered box prior
    prior_m: float = 1.0
    sigma0_scale: float | None = None
    # stopping
    epsilon: float | None = None
    max_interactions: int | None = None
    # committee
    committee_size: int = 50
    mc_draws: int = 2000
    # rate-adaptive policy probes
    rate_kinds: tuple[str, ...] = ("select_high", "rank")
    rate_sizes: tuple[int, ...] = (2, 3, 4)
    rate_probes: int = 2
    rate_probe_pool: int = 150
    rate_mc_draws: int = 300
    rate_committee: int = 30
    # evaluation filter: drop items whose positive-score probability is
    # within this band of 0.5 (keeps only strongly scored items)
    eval_band: float = 0.1
    # seeds
    seed: int = 0
    annotator_seed: int = 1
    # output
    output_path: str | None = None

    def validate(self) -> None:
        if self.pool_csv is None and (self.synthetic_n is None or self.synthetic_dim is None):
            raise ConfigError("config needs pool_csv or synthetic_n + synthetic_dim")
        if self.epsilon is None and self.max_interactions is None:
            raise ConfigError("config needs a stop condition: epsilon or max_interactions")
        if self.policy not in ("fixed", "rate", "random"):
            raise ConfigError(f"unknown policy {self.policy!r}")
        if self.kind not in ("label", "select", "select_high", "select_low", "rank"):
            raise ConfigError(f"unknown kind {self.kind!r}")

    @property
    def tau(self) -> float:
        return self.intercept if self.label_threshold is None else self.label_threshold

    def to_json(self) -> str:
        raw = dataclasses.asdict(self)
        raw["rate_kinds"] = list(self.rate_kinds)
        raw["rate_sizes"] = list(self.rate_sizes)
        return json.dumps(raw, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        raw = json.loads(text)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        for key in ("rate_kinds", "rate_sizes"):
            if key in raw:
                raw[key] = tuple(raw[key])
        cfg = cls(**raw)
        cfg.validate()
        return cfg


@dataclass(frozen=True)
class TraceRecord:
    t: int
    kind: str
    set_size: int
    item_ids: tuple[str, ...]
    response: Response
    mse_to_gt: float
    trace_sigma: float
    log_det_sigma: float
    accuracy: float
    cum_predicted_seconds: float


class ExperimentAborted(RichQueryError):
    """A run died mid-loop; carries the partial trace up to the failure."""

    def __init__(self, message: str, records: list["TraceRecord"]):
        super().__init__(message)
        self.records = records


@dataclass(frozen=True)
class EvalSet:
    """Frozen strong-score evaluation items with their reference labels."""

    item_ids: tuple[str, ...]
    X: np.ndarray
    labels: np.ndarray  # -1 / +1


def positive_probability(item, tau: float) -> float:
    """P[sampled score >= tau] under the item's stored statistics."""
    if item.score_samples is not None and len(item.score_samples) > 0:
        return float(np.mean(item.score_samples >= tau))
    if item.score_var > 0:
        return float(1.0 - norm.cdf((tau - item.score_mean) / math.sqrt(item.score_var)))
    return 1.0 if item.score_mean >= tau else 0.0


def build_eval_set(pool: ItemPool, tau: float, band: float) -> EvalSet:
    """Keep items whose positive-score probability sits outside 0.5 +/- band."""
    ids, rows, labels = [], [], []
    for item in pool.items:
        p = positive_probability(item, tau)
        if abs(p - 0.5) <= band:
            continue
        ids.append(item.id)
        rows.append(item.x)
        if item.score_mean is not None:
            labels.append(1 if item.score_mean >= tau else -1)
        else:
            labels.append(1 if p >= 0.5 else -1)
    if not ids:
        raise ConfigError("evaluation filter removed every item; widen the band")
    return EvalSet(item_ids=tuple(ids), X=np.stack(rows), labels=np.array(labels))


def evaluate_accuracy(mu: np.ndarray, eval_set: EvalSet) -> float:
    """Sign-agreement rate on the evaluation set; sign(0) counts as positive."""
    if len(eval_set.item_ids) == 0:
        raise ConfigError("empty evaluation set")
    preds = np.where(eval_set.X @ mu >= 0, 1, -1)
    return float(np.mean(preds == eval_set.labels))


def normalized_mse(mu: np.ndarray, theta: np.ndarray) -> float:
    nrm = float(np.linalg.norm(mu))
    unit = mu / nrm if nrm > 1e-300 else mu
    return float(np.sum((unit - theta) ** 2))


def resolve_pool(config: ExperimentConfig) -> tuple[ItemPool, GroundTruth]:
    if config.pool_csv is not None:
        pool = load_pool(config.pool_csv, config.pool_format)
        labels = [1 if (it.score_mean or 0.0) >= config.tau else -1 for it in pool.items]
        if len(set(labels)) < 2:
            raise DegenerateLabelsError("pool labels are single-class at this threshold")
        from .dataset import fit_ground_truth

        gt = fit_ground_truth(pool, labels)
        return pool, GroundTruth(theta=gt.theta, threshold_tau=config.tau)
    pool, gt = make_synthetic_task(
        n=config.synthetic_n,
        raw_dim=config.synthetic_dim,
        seed=config.synthetic_seed,
        slope=config.a,
        intercept=config.intercept,
        score_noise_sd=config.sigma,
    )
    return pool, gt


_KIND_FROM_WIRE = {k.value: k for k in QueryKind}


class QueryPlanner:
    """Produces the next (kind, pool indices) pair under the configured policy.

    Owns the named random streams so that batch runs and live sessions plan
    identically, and so the random-item baseline differs from the active
    policy only in the item-selection draw.  The rate-adaptive policy resolves
    its (kind, size) once against the initial belief and keeps it.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        pool: ItemPool,
        params: ResponseParams,
        belief0: GaussianBelief,
        cost_model: CostModel,
    ):
        self.config = config
        self.pool = pool
        self.params = params
        ss = np.random.SeedSequence(config.seed)
        kind_ss, item_ss, committee_ss, greedy_ss = ss.spawn(4)
        self._rng_kind = np.random.default_rng(kind_ss)
        self._rng_items = np.random.default_rng(item_ss)
        self._rng_committee = np.random.default_rng(committee_ss)
        self._rng_greedy = np.random.default_rng(greedy_ss)

        self.kind_name, self.set_size = config.kind, config.set_size
        if config.policy == "rate":
            grid = [(QueryKind.LABEL, 1)]
            for kname in config.rate_kinds:
                for s in config.rate_sizes:
                    grid.append((_KIND_FROM_WIRE[kname], s))
            ratios = estimate_info_ratios(
                pool,
                belief0,
                grid,
                params,
                probe=ProbeSettings(
                    committee_size=config.rate_committee,
                    mc_draws=config.rate_mc_draws,
                    probe_pool_size=config.rate_probe_pool,
                ),
                n_probes=config.rate_probes,
                seed=config.seed,
            )
            chosen_kind, self.set_size = select_query_config(build_rate_table(ratios, cost_model))
            self.kind_name = "select" if chosen_kind.is_selection else chosen_kind.value

    def next(self, belief: GaussianBelief) -> tuple[QueryKind, list[int]]:
        config = self.config
        if self.kind_name == "select":
            kind_t = QueryKind.SELECT_HIGH if self._rng_kind.random() < 0.5 else QueryKind.SELECT_LOW
        else:
            kind_t = _KIND_FROM_WIRE[self.kind_name]
        size_t = 1 if kind_t is QueryKind.LABEL else self.set_size
        if config.policy == "random":
            idx = [int(i) for i in self._rng_items.choice(len(self.pool), size=size_t, replace=False)]
        else:
            comm = sample_committee(
                belief, config.committee_size, int(self._rng_committee.integers(2**63))
            )
            idx = greedy_build(
                self.pool,
                size_t,
                kind_t,
                comm,
                self.params,
                mc_draws=config.mc_draws,
                seed=int(self._rng_greedy.integers(2**63)),
            )
        return kind_t, idx


def initial_belief(config: ExperimentConfig, dim: int) -> GaussianBelief:
    sigma0 = config.sigma0_scale if config.sigma0_scale is not None else config.prior_m**2 / 3.0
    return isotropic_belief(dim, sigma0)


def run_experiment(
    config: ExperimentConfig,
    pool: ItemPool | None = None,
    gt: GroundTruth | None = None,
    cost_model: CostModel | None = None,
    settings: UpdateSettings = UpdateSettings(),
) -> list[TraceRecord]:
    config.validate()
    if pool is None or gt is None:
        pool, gt = resolve_pool(config)
    cost_model = cost_model or reference_cost_model()
    params = ResponseParams(w=config.w, a=config.a, sigma=config.sigma)
    annotator = make_gumbel_annotator(
        gt,
        slope=config.a,
        intercept=config.intercept,
        noise_scale=config.sigma,
        seed=config.annotator_seed,
        flavor=config.noise_flavor,
        label_threshold=config.tau,
    )
    if config.pool_csv is not None and any(
        it.score_samples is not None for it in pool.items
    ):
        # sample-backed corpora answer from their empirical distributions
        from .responses import SimulatedAnnotator

        annotator = SimulatedAnnotator(
            mode="empirical", label_threshold=config.tau, rng_seed=config.annotator_seed
        )

    belief = initial_belief(config, pool.dim)
    rule = StoppingRule(epsilon=config.epsilon, dim=pool.dim) if config.epsilon else None
    eval_set = build_eval_set(pool, config.tau, config.eval_band)
    planner = QueryPlanner(config, pool, params, belief, cost_model)

    records: list[TraceRecord] = []
    cum_seconds = 0.0
    t = 0
    while True:
        if rule is not None and should_stop(belief, rule):
            break
        if config.max_interactions is not None and t >= config.max_interactions:
            break
        t += 1
        kind_t, idx = planner.next(belief)
        size_t = 1 if kind_t is QueryKind.LABEL else planner.set_size
        query = Query(kind=kind_t, items=tuple(pool[i] for i in idx))
        resp = annotator.answer(query)
        try:
            belief = apply_response(belief, query, resp, params, settings)
        except NumericalDegeneracyError as exc:
            if config.output_path:
                export_trace(records, config.output_path)
            raise ExperimentAborted(
                f"belief degenerated at interaction {t}: {exc}", records
            ) from exc
        cum_seconds += predict_cost(cost_model, kind_t, size_t)
        records.append(
            TraceRecord(
                t=t,
                kind=kind_t.value,
                set_size=size_t,
                item_ids=tuple(pool[i].id for i in idx),
                response=resp,
                mse_to_gt=normalized_mse(belief.mu, gt.theta),
                trace_sigma=float(np.trace(belief.sigma)),
                log_det_sigma=belief.log_det_sigma,
                accuracy=evaluate_accuracy(belief.mu, eval_set),
                cum_predicted_seconds=cum_seconds,
            )
        )
    if config.output_path:
        export_trace(records, config.output_path)
    return records


# ---------------------------------------------------------------------------
# trace serialization: line-delimited, canonical, lossless
# ---------------------------------------------------------------------------

_HEADER = "t\tkind\tset_size\titem_ids\tresponse\tmse_to_gt\ttrace_sigma\tlog_det_sigma\taccuracy\tcum_predicted_seconds"


def _response_to_json(resp: Response) -> str:
    if isinstance(resp, LabelAnswer):
        body = {"type": "label", "y": resp.y}
    elif isinstance(resp, SelectionAnswer):
        body = {"type": "selection", "index": resp.index, "y": resp.y}
    elif isinstance(resp, RankingAnswer):
        body = {"type": "rank", "order": list(resp.order), "threshold": resp.threshold}
    else:
        raise ConfigError(f"unknown response {resp!r}")
    return json.dumps(body, sort_keys=True, separators=(",", ":"))


def _response_from_json(text: str) -> Response:
    body = json.loads(text)
    if body["type"] == "label":
        return LabelAnswer(y=body["y"])
    if body["type"] == "selection":
        return SelectionAnswer(index=body["index"], y=body["y"])
    if body["type"] == "rank":
        return RankingAnswer(order=tuple(body["order"]), threshold=body["threshold"])
    raise ConfigError(f"unknown response type {body['type']!r}")


def export_trace(records: list[TraceRecord], path) -> None:
    """One record per line after a self-describing header; floats via repr."""
    lines = [_HEADER]
    for r in records:
        lines.append(
            "\t".join(
                [
                    str(r.t),
                    r.kind,
                    str(r.set_size),
                    "|".join(r.item_ids),
                    _response_to_json(r.response),
                    repr(r.mse_to_gt),
                    repr(r.trace_sigma),
                    repr(r.log_det_sigma),
                    repr(r.accuracy),
                    repr(r.cum_predicted_seconds),
                ]
            )
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def import_trace(path) -> list[TraceRecord]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != _HEADER:
        raise ConfigError(f"{path}: unrecognized trace header")
    records = []
    for line in lines[1:]:
        if not line:
            continue
        t, kind, set_size, ids, resp, mse, tr, ld, acc, secs = line.split("\t")
        records.append(
            TraceRecord(
                t=int(t),
                kind=kind,
                set_size=int(set_size),
                item_ids=tuple(ids.split("|")) if ids else (),
                response=_response_from_json(resp),
                mse_to_gt=float(mse),
                trace_sigma=float(tr),
                log_det_sigma=float(ld),
                accuracy=float(acc),
                cum_predicted_seconds=float(secs),
            )
        )
    return records


def interactions_to_reach(records: list[TraceRecord], mse_threshold: float) -> int | None:
    """First interaction index whose alignment error is at or below the threshold."""
    for r in records:
        if r.mse_to_gt <= mse_threshold:
            return r.t
    return None
