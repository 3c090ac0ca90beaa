"""Live annotation sessions: the machine side of a human-in-the-loop run.

A session serves one query at a time, accepts the timed answer, folds it into
the belief, and stops once the covariance-determinant rule fires.  The call
sequence per session is strictly (create, (next, answer)*): a second ``next``
without an intervening answer, or an answer without a pending query, is a
protocol violation and mutates nothing.  Answer validation is atomic: a
malformed payload leaves the session exactly as it was.

History is append-only and sufficient to replay the final belief offline
(event sourcing): replaying the recorded (query, response) pairs through the
same update code reproduces the belief bit for bit.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field

from .belief import GaussianBelief, StoppingRule, UpdateSettings, should_stop
from .dataset import ItemPool
from .errors import KindMismatchError, ProtocolError, SessionNotFoundError
from .harness import (
    ExperimentConfig,
    QueryPlanner,
    apply_response,
    initial_belief,
    resolve_pool,
)
from .policy import reference_cost_model
from .responses import (
    LabelAnswer,
    Query,
    QueryKind,
    RankingAnswer,
    Response,
    ResponseParams,
    SelectionAnswer,
)


@dataclass(frozen=True)
class HistoryEntry:
    query_id: str
    kind: str
    item_indices: tuple[int, ...]
    response: Response
    elapsed_ms: int


@dataclass
class SessionState:
    session_id: str
    config: ExperimentConfig
    pool: ItemPool
    params: ResponseParams
    belief: GaussianBelief
    planner: QueryPlanner
    rule: StoppingRule | None
    settings: UpdateSettings
    pending: tuple[str, QueryKind, tuple[int, ...]] | None = None
    history: list[HistoryEntry] = field(default_factory=list)
    status: str = "active"
    last_answer: tuple[str, dict] | None = None  # retry dedup
    lock: threading.Lock = field(default_factory=threading.Lock)

    def summary(self) -> dict:
        return {
            "status": self.status,
            "interactions": len(self.history),
            "log_det_sigma": self.belief.log_det_sigma,
        }


def payload_to_response(kind: QueryKind, payload: dict, n_items: int) -> Response:
    """Validate a wire payload against the pending query's kind and size."""
    try:
        if kind is QueryKind.LABEL:
            resp: Response = LabelAnswer(y=int(payload["y"]))
        elif kind.is_selection:
            index = int(payload["index"])
            if not 0 <= index < n_items:
                raise KindMismatchError(f"index {index} outside 0..{n_items - 1}")
            resp = SelectionAnswer(index=index, y=int(payload["y"]))
        elif kind is QueryKind.RANK:
            resp = RankingAnswer(
                order=tuple(int(i) for i in payload["order"]),
                threshold=int(payload["threshold"]),
            )
            resp.validate(n_items)
        else:
            raise KindMismatchError(f"unknown kind {kind}")
    except (KeyError, TypeError, ValueError) as exc:
        raise KindMismatchError(f"malformed payload for {kind.value}: {exc}") from exc
    return resp


class SessionManager:
    """In-memory registry; sessions are independent, calls within one are serialized."""

    def __init__(self, settings: UpdateSettings = UpdateSettings()):
        self._sessions: dict[str, SessionState] = {}
        self._registry_lock = threading.Lock()
        self._settings = settings

    def create_session(
        self, config: ExperimentConfig, pool: ItemPool | None = None
    ) -> str:
        config.validate()
        if pool is None:
            pool, _ = resolve_pool(config)
        params = ResponseParams(w=config.w, a=config.a, sigma=config.sigma)
        belief = initial_belief(config, pool.dim)
        planner = QueryPlanner(config, pool, params, belief, reference_cost_model())
        rule = StoppingRule(epsilon=config.epsilon, dim=pool.dim) if config.epsilon else None
        session_id = uuid.uuid4().hex
        state = SessionState(
            session_id=session_id,
            config=config,
            pool=pool,
            params=params,
            belief=belief,
            planner=planner,
            rule=rule,
            settings=self._settings,
        )
        if rule is not None and should_stop(belief, rule):
            state.status = "stopped"
        with self._registry_lock:
            self._sessions[session_id] = state
        return session_id

    def _get(self, session_id: str) -> SessionState:
        with self._registry_lock:
            try:
                return self._sessions[session_id]
            except KeyError:
                raise SessionNotFoundError(session_id) from None

    def next_query(self, session_id: str) -> dict:
        state = self._get(session_id)
        with state.lock:
            if state.status != "active":
                raise ProtocolError("session is stopped")
            if state.pending is not None:
                raise ProtocolError("a query is already outstanding")
            kind, idx = state.planner.next(state.belief)
            query_id = uuid.uuid4().hex
            state.pending = (query_id, kind, tuple(idx))
            return {
                "query_id": query_id,
                "kind": kind.value,
                "items": [
                    {"id": state.pool[i].id, "display": state.pool[i].display} for i in idx
                ],
                "set_size": len(idx),
            }

    def submit_response(
        self, session_id: str, query_id: str, payload: dict, elapsed_ms: int
    ) -> dict:
        state = self._get(session_id)
        with state.lock:
            if state.last_answer is not None and state.last_answer[0] == query_id:
                return dict(state.last_answer[1])  # duplicate delivery, no re-apply
            if state.pending is None:
                raise ProtocolError("no pending query")
            pending_id, kind, idx = state.pending
            if query_id != pending_id:
                raise ProtocolError(f"unknown query_id {query_id!r}")
            if elapsed_ms is None or int(elapsed_ms) < 0:
                raise KindMismatchError("elapsed_ms must be a nonnegative integer")
            # validate fully before touching any state
            resp = payload_to_response(kind, payload, len(idx))
            query = Query(kind=kind, items=tuple(state.pool[i] for i in idx))
            new_belief = apply_response(state.belief, query, resp, state.params, state.settings)

            state.belief = new_belief
            state.history.append(
                HistoryEntry(
                    query_id=pending_id,
                    kind=kind.value,
                    item_indices=idx,
                    response=resp,
                    elapsed_ms=int(elapsed_ms),
                )
            )
            state.pending = None
            if state.rule is not None and should_stop(state.belief, state.rule):
                state.status = "stopped"
            summary = state.summary()
            state.last_answer = (pending_id, summary)
            return dict(summary)

    def get_state(self, session_id: str) -> SessionState:
        return self._get(session_id)

    def cost_observations(self, session_id: str) -> list[tuple[QueryKind, int, float]]:
        """History rows shaped for the cost-model fitter: (kind, size, seconds)."""
        state = self._get(session_id)
        return [
            (QueryKind(h.kind), len(h.item_indices), h.elapsed_ms / 1000.0)
            for h in state.history
        ]


def replay_history(
    config: ExperimentConfig,
    pool: ItemPool,
    history: list[HistoryEntry],
    settings: UpdateSettings = UpdateSettings(),
) -> GaussianBelief:
    """Fold a recorded history into a fresh belief; equals the live result exactly."""
    params = ResponseParams(w=config.w, a=config.a, sigma=config.sigma)
    belief = initial_belief(config, pool.dim)
    for entry in history:
        query = Query(
            kind=QueryKind(entry.kind),
            items=tuple(pool[i] for i in entry.item_indices),
        )
        belief = apply_response(belief, query, entry.response, params, settings)
    return belief
