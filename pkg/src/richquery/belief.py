"""Gaussian belief over the classifier and its variational update rules.

The belief is a full-covariance Gaussian N(mu, sigma).  Three updates refine
it:

* ``label_update`` folds in one binary observation of a logistic factor via
  the standard iterative quadratic (tangent) bound, which adds a rank-one
  nonnegative term to the precision.
* ``selection_update`` folds in one softmax choice factor by minimizing a
  convex upper bound on the negative evidence lower bound; the bound's
  expectation of the log-sum-exp term is taken at the Gaussian's mean with a
  half-quadratic variance correction.
* ``joint_update`` alternates both until the pair stabilizes;
  ``ranking_update`` applies the joint update stagewise down a ranked list.

All updates return new immutable beliefs; inputs are never mutated.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg
from scipy.special import logsumexp, softmax

from .errors import KindMismatchError, NumericalDegeneracyError
from .responses import Query, QueryKind, RankingAnswer, ResponseParams, SelectionAnswer

_SYM_TOL = 1e-9


class ConvergenceWarning(UserWarning):
    """An iterative update hit its iteration cap before meeting tolerance."""


@dataclass(frozen=True)
class GaussianBelief:
    mu: np.ndarray
    sigma: np.ndarray
    log_det_sigma: float
    chol: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def create(cls, mu, sigma) -> "GaussianBelief":
        mu = np.asarray(mu, dtype=np.float64).copy()
        sigma = np.asarray(sigma, dtype=np.float64)
        if sigma.shape != (len(mu), len(mu)):
            raise NumericalDegeneracyError(
                f"covariance shape {sigma.shape} does not match mean of length {len(mu)}"
            )
        asym = float(np.max(np.abs(sigma - sigma.T))) if sigma.size else 0.0
        if asym > _SYM_TOL:
            raise NumericalDegeneracyError(f"covariance asymmetry {asym} exceeds {_SYM_TOL}")
        sigma = 0.5 * (sigma + sigma.T)
        try:
            chol = np.linalg.cholesky(sigma)
        except np.linalg.LinAlgError:
            raise NumericalDegeneracyError("covariance is not positive definite") from None
        log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
        mu.setflags(write=False)
        sigma.setflags(write=False)
        chol.setflags(write=False)
        return cls(mu=mu, sigma=sigma, log_det_sigma=log_det, chol=chol)

    @property
    def dim(self) -> int:
        return len(self.mu)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """sigma^{-1} b via the cached factor."""
        return linalg.cho_solve((self.chol, True), b)

    def precision(self) -> np.ndarray:
        return self.solve(np.eye(self.dim))


def isotropic_belief(dim: int, variance: float) -> GaussianBelief:
    return GaussianBelief.create(np.zeros(dim), variance * np.eye(dim))


@dataclass(frozen=True)
class UpdateSettings:
    inner_tol: float = 1e-6
    outer_tol: float = 1e-5
    max_inner_iters: int = 500
    max_outer_iters: int = 50
    rank_shrink_pool: bool = True  # stagewise remainders shrink down the ranking

    def __post_init__(self):
        if self.inner_tol <= 0 or self.outer_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_inner_iters < 1 or self.max_outer_iters < 1:
            raise ValueError("iteration caps must be at least 1")


@dataclass(frozen=True)
class StoppingRule:
    """Stop when the covariance determinant satisfies |sigma| <= epsilon^dim."""

    epsilon: float
    dim: int

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


def _make_belief(mu: np.ndarray, sigma: np.ndarray) -> GaussianBelief:
    """Construct a belief, repairing a marginally indefinite covariance once."""
    sigma = 0.5 * (sigma + sigma.T)
    try:
        return GaussianBelief.create(mu, sigma)
    except NumericalDegeneracyError:
        jitter = 1e-10 * float(np.mean(np.diag(sigma)))
        return GaussianBelief.create(mu, sigma + jitter * np.eye(len(mu)))


def _tangent_slope(xi: float) -> float:
    """Curvature coefficient tanh(xi/2) / (4 xi), with its xi -> 0 limit."""
    if xi < 1e-8:
        return 0.125
    return math.tanh(0.5 * xi) / (4.0 * xi)


def label_update(
    belief: GaussianBelief,
    x: np.ndarray,
    y01: int,
    w: float,
    settings: UpdateSettings = UpdateSettings(),
    init: GaussianBelief | None = None,
) -> GaussianBelief:
    """Condition the belief on one binary observation of the logistic factor.

    ``y01`` uses the iterative update's native 0/1 encoding, under which
    P[y01 = 1 | theta] = sigmoid(w * theta.x).  Note this is the complement
    of the signed-label convention of ``label_likelihood`` (there, a +1 label
    has probability sigmoid(-w * theta.x)), so signed labels map as
    +1 -> 0 and -1 -> 1.  ``joint_update`` and ``ranking_update`` apply that
    mapping; call this directly only if you want the raw encoding.

    The precision gains a rank-one term with nonnegative coefficient, so the
    variance along x never increases.  ``init`` seeds the linearization point
    when the caller alternates this with other updates.
    """
    if y01 not in (0, 1):
        raise KindMismatchError(f"y01 must be 0 or 1, got {y01}")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (belief.dim,):
        raise KindMismatchError(f"x shape {x.shape} does not match dim {belief.dim}")
    if not np.any(x):
        return belief
    sigma0_x = belief.sigma @ x
    q0 = float(x @ sigma0_x)
    rhs = belief.solve(belief.mu) + (y01 - 0.5) * w * x

    cur = init if init is not None else belief
    mu, sigma = cur.mu, cur.sigma
    for _ in range(settings.max_inner_iters):
        xi = abs(w) * math.sqrt(max(float(x @ sigma @ x) + float(x @ mu) ** 2, 0.0))
        beta = 2.0 * _tangent_slope(xi) * w * w
        # rank-one downdate of the prior covariance
        sigma_new = belief.sigma - (beta / (1.0 + beta * q0)) * np.outer(sigma0_x, sigma0_x)
        mu_new = sigma_new @ rhs
        delta = max(
            float(np.max(np.abs(mu_new - mu))), float(np.max(np.abs(sigma_new - sigma)))
        )
        mu, sigma = mu_new, sigma_new
        if delta < settings.inner_tol:
            break
    return _make_belief(mu, sigma)


def _selection_objective(
    mu, sigma, log_det_sigma, prior, prior_prec, prior_log_det, X, i, K
):
    diff = mu - prior.mu
    kl = 0.5 * (
        float(np.sum(prior_prec * sigma))
        + float(diff @ prior_prec @ diff)
        - len(mu)
        + prior_log_det
        - log_det_sigma
    )
    exps = K * (X @ mu) + 0.5 * K * K * np.einsum("ij,jk,ik->i", X, sigma, X)
    return kl - K * float(X[i] @ mu) + float(logsumexp(exps)), exps


def selection_update(
    belief: GaussianBelief,
    query: Query,
    selected_index: int,
    params: ResponseParams,
    settings: UpdateSettings = UpdateSettings(),
    init: GaussianBelief | None = None,
    callback: Callable[[int, float], None] | None = None,
) -> GaussianBelief:
    """Condition the belief on which item was chosen from a set.

    Minimizes the bound objective
    KL(q || p) - K x_i.mu_q + log sum_j exp(K x_j.mu_q + K^2/2 x_j.Sigma_q x_j)
    by damped fixed-point steps on the mean and on the precision, each guarded
    by a halving line search, so the objective never increases across accepted
    iterations.  A single-item set or K = 0 carries no choice information and
    returns the prior unchanged.  ``callback(iteration, objective)`` fires
    after every accepted iteration.
    """
    if not query.kind.is_selection:
        raise KindMismatchError(f"selection_update needs a selection query, got {query.kind.value}")
    X = query.matrix()
    if X.shape[1] != belief.dim:
        raise KindMismatchError(f"query dim {X.shape[1]} does not match belief dim {belief.dim}")
    if not 0 <= selected_index < len(query):
        raise KindMismatchError(f"selected_index {selected_index} outside query of size {len(query)}")
    K = params.K if query.kind is QueryKind.SELECT_HIGH else -params.K
    return _selection_update_core(belief, X, selected_index, K, settings, init, callback)


def _selection_update_core(
    belief: GaussianBelief,
    X: np.ndarray,
    selected_index: int,
    K: float,
    settings: UpdateSettings,
    init: GaussianBelief | None = None,
    callback: Callable[[int, float], None] | None = None,
) -> GaussianBelief:
    m = X.shape[0]
    if m == 1 or K == 0.0:
        return belief

    prior_prec = belief.precision()
    prior_log_det = belief.log_det_sigma
    x_sel = X[selected_index]

    def objective(mu, sigma, log_det):
        return _selection_objective(
            mu, sigma, log_det, belief, prior_prec, prior_log_det, X, selected_index, K
        )

    # start from the warmer of the prior point and the caller's init
    mu, sigma, log_det, prec = belief.mu.copy(), belief.sigma, belief.log_det_sigma, prior_prec
    f_cur, exps = objective(mu, sigma, log_det)
    f_prior = f_cur
    if init is not None and init.dim == belief.dim:
        f_init, exps_init = objective(init.mu, init.sigma, init.log_det_sigma)
        if f_init < f_cur:
            mu, sigma, log_det = init.mu.copy(), init.sigma, init.log_det_sigma
            prec = init.precision()
            f_cur, exps = f_init, exps_init

    converged = False
    for it in range(settings.max_inner_iters):
        mu_prev, sigma_prev = mu, sigma

        # mean step toward the stationary point at the current weights
        s = softmax(exps)
        mu_target = belief.mu + K * (belief.sigma @ (x_sel - s @ X))
        d_mu = mu_target - mu
        alpha = 1.0
        while alpha > 1e-10:
            mu_try = mu + alpha * d_mu
            f_try, exps_try = objective(mu_try, sigma, log_det)
            if f_try <= f_cur:
                mu, f_cur, exps = mu_try, f_try, exps_try
                break
            alpha *= 0.5

        # precision step; convex combinations stay positive definite
        s = softmax(exps)
        prec_target = prior_prec + K * K * (X.T * s) @ X
        d_prec = prec_target - prec
        alpha = 1.0
        while alpha > 1e-10:
            prec_try = prec + alpha * d_prec
            prec_try = 0.5 * (prec_try + prec_try.T)
            try:
                chol_p = np.linalg.cholesky(prec_try)
            except np.linalg.LinAlgError:
                alpha *= 0.5
                continue
            log_det_try = -2.0 * float(np.sum(np.log(np.diag(chol_p))))
            sigma_try = linalg.cho_solve((chol_p, True), np.eye(belief.dim))
            sigma_try = 0.5 * (sigma_try + sigma_try.T)
            f_try, exps_try = objective(mu, sigma_try, log_det_try)
            if f_try <= f_cur:
                prec, sigma, log_det, f_cur, exps = prec_try, sigma_try, log_det_try, f_try, exps_try
                break
            alpha *= 0.5

        if callback is not None:
            callback(it, f_cur)
        delta = max(
            float(np.max(np.abs(mu - mu_prev))), float(np.max(np.abs(sigma - sigma_prev)))
        )
        if delta < settings.inner_tol:
            converged = True
            break

    if not converged:
        warnings.warn(
            "selection update stopped at max_inner_iters without meeting inner_tol",
            ConvergenceWarning,
            stacklevel=2,
        )
    if f_cur > f_prior + 1e-9:  # descent guarantee relative to the input point
        return belief
    return _make_belief(mu, sigma)


def _signed_to_y01(y: int) -> int:
    # the iterative update's native encoding is the complement of the signed one
    return 0 if y > 0 else 1


def joint_update_core(
    belief: GaussianBelief,
    X: np.ndarray,
    index: int,
    y: int,
    w: float,
    K: float,
    settings: UpdateSettings = UpdateSettings(),
) -> GaussianBelief:
    """Selection-plus-label conditioning on a raw item matrix.

    Alternates the label and selection updates, each re-anchored at the input
    belief with linearization points from the latest iterate, until the pair
    stabilizes.  A single-item set carries no choice information and reduces
    to a pure label update.
    """
    X = np.asarray(X, dtype=np.float64)
    y01 = _signed_to_y01(y)
    if X.shape[0] == 1:
        return label_update(belief, X[0], y01, w, settings)
    cur = belief
    for _ in range(settings.max_outer_iters):
        lab = label_update(belief, X[index], y01, w, settings, init=cur)
        new = _selection_update_core(lab, X, index, K, settings, init=cur)
        delta = max(
            float(np.max(np.abs(new.mu - cur.mu))),
            float(np.max(np.abs(new.sigma - cur.sigma))),
        )
        cur = new
        if delta < settings.outer_tol:
            break
    return cur


def joint_update(
    belief: GaussianBelief,
    query: Query,
    resp: SelectionAnswer,
    params: ResponseParams,
    settings: UpdateSettings = UpdateSettings(),
) -> GaussianBelief:
    """Condition on a full selection answer: chosen item plus its signed label."""
    if not isinstance(resp, SelectionAnswer):
        raise KindMismatchError("joint_update needs a SelectionAnswer")
    X = query.matrix()
    if not 0 <= resp.index < len(query):
        raise KindMismatchError(f"index {resp.index} outside query of size {len(query)}")
    K = params.K if query.kind is QueryKind.SELECT_HIGH else -params.K
    return joint_update_core(belief, X, resp.index, resp.y, params.w, K, settings)


def ranking_update(
    belief: GaussianBelief,
    query: Query,
    resp: RankingAnswer,
    params: ResponseParams,
    settings: UpdateSettings = UpdateSettings(),
) -> GaussianBelief:
    """Condition on a full ranking with threshold, one stage at a time.

    Stage j treats the not-yet-ranked remainder as the choice set with the
    j-th ranked item selected, labeled +1 when j falls at or above the
    threshold position.  With ``rank_shrink_pool`` off, every stage instead
    keeps the full set as the choice pool.
    """
    if query.kind is not QueryKind.RANK:
        raise KindMismatchError("ranking_update needs a rank query")
    resp.validate(len(query))
    X = query.matrix()
    cur = belief
    order = list(resp.order)
    for j, picked in enumerate(order):
        y = 1 if (j + 1) <= resp.threshold else -1
        pool_idx = order[j:] if settings.rank_shrink_pool else list(range(len(query)))
        sel = pool_idx.index(picked)
        cur = joint_update_core(cur, X[pool_idx], sel, y, params.w, params.K, settings)
    return cur


def should_stop(belief: GaussianBelief, rule: StoppingRule) -> bool:
    """True once log|sigma| <= dim * log(epsilon); the boundary counts as stopped."""
    bound = rule.dim * math.log(rule.epsilon)
    return belief.log_det_sigma <= bound + 1e-12 * max(1.0, abs(bound))


def mse_floor(belief: GaussianBelief) -> float:
    """Lower bound on the posterior MSE: dim * |sigma|^(1/dim) <= trace(sigma)."""
    return belief.dim * math.exp(belief.log_det_sigma / belief.dim)
