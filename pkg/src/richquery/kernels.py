"""Hot numeric kernels for committee disagreement over candidate items.

Each kernel scores every candidate item appended to a fixed base set: it
computes, per committee particle, the outcome distribution of the resulting
query, and returns entropy-of-mean minus mean-entropy in bits.  This is the
inner loop of greedy item selection, evaluated across the whole pool at every
greedy step, so each kernel exists twice:

* ``_*_loops``  - explicit loops compiled with numba when enabled
* ``*_numpy``   - vectorized numpy fallback, candidate-chunked where the
                  intermediate arrays would otherwise blow up

``accel.NUMBA_ENABLED`` (driven by the RICHQUERY_NUMBA env flag) selects the
path once at import time; both produce the same values to float precision.

Array conventions:

* ``choice_scores[n, p]``  signed logit score of pool item p under particle n
  (the high/low sign and the inverse temperature K are already folded in)
* ``label_margins[n, p]``  logit of the positive-label probability, i.e.
  p_plus = sigmoid(label_margins)
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import expit, xlogy

from .accel import NUMBA_ENABLED, njit, prange

LOG2E = 1.4426950408889634


# ---------------------------------------------------------------------------
# loop kernels (numba path)
# ---------------------------------------------------------------------------


@njit(cache=True, inline="always")
def _sigmoid(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


@njit(cache=True, parallel=True)
def _label_disagreement_loops(label_margins, cand_idx):
    N = label_margins.shape[0]
    C = cand_idx.shape[0]
    out = np.empty(C)
    for c in prange(C):
        j = cand_idx[c]
        pbar = 0.0
        ent = 0.0
        for n in range(N):
            p = _sigmoid(label_margins[n, j])
            pbar += p
            if 0.0 < p < 1.0:
                ent -= p * math.log(p) + (1.0 - p) * math.log(1.0 - p)
        pbar /= N
        hbar = 0.0
        if 0.0 < pbar < 1.0:
            hbar = -(pbar * math.log(pbar) + (1.0 - pbar) * math.log(1.0 - pbar))
        out[c] = (hbar - ent / N) * LOG2E
    return out


@njit(cache=True, parallel=True)
def _selection_disagreement_loops(choice_scores, label_margins, base_idx, cand_idx):
    N = choice_scores.shape[0]
    C = cand_idx.shape[0]
    m0 = base_idx.shape[0]
    m = m0 + 1
    out = np.empty(C)
    for c in prange(C):
        idx = np.empty(m, np.int64)
        for k in range(m0):
            idx[k] = base_idx[k]
        idx[m0] = cand_idx[c]
        mean_p = np.zeros(2 * m)
        mean_ent = 0.0
        e = np.empty(m)
        for n in range(N):
            gmax = -1.0e300
            for k in range(m):
                v = choice_scores[n, idx[k]]
                e[k] = v
                if v > gmax:
                    gmax = v
            z = 0.0
            for k in range(m):
                e[k] = math.exp(e[k] - gmax)
                z += e[k]
            ent = 0.0
            for k in range(m):
                soft = e[k] / z
                pp = _sigmoid(label_margins[n, idx[k]])
                o1 = soft * pp
                o2 = soft * (1.0 - pp)
                mean_p[2 * k] += o1
                mean_p[2 * k + 1] += o2
                if o1 > 0.0:
                    ent -= o1 * math.log(o1)
                if o2 > 0.0:
                    ent -= o2 * math.log(o2)
            mean_ent += ent
        hbar = 0.0
        for k in range(2 * m):
            p = mean_p[k] / N
            if p > 0.0:
                hbar -= p * math.log(p)
        out[c] = (hbar - mean_ent / N) * LOG2E
    return out


@njit(cache=True)
def _count_pmf_inplace(pp, pb):
    """Distribution of the positive-label count for independent items."""
    m = pp.shape[0]
    for l in range(m + 1):
        pb[l] = 0.0
    pb[0] = 1.0
    for k in range(m):
        p = pp[k]
        for l in range(k + 1, -1, -1):
            v = pb[l] * (1.0 - p)
            if l > 0:
                v += pb[l - 1] * p
            pb[l] = v


@njit(cache=True, parallel=True)
def _rank_disagreement_enum_loops(choice_scores, label_margins, base_idx, cand_idx, perms):
    N = choice_scores.shape[0]
    C = cand_idx.shape[0]
    m0 = base_idx.shape[0]
    m = m0 + 1
    n_perm = perms.shape[0]
    out = np.empty(C)
    for c in prange(C):
        idx = np.empty(m, np.int64)
        for k in range(m0):
            idx[k] = base_idx[k]
        idx[m0] = cand_idx[c]
        mean_p = np.zeros(n_perm * (m + 1))
        mean_ent = 0.0
        e = np.empty(m)
        pp = np.empty(m)
        pb = np.empty(m + 1)
        pl = np.empty(n_perm)
        for n in range(N):
            gmax = -1.0e300
            for k in range(m):
                v = choice_scores[n, idx[k]]
                e[k] = v
                if v > gmax:
                    gmax = v
            for k in range(m):
                e[k] = math.exp(e[k] - gmax)
                pp[k] = _sigmoid(label_margins[n, idx[k]])
            _count_pmf_inplace(pp, pb)
            # stagewise choice probability of every ordering
            for q in range(n_perm):
                s = e[perms[q, m - 1]]
                prob = 1.0
                for j in range(m - 2, -1, -1):
                    s += e[perms[q, j]]
                    if s > 0.0:
                        prob *= e[perms[q, j]] / s
                    else:
                        prob = 0.0
                pl[q] = prob
            ent = 0.0
            for q in range(n_perm):
                for l in range(m + 1):
                    o = pl[q] * pb[l]
                    mean_p[q * (m + 1) + l] += o
                    if o > 0.0:
                        ent -= o * math.log(o)
            mean_ent += ent
        hbar = 0.0
        for k in range(n_perm * (m + 1)):
            p = mean_p[k] / N
            if p > 0.0:
                hbar -= p * math.log(p)
        out[c] = (hbar - mean_ent / N) * LOG2E
    return out


@njit(cache=True, parallel=True)
def _rank_disagreement_mc_loops(
    choice_scores, label_margins, base_idx, cand_idx, gumbel_noise, label_u
):
    """Sampled estimate for ranking outcome spaces too large to enumerate.

    Draws M outcomes per particle (noise and label uniforms are indexed by
    set slot, so candidates share random numbers) and averages
    log2(p_own / p_mixture) over the draws, which estimates the same
    entropy-of-mean minus mean-entropy difference.  Also returns the standard
    error of each estimate.
    """
    N = choice_scores.shape[0]
    C = cand_idx.shape[0]
    m0 = base_idx.shape[0]
    m = m0 + 1
    M = gumbel_noise.shape[1]
    est = np.empty(C)
    se = np.empty(C)
    for c in prange(C):
        idx = np.empty(m, np.int64)
        for k in range(m0):
            idx[k] = base_idx[k]
        idx[m0] = cand_idx[c]
        g = np.empty((N, m))
        gshift = np.empty((N, m))
        e = np.empty((N, m))
        pp = np.empty((N, m))
        logpb = np.empty((N, m + 1))
        pb = np.empty(m + 1)
        for n in range(N):
            gm = -1.0e300
            for k in range(m):
                v = choice_scores[n, idx[k]]
                g[n, k] = v
                if v > gm:
                    gm = v
                pp[n, k] = _sigmoid(label_margins[n, idx[k]])
            for k in range(m):
                gshift[n, k] = g[n, k] - gm
                e[n, k] = math.exp(gshift[n, k])
            _count_pmf_inplace(pp[n], pb)
            for l in range(m + 1):
                logpb[n, l] = math.log(pb[l]) if pb[l] > 0.0 else -1.0e300
        z = np.empty(m)
        logp = np.empty(N)
        total = 0.0
        total2 = 0.0
        for n in range(N):
            for dm in range(M):
                for k in range(m):
                    z[k] = -(g[n, k] + gumbel_noise[n, dm, k])
                order = np.argsort(z)  # ascending of negated = descending scores
                cnt = 0
                for k in range(m):
                    if label_u[n, dm, k] < pp[n, k]:
                        cnt += 1
                # outcome log-probability under every particle
                for kk in range(N):
                    s = e[kk, order[m - 1]]
                    lp = 0.0
                    for j in range(m - 2, -1, -1):
                        s += e[kk, order[j]]
                        if s > 0.0:
                            lp += gshift[kk, order[j]] - math.log(s)
                        else:
                            lp = -1.0e300
                    logp[kk] = lp + logpb[kk, cnt]
                lmax = -1.0e300
                for kk in range(N):
                    if logp[kk] > lmax:
                        lmax = logp[kk]
                acc = 0.0
                for kk in range(N):
                    acc += math.exp(logp[kk] - lmax)
                logpbar = lmax + math.log(acc / N)
                t = (logp[n] - logpbar) * LOG2E
                total += t
                total2 += t * t
        nm = N * M
        mean = total / nm
        var = max(total2 / nm - mean * mean, 0.0)
        est[c] = mean
        se[c] = math.sqrt(var / nm)
    return est, se


# ---------------------------------------------------------------------------
# numpy fallback
# ---------------------------------------------------------------------------


def _entropy_bits(probs: np.ndarray, axis: int = -1) -> np.ndarray:
    return -xlogy(probs, probs).sum(axis=axis) * LOG2E


def label_disagreement_numpy(label_margins, cand_idx):
    p = expit(label_margins[:, cand_idx])  # (N, C)
    probs = np.stack([p, 1.0 - p], axis=-1)
    ent = _entropy_bits(probs)
    pbar = probs.mean(axis=0)
    return _entropy_bits(pbar) - ent.mean(axis=0)


def _gather_sets(base_idx, cand_idx):
    C = len(cand_idx)
    m = len(base_idx) + 1
    idx = np.empty((C, m), dtype=np.int64)
    idx[:, : m - 1] = base_idx
    idx[:, m - 1] = cand_idx
    return idx


def selection_disagreement_numpy(choice_scores, label_margins, base_idx, cand_idx):
    idx = _gather_sets(base_idx, cand_idx)  # (C, m)
    g = choice_scores[:, idx]  # (N, C, m)
    g = g - g.max(axis=-1, keepdims=True)
    e = np.exp(g)
    soft = e / e.sum(axis=-1, keepdims=True)
    pp = expit(label_margins[:, idx])
    probs = np.concatenate([soft * pp, soft * (1.0 - pp)], axis=-1)  # (N, C, 2m)
    ent = _entropy_bits(probs)
    pbar = probs.mean(axis=0)
    return _entropy_bits(pbar) - ent.mean(axis=0)


def _count_pmf_batch(pp: np.ndarray) -> np.ndarray:
    """Positive-count distribution along the last axis of pp."""
    *lead, m = pp.shape
    pb = np.zeros((*lead, m + 1))
    pb[..., 0] = 1.0
    for k in range(m):
        p = pp[..., k : k + 1]
        shifted = np.concatenate([np.zeros((*lead, 1)), pb[..., :-1]], axis=-1)
        pb = pb * (1.0 - p) + shifted * p
    return pb


def rank_disagreement_enum_numpy(
    choice_scores, label_margins, base_idx, cand_idx, perms, chunk: int = 64
):
    N = choice_scores.shape[0]
    m = len(base_idx) + 1
    out = np.empty(len(cand_idx))
    for lo in range(0, len(cand_idx), chunk):
        cc = cand_idx[lo : lo + chunk]
        idx = _gather_sets(base_idx, cc)  # (B, m)
        g = choice_scores[:, idx]  # (N, B, m)
        e = np.exp(g - g.max(axis=-1, keepdims=True))
        pp = expit(label_margins[:, idx])
        pb = _count_pmf_batch(pp)  # (N, B, m+1)
        ep = e[..., perms]  # (N, B, n_perm, m)
        suffix = np.cumsum(ep[..., ::-1], axis=-1)[..., ::-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratios = np.where(suffix[..., :-1] > 0.0, ep[..., :-1] / suffix[..., :-1], 0.0)
        pl = ratios.prod(axis=-1)  # (N, B, n_perm)
        joint = pl[..., :, None] * pb[..., None, :]  # (N, B, n_perm, m+1)
        joint = joint.reshape(N, len(cc), -1)
        ent = _entropy_bits(joint)
        pbar = joint.mean(axis=0)
        out[lo : lo + chunk] = _entropy_bits(pbar) - ent.mean(axis=0)
    return out


def rank_disagreement_mc_numpy(
    choice_scores, label_margins, base_idx, cand_idx, gumbel_noise, label_u, chunk: int = 512
):
    N, M, _ = gumbel_noise.shape
    m = len(base_idx) + 1
    est = np.empty(len(cand_idx))
    se = np.empty(len(cand_idx))
    for ci, cand in enumerate(cand_idx):
        idx = np.concatenate([base_idx, [cand]])
        g = choice_scores[:, idx]  # (N, m)
        gshift = g - g.max(axis=-1, keepdims=True)
        pp = expit(label_margins[:, idx])
        logpb = np.log(np.maximum(_count_pmf_batch(pp), 1e-300))  # (N, m+1)
        z = g[:, None, :] + gumbel_noise  # (N, M, m)
        orders = np.argsort(-z, axis=-1).reshape(-1, m)  # (N*M, m)
        counts = (label_u < pp[:, None, :]).sum(axis=-1).reshape(-1)  # (N*M,)
        own = np.repeat(np.arange(N), M)
        terms = np.empty(N * M)
        for lo in range(0, N * M, chunk):
            sl = slice(lo, min(lo + chunk, N * M))
            ob = orders[sl]  # (B, m)
            gperm = gshift[:, ob]  # (N, B, m)
            rev = np.log(np.cumsum(np.exp(gperm[..., ::-1]), axis=-1))[..., ::-1]
            logpl = (gperm[..., :-1] - rev[..., :-1]).sum(axis=-1)  # (N, B)
            logp = logpl + logpb[:, counts[sl]]  # (N, B)
            lmax = logp.max(axis=0)
            logpbar = lmax + np.log(np.exp(logp - lmax).mean(axis=0))
            terms[sl] = (logp[own[sl], np.arange(ob.shape[0])] - logpbar) * LOG2E
        est[ci] = terms.mean()
        se[ci] = terms.std() / math.sqrt(N * M)
    return est, se


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:

    def label_disagreement(label_margins, cand_idx):
        return _label_disagreement_loops(label_margins, np.asarray(cand_idx, np.int64))

    def selection_disagreement(choice_scores, label_margins, base_idx, cand_idx):
        return _selection_disagreement_loops(
            choice_scores,
            label_margins,
            np.asarray(base_idx, np.int64),
            np.asarray(cand_idx, np.int64),
        )

    def rank_disagreement_enum(choice_scores, label_margins, base_idx, cand_idx, perms):
        return _rank_disagreement_enum_loops(
            choice_scores,
            label_margins,
            np.asarray(base_idx, np.int64),
            np.asarray(cand_idx, np.int64),
            np.asarray(perms, np.int64),
        )

    def rank_disagreement_mc(choice_scores, label_margins, base_idx, cand_idx, gumbel_noise, label_u):
        return _rank_disagreement_mc_loops(
            choice_scores,
            label_margins,
            np.asarray(base_idx, np.int64),
            np.asarray(cand_idx, np.int64),
            gumbel_noise,
            label_u,
        )

else:

    def label_disagreement(label_margins, cand_idx):
        return label_disagreement_numpy(label_margins, np.asarray(cand_idx, np.int64))

    def selection_disagreement(choice_scores, label_margins, base_idx, cand_idx):
        return selection_disagreement_numpy(
            choice_scores,
            label_margins,
            np.asarray(base_idx, np.int64),
            np.asarray(cand_idx, np.int64),
        )

    def rank_disagreement_enum(choice_scores, label_margins, base_idx, cand_idx, perms):
        return rank_disagreement_enum_numpy(
            choice_scores,
            label_margins,
            np.asarray(base_idx, np.int64),
            np.asarray(cand_idx, np.int64),
            np.asarray(perms, np.int64),
        )

    def rank_disagreement_mc(choice_scores, label_margins, base_idx, cand_idx, gumbel_noise, label_u):
        return rank_disagreement_mc_numpy(
            choice_scores,
            label_margins,
            np.asarray(base_idx, np.int64),
            np.asarray(cand_idx, np.int64),
            gumbel_noise,
            label_u,
        )
