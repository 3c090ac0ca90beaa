import numpy as np
import pytest
from scipy.special import logsumexp
from scipy.stats import multivariate_normal

from richquery.dataset import EmbeddedItem


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance" in nodeid and "::" in nodeid:
                name = nodeid.split("::")[-1]
                status = "PASS" if outcome == "passed" else "FAIL"
                lines.append((name, status))
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for name, status in sorted(set(lines)):
            terminalreporter.write_line(f"{status}  {name}")


class VecItem:
    """Bare item carrying an arbitrary vector; duck-types EmbeddedItem for queries."""

    def __init__(self, name, v):
        self.id = str(name)
        self.display = str(name)
        self.x = np.asarray(v, dtype=np.float64)
        self.score_mean = 0.0
        self.score_var = 1.0
        self.score_samples = None


def vec_items(vectors):
    return tuple(VecItem(i, v) for i, v in enumerate(vectors))


def unit_rows(rng, m, d):
    v = rng.standard_normal((m, d))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def augmented_item(name, raw, score_mean=0.0, score_var=1.0, samples=None):
    raw = np.asarray(raw, dtype=np.float64)
    x = np.concatenate(([1.0], raw / np.linalg.norm(raw)))
    return EmbeddedItem(
        id=str(name), display=str(name), x=x,
        score_mean=score_mean, score_var=score_var, score_samples=samples,
    )


class GridOracle2D:
    """Brute-force normalized posterior on a square grid, d=2 only."""

    def __init__(self, grid=400, half_width=4.0, prior_cov=1.0):
        axis = np.linspace(-half_width, half_width, grid)
        xx, yy = np.meshgrid(axis, axis, indexing="ij")
        self.pts = np.stack([xx.ravel(), yy.ravel()], axis=-1)
        self.prior_log = multivariate_normal(
            mean=np.zeros(2), cov=prior_cov * np.eye(2)
        ).logpdf(self.pts)

    def loglik_label(self, x, w, y):
        return -np.logaddexp(0.0, y * w * (self.pts @ np.asarray(x)))

    def loglik_selection(self, X, K, sel):
        G = K * (self.pts @ np.asarray(X).T)
        return G[:, sel] - logsumexp(G, axis=1)

    def loglik_rank(self, X, K, order):
        G = K * (self.pts @ np.asarray(X).T)
        ll = np.zeros(len(self.pts))
        order = list(order)
        for j in range(len(order) - 1):
            ll += G[:, order[j]] - logsumexp(G[:, order[j:]], axis=1)
        return ll

    def kl_from(self, belief, log_lik):
        """KL(belief as discrete grid dist || normalized likelihood x prior)."""
        logpost = self.prior_log + log_lik
        logpost -= logpost.max()
        post = np.exp(logpost)
        post /= post.sum()
        q = multivariate_normal(mean=belief.mu, cov=belief.sigma).pdf(self.pts)
        q /= q.sum()
        mask = q > 0
        return float(
            np.sum(q[mask] * (np.log(q[mask]) - np.log(np.maximum(post[mask], 1e-300))))
        )


@pytest.fixture(scope="session")
def grid_oracle():
    return GridOracle2D()
