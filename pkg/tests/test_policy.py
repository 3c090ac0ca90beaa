import numpy as np
import pytest

from richquery.belief import isotropic_belief
from richquery.committee import Committee
from richquery.errors import (
    DegenerateCommitteeError,
    InfeasibleConfigError,
    NoFeasibleQueryError,
    RankDeficiencyError,
)
from richquery.policy import (
    CostModel,
    InfoRateTable,
    ProbeSettings,
    RateRow,
    build_rate_table,
    estimate_info_ratios,
    fit_cost_model,
    parse_cost_model,
    predict_cost,
    reference_cost_model,
    select_query_config,
    serialize_cost_model,
)
from richquery.responses import QueryKind, ResponseParams
from richquery.synthetic import make_synthetic_task


class TestFitCostModel:
    def test_exact_recovery_selection(self):
        obs = [(QueryKind.SELECT_HIGH, s, 4.01 + 0.63 * s) for s in range(2, 9)]
        model = fit_cost_model(obs)
        b0, b1 = model.coeffs[QueryKind.SELECT_HIGH]
        assert b0 == pytest.approx(4.01, abs=1e-9)
        assert b1 == pytest.approx(0.63, abs=1e-9)

    def test_exact_recovery_ranking(self):
        obs = [(QueryKind.RANK, s, -0.32 + 4.41 * s) for s in range(2, 9)]
        model = fit_cost_model(obs)
        b0, b1 = model.coeffs[QueryKind.RANK]
        assert b0 == pytest.approx(-0.32, abs=1e-9)
        assert b1 == pytest.approx(4.41, abs=1e-9)

    def test_noisy_recovery_at_study_scale(self):
        rng = np.random.default_rng(1648)
        sizes = rng.integers(2, 9, size=1648)
        secs = 4.01 + 0.63 * sizes + rng.normal(0.0, 3.35, size=1648)
        model = fit_cost_model([(QueryKind.SELECT_HIGH, int(s), float(t)) for s, t in zip(sizes, secs)])
        assert abs(model.coeffs[QueryKind.SELECT_HIGH][1] - 0.63) < 0.1

    def test_single_size_unidentifiable(self):
        with pytest.raises(RankDeficiencyError):
            fit_cost_model([(QueryKind.RANK, 4, 17.0), (QueryKind.RANK, 4, 18.0)])

    def test_label_fits_constant(self):
        model = fit_cost_model([(QueryKind.LABEL, 1, 4.0), (QueryKind.LABEL, 1, 5.0)])
        assert model.coeffs[QueryKind.LABEL] == (4.5, 0.0)

    def test_residual_mean_zero(self):
        rng = np.random.default_rng(3)
        obs = [
            (QueryKind.RANK, int(s), float(-0.32 + 4.41 * s + rng.normal(0, 5)))
            for s in rng.integers(2, 11, size=400)
        ]
        model = fit_cost_model(obs)
        b0, b1 = model.coeffs[QueryKind.RANK]
        resid = [t - (b0 + b1 * s) for _, s, t in obs]
        assert abs(sum(resid)) < 1e-6 * len(obs)

    def test_consistency_with_more_data(self):
        def beta1_error(n, seed):
            rng = np.random.default_rng(seed)
            sizes = rng.integers(2, 11, size=n)
            secs = 4.01 + 0.63 * sizes + rng.normal(0.0, 3.35, size=n)
            model = fit_cost_model(
                [(QueryKind.SELECT_HIGH, int(s), float(t)) for s, t in zip(sizes, secs)]
            )
            return abs(model.coeffs[QueryKind.SELECT_HIGH][1] - 0.63)

        assert beta1_error(10000, 0) < beta1_error(100, 0)


class TestPredictCost:
    def test_reference_values_at_four(self):
        model = reference_cost_model()
        assert predict_cost(model, QueryKind.SELECT_HIGH, 4) == pytest.approx(6.53)
        assert predict_cost(model, QueryKind.RANK, 4) == pytest.approx(17.32)

    def test_label_constant(self):
        model = reference_cost_model()
        for s in (1, 3, 10):
            assert predict_cost(model, QueryKind.LABEL, s) == pytest.approx(4.37)

    def test_out_of_range_rejected(self):
        model = reference_cost_model()
        with pytest.raises(InfeasibleConfigError):
            predict_cost(model, QueryKind.RANK, 99)

    def test_nonpositive_prediction_rejected(self):
        model = CostModel(coeffs={QueryKind.RANK: (-10.0, 1.0)}, feasible_sizes=(1, 10))
        with pytest.raises(InfeasibleConfigError):
            predict_cost(model, QueryKind.RANK, 2)

    def test_serialization_round_trip(self):
        model = reference_cost_model()
        again = parse_cost_model(serialize_cost_model(model))
        assert again.coeffs == model.coeffs


def _table(rows):
    return InfoRateTable(rows=tuple(
        RateRow(kind=k, set_size=s, ratio=r, cost=c, rate=r / c) for k, s, r, c in rows
    ))


class TestSelectQueryConfig:
    def test_rank_ten_dominates(self):
        t = _table([
            (QueryKind.LABEL, 1, 1.0, 4.37),
            (QueryKind.SELECT_HIGH, 2, 5.0, 5.27),
            (QueryKind.RANK, 10, 50.0, 43.78),
        ])
        assert select_query_config(t) == (QueryKind.RANK, 10)

    def test_small_selection_dominates(self):
        t = _table([
            (QueryKind.LABEL, 1, 1.0, 5.0),
            (QueryKind.SELECT_HIGH, 2, 5.0, 3.5),
            (QueryKind.SELECT_HIGH, 3, 5.5, 5.0),
            (QueryKind.RANK, 10, 50.0, 310.0),
        ])
        assert select_query_config(t) == (QueryKind.SELECT_HIGH, 2)

    def test_cost_scale_invariance(self):
        rows = [
            (QueryKind.LABEL, 1, 1.0, 4.37),
            (QueryKind.SELECT_HIGH, 3, 6.0, 5.9),
            (QueryKind.RANK, 4, 16.0, 17.32),
        ]
        base = select_query_config(_table(rows))
        scaled = select_query_config(_table([(k, s, r, 7.3 * c) for k, s, r, c in rows]))
        assert base == scaled
        ratio_scaled = select_query_config(_table([(k, s, 2.5 * r, c) for k, s, r, c in rows]))
        assert base == ratio_scaled

    def test_tie_breaks_prefer_cheap_then_small(self):
        t = _table([
            (QueryKind.SELECT_HIGH, 4, 2.0, 10.0),
            (QueryKind.SELECT_HIGH, 2, 1.0, 5.0),
        ])
        assert select_query_config(t) == (QueryKind.SELECT_HIGH, 2)

    def test_no_feasible(self):
        with pytest.raises(NoFeasibleQueryError):
            select_query_config(InfoRateTable(rows=()))
        t = _table([(QueryKind.LABEL, 1, 0.0, 4.37)])
        with pytest.raises(NoFeasibleQueryError):
            select_query_config(t)


@pytest.fixture(scope="module")
def task():
    pool, gt = make_synthetic_task(n=120, raw_dim=4, seed=2, slope=2.0, score_noise_sd=2.0)
    params = ResponseParams(w=-0.5, a=2.0, sigma=2.0)
    belief = isotropic_belief(pool.dim, 1.0 / 3.0)
    return pool, params, belief


class TestEstimateInfoRatios:
    def test_degenerate_committee_guard(self, task):
        pool, params, belief = task
        tight = isotropic_belief(pool.dim, 1e-18)
        with pytest.raises(DegenerateCommitteeError):
            estimate_info_ratios(
                pool,
                tight,
                [(QueryKind.LABEL, 1), (QueryKind.SELECT_HIGH, 2)],
                params,
                probe=ProbeSettings(committee_size=8, eval_committee_size=8, mc_draws=50),
                n_probes=1,
                seed=0,
            )

    def test_label_anchor_and_size_monotonicity(self, task):
        pool, params, belief = task
        grid = [(QueryKind.LABEL, 1)]
        sizes = (2, 3, 4)
        for s in sizes:
            grid.append((QueryKind.SELECT_HIGH, s))
            grid.append((QueryKind.RANK, s))
        ratios = estimate_info_ratios(
            pool,
            belief,
            grid,
            params,
            probe=ProbeSettings(committee_size=30, eval_committee_size=120, mc_draws=200,
                                probe_pool_size=None),
            n_probes=2,
            seed=5,
        )
        assert ratios[(QueryKind.LABEL, 1)] == 1.0
        # larger sets never lose information on the shared greedy prefixes
        for s1, s2 in zip(sizes, sizes[1:]):
            assert ratios[(QueryKind.SELECT_HIGH, s2)] >= ratios[(QueryKind.SELECT_HIGH, s1)]
            assert ratios[(QueryKind.RANK, s2)] >= ratios[(QueryKind.RANK, s1)]

    def test_ranking_beats_selection_on_shared_sets(self, task):
        # the ordering channel strictly refines the pick-the-top channel; the
        # threshold channel summarizes labels as a count, which at |S| = 2 can
        # concede a hair of label information to the exact selection label
        from richquery.committee import disagreement, greedy_build, sample_committee

        pool, params, belief = task
        comm = sample_committee(belief, 40, seed=3)
        chosen = greedy_build(pool, 4, QueryKind.RANK, comm, params, seed=1)
        for s in (3, 4):
            items = [pool[i] for i in chosen[:s]]
            d_rank = disagreement(items, QueryKind.RANK, comm, params)
            d_sel = disagreement(items, QueryKind.SELECT_HIGH, comm, params)
            assert d_rank >= d_sel - 1e-9
        items = [pool[i] for i in chosen[:2]]
        d_rank = disagreement(items, QueryKind.RANK, comm, params)
        d_sel = disagreement(items, QueryKind.SELECT_HIGH, comm, params)
        assert d_rank >= d_sel - 5e-3

    def test_rate_table_composition(self, task):
        pool, params, belief = task
        ratios = {
            (QueryKind.LABEL, 1): 1.0,
            (QueryKind.SELECT_HIGH, 4): 6.0,
            (QueryKind.RANK, 4): 15.0,
        }
        table = build_rate_table(ratios, reference_cost_model())
        row = table.row(QueryKind.SELECT_HIGH, 4)
        assert row.cost == pytest.approx(6.53)
        assert row.rate == pytest.approx(6.0 / 6.53)
