import math

import numpy as np
import pytest

from levyterm import (DiscretisedComposition, McEstimate, PlanError, PricingRequest, SimulationPlan,
                      composition_plan, gaussian_cap_price, mc_martingale_report, mc_mgf, mc_price, mc_prices,
                      price_cap, simulate_increments)
from levyterm.calibration import composition_tenor
from levyterm.fourier import strip_for
from levyterm.montecarlo import write_martingale_csv

from helpers import FP_NIG, HJM_NIG, brownian, composite, fp_model, hjm_model, nig, quarterly, spec_on


class TestPlan:
    @pytest.mark.parametrize("kwargs", [
        dict(paths=999, grid=(0.0, 1.0)),
        dict(paths=1000, grid=(0.5, 1.0)),
        dict(paths=1000, grid=(0.0, 1.0, 1.0)),
        dict(paths=1000, grid=(0.0, 1.0), measure="Q"),
        dict(paths=1000, grid=(0.0, 1.0), measure="forward"),
        dict(paths=1000, grid=(0.0, 1.0), batch_size=0),
    ])
    def test_rejects_invalid(self, kwargs):
        with pytest.raises(PlanError):
            SimulationPlan(**kwargs)

    def test_uniform_contains_breakpoints(self):
        plan = SimulationPlan.uniform(1000, 6.0, (5.0, 5.3), cells_per_year=4)
        assert {5.0, 5.3, 6.0} <= set(plan.grid)
        assert max(plan.widths()) <= 0.25 + 1e-12
        assert sum(plan.batches) == 1000

    def test_missing_breakpoint_rejected(self):
        model = hjm_model(nig())
        spec = spec_on(quarterly())
        plan = SimulationPlan(1000, tuple(np.linspace(0.0, 5.75, 23)))
        with pytest.raises(PlanError):
            mc_price(model, spec, plan)

    def test_forward_price_model_needs_terminal_measure(self):
        m = fp_model(nig(), quarterly())
        spec = spec_on(quarterly())
        with pytest.raises(PlanError):
            mc_price(m, spec, composition_plan(m, spec, 1000, measure="P"))


class TestEstimates:
    def test_seed_determinism(self):
        drv = composite()
        plan = SimulationPlan.uniform(5000, 3.0, drv.breakpoints, seed=42, measure="P")
        a = simulate_increments(drv, plan)
        b = simulate_increments(drv, plan)
        c = simulate_increments(drv, SimulationPlan.uniform(5000, 3.0, drv.breakpoints, seed=43, measure="P"))
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
        model = hjm_model(nig())
        spec = spec_on(quarterly())
        p = composition_plan(model, spec, 20_000, seed=5, batch_size=7000)
        assert mc_price(model, spec, p) == mc_price(model, spec, p)

    def test_zero_vol_is_exact(self):
        model = hjm_model(nig(), sigma_hat=0.0)
        spec = spec_on(quarterly(), 1.02)
        est = mc_price(model, spec, composition_plan(model, spec, 1000))
        assert est.stderr == 0.0
        assert est.mean == pytest.approx(model.curve(6.0) * (model.Z(spec) - 1.02), rel=1e-13)
        rows = mc_martingale_report(model, paths=1000)
        assert all(r.deviation_se == 0.0 for r in rows)

    def test_mgf_at_zero_and_one(self):
        model = hjm_model(nig(), sigma_hat=0.03)
        spec = spec_on(quarterly())
        plan = composition_plan(model, spec, 100_000, seed=2)
        zero = mc_mgf(model, spec, plan, 0.0)
        assert zero.mean == 1.0 and zero.stderr == 0.0
        assert mc_mgf(model, spec, plan, 1.0).deviation(model.Z(spec)) < 3.0

    def test_mgf_at_damping_value(self):
        model = fp_model(nig(), quarterly(), sigma_hat=0.03)
        spec = spec_on(quarterly())
        R = math.sqrt(strip_for(model, spec).upper)
        est = mc_mgf(model, spec, composition_plan(model, spec, 200_000, seed=15), R)
        assert est.deviation(model.mgf(spec, R)) < 3.0

    def test_brownian_hjm_against_closed_form(self):
        model = hjm_model(brownian(), sigma_hat=0.02)
        spec = spec_on(quarterly(), 1.04)
        est = mc_price(model, spec, composition_plan(model, spec, 200_000, seed=16))
        assert est.deviation(gaussian_cap_price(model, spec)) < 3.0

    def test_standard_error_scaling(self):
        model = hjm_model(nig(), sigma_hat=0.02)
        spec = spec_on(quarterly(), 1.04)
        for seed in range(3):
            small = mc_price(model, spec, composition_plan(model, spec, 20_000, seed=seed))
            large = mc_price(model, spec, composition_plan(model, spec, 80_000, seed=100 + seed))
            assert large.stderr / small.stderr == pytest.approx(0.5, rel=0.2)

    @pytest.mark.parametrize("driver", [brownian, nig], ids=["brownian", "nig"])
    def test_measure_change_consistency(self, driver):
        model = hjm_model(driver(), sigma_hat=0.02)
        spec = spec_on(quarterly(), 1.04)
        direct = mc_price(model, spec, composition_plan(model, spec, 200_000, seed=17))
        weighted = mc_price(model, spec, composition_plan(model, spec, 200_000, seed=18, measure="P"))
        combined = math.hypot(direct.stderr, weighted.stderr)
        assert abs(direct.mean - weighted.mean) < 3.0 * combined

    def test_shared_paths_for_strike_strip(self):
        model = hjm_model(nig(), sigma_hat=0.02)
        spec = spec_on(quarterly(), 1.04)
        plan = composition_plan(model, spec, 10_000, seed=19)
        many = mc_prices(model, spec, plan, [1.02, 1.04])
        assert many[1] == mc_price(model, spec, plan)
        assert many[0].mean >= many[1].mean


class TestDiscretisation:
    def test_discretised_mgf_identities(self):
        model = hjm_model(nig())
        spec = spec_on(quarterly())
        d = DiscretisedComposition(model, spec, composition_plan(model, spec, 1000))
        assert d.mgf(spec, 0.0) == 1.0
        assert d.mgf(spec, 1.0).real == pytest.approx(model.Z(spec), rel=1e-13)

    def test_grid_doubling_moves_price_less_than_one_standard_error(self):
        alpha, beta, sh = HJM_NIG
        model = hjm_model(nig(alpha, beta), sigma_hat=sh)
        tenor = composition_tenor()
        spec = spec_on(tenor, model.Z(spec_on(tenor)))
        bounds = strip_for(model, spec)
        # standard error at 10^6 paths, scaled from 10^5
        se = mc_price(model, spec, composition_plan(model, spec, 100_000, seed=20)).stderr / math.sqrt(10.0)

        def discretised_price(cpy):
            d = DiscretisedComposition(model, spec, composition_plan(model, spec, 1000, cells_per_year=cpy))
            return price_cap(PricingRequest(d, spec, bounds=bounds)).price

        exact = price_cap(PricingRequest(model, spec)).price
        p24, p48 = discretised_price(24), discretised_price(48)
        assert abs(p48 - p24) < se
        assert abs(p24 - exact) < 0.01 * se
        # midpoint rule: second-order convergence
        assert abs(p48 - exact) < 0.3 * abs(p24 - exact)


def test_deviation_semantics():
    assert McEstimate(1.0, 0.1, 1000, 0).deviation(1.2) == pytest.approx(2.0)
    assert McEstimate(1.0, 0.0, 1000, 0).deviation(1.0) == 0.0
    assert McEstimate(1.0, 0.0, 1000, 0).deviation(1.1) == math.inf
    est = McEstimate(1 + 1j, 0.1 + 0.5j, 1000, 0)
    assert est.deviation(1.1 + 1j) == pytest.approx(1.0)


def test_martingale_csv(tmp_path):
    rows = mc_martingale_report(hjm_model(brownian()), paths=2000, seed=1)
    path = tmp_path / "m.csv"
    write_martingale_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "# schema_version=1"
    assert lines[1].startswith("instrument,t,")
    assert len(lines) == 2 + len(rows)


def test_calibrated_forward_price_martingale_pooled_over_seeds():
    # independent replications: the pooled mean must sit within 3 pooled standard errors
    alpha, beta, sh = FP_NIG
    tenor = composition_tenor()
    model = fp_model(nig(alpha, beta), tenor, sigma_hat=sh)
    reps = [mc_martingale_report(model, paths=100_000, seed=seed) for seed in range(8)]
    for i in range(len(reps[0])):
        means = np.array([r[i].mc_mean for r in reps])
        ses = np.array([r[i].stderr for r in reps])
        pooled_se = math.sqrt(np.sum(ses ** 2)) / len(reps)
        assert abs(means.mean() - reps[0][i].initial) < 3.0 * pooled_se
