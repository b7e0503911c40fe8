import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from levyterm import (NIG, Brownian, CompositionSpec, DiscountCurve, ExponentialMomentBound, HjmModel,
                      HoLeeVolatility, InfeasibleStripError, LevyModel, StripError, TabulatedVolatility,
                      TenorStructure, VasicekVolatility, composition_plan, mc_martingale_report, mc_mgf)
from levyterm.fourier import gaussian_log_moments

from helpers import DRIVERS, brownian, hjm_model, nig, quarterly, spec_on


def untelescoped_log_mgf(model: HjmModel, spec: CompositionSpec, z: complex) -> complex:
    """log M_H(z) from the per-period sums, integrated with scipy between fixings."""
    dates = spec.tenor.dates
    fix = spec.tenor.fixings
    T_star = spec.horizon

    def theta(s, x):
        return complex(model.driver.piece_at(s).cumulant(x))

    def f(s):
        live = [i for i in range(spec.N) if s <= fix[i]]
        a_sum = sum(theta(s, model.Sigma(s, dates[i + 1])) - theta(s, model.Sigma(s, dates[i])) for i in live)
        sig_sum = sum(model.Sigma(s, dates[i + 1]) - model.Sigma(s, dates[i]) for i in live)
        sig_star = float(model.Sigma(s, T_star))
        return z * a_sum - theta(s, sig_star) + theta(s, sig_star - z * sig_sum)

    knots = sorted({0.0, *fix, *model.driver.breakpoints} - {x for x in model.driver.breakpoints if x > fix[-1]})
    total = 0j
    for a, b in zip(knots, knots[1:]):
        re, _ = integrate.quad(lambda s: f(s).real, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)
        im, _ = integrate.quad(lambda s: f(s).imag, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)
        total += complex(re, im)
    return z * math.log(model.Z(spec)) + total


class TestVolatility:
    @pytest.mark.parametrize("vol", [VasicekVolatility(0.01, 0.05), HoLeeVolatility(0.012),
                                     TabulatedVolatility((0.0, 1.0, 3.0, 10.0), (0.0, 0.01, 0.025, 0.05))])
    def test_Sigma_is_integral_of_sigma(self, vol):
        s, T = 0.7, 4.2
        val, _ = integrate.quad(lambda u: float(vol.sigma(s, u)), s, T, points=[s + 1.0, s + 3.0])
        assert float(vol.Sigma(s, T)) == pytest.approx(val, rel=1e-10)
        assert float(vol.Sigma(T, T)) == 0.0

    def test_vasicek_sup(self):
        vol = VasicekVolatility(0.01, 0.05)
        assert vol.sup_on(0.0, 0.0, 6.0) == pytest.approx(0.2 * (1 - math.exp(-0.3)), rel=1e-14)
        assert vol.sup_on(0.0, 0.0, 6.0) == pytest.approx(0.051836, abs=1e-6)

    def test_tabulated_validation(self):
        with pytest.raises(ValueError):
            TabulatedVolatility((0.0, 1.0), (0.01, 0.02))


class TestDrift:
    def test_brownian_example(self):
        model = HjmModel(brownian(), HoLeeVolatility(0.01), DiscountCurve.flat(0.04))
        assert model.Sigma(0.0, 2.0) == pytest.approx(0.02)
        assert model.drift_A(0.0, 2.0) == pytest.approx(2e-4, rel=1e-14)

    def test_vanishes_at_maturity(self):
        model = hjm_model(nig())
        assert model.drift_A(3.0, 3.0) == 0.0

    def test_nig_drift_is_cumulant_of_Sigma(self):
        model = hjm_model(nig())
        sig = float(model.Sigma(1.0, 4.0))
        assert model.drift_A(1.0, 4.0) == pytest.approx(NIG.unit_variance(3.0, -1.0).cumulant(sig).real, rel=1e-14)


class TestCompositionTerms:
    def test_zero_vol_collapses(self):
        model = hjm_model(nig(), sigma_hat=0.0)
        spec = spec_on(quarterly())
        const, g = model.composition_log_value_terms(spec)
        assert const == pytest.approx(0.04, rel=1e-14)
        assert np.all(g(np.linspace(0, 6, 7)) == 0.0)
        assert model.is_deterministic(spec)

    def test_single_period_constant(self):
        model = hjm_model(brownian(), sigma_hat=0.0)
        spec = CompositionSpec.regular(1.0, 1, 1.0)
        assert model.Z(spec) == pytest.approx(math.exp(0.01), rel=1e-14)

    def test_integrand_telescopes(self):
        model = hjm_model(nig())
        spec = CompositionSpec(TenorStructure((5.0, 5.25, 5.5, 6.0), (4.0, 5.25, 5.3)), 1.0)
        s = np.array([0.0, 3.9, 4.0, 4.5, 5.25, 5.28, 5.3, 5.4])
        dates, fix = spec.tenor.dates, spec.tenor.fixings
        explicit = [-sum(model.Sigma(t, dates[i + 1]) - model.Sigma(t, dates[i])
                         for i in range(spec.N) if t <= fix[i]) for t in s]
        np.testing.assert_allclose(model.composition_integrand(spec, s), explicit, atol=1e-16)
        assert g0_matches(model, spec)


def g0_matches(model, spec):
    _, g = model.composition_log_value_terms(spec)
    return np.isclose(g(np.array([0.0]))[0], model.Sigma(0.0, spec.tenor.dates[0]) - model.Sigma(0.0, spec.horizon))


class TestStrip:
    def test_ho_lee_M_prime(self):
        model = HjmModel(brownian(), HoLeeVolatility(0.01), DiscountCurve.flat(0.04))
        b = model.strip_bounds(spec_on(quarterly()))
        assert b.M_prime == pytest.approx(0.06)
        assert b.M_second == pytest.approx(0.05)

    def test_vasicek_bounds(self):
        b = hjm_model(nig()).strip_bounds(spec_on(quarterly()))
        assert b.M_prime == pytest.approx(0.051836, abs=1e-6)
        assert b.M_second == pytest.approx(0.2 * (1 - math.exp(-0.25)), rel=1e-14)
        w = (b.M - 5 * b.M_second) / (b.M_prime + 5 * b.M_second)
        assert (b.lower, b.upper) == pytest.approx((1 - w, 1 + w))

    @pytest.mark.parametrize("factor,feasible", [(1 + 1e-9, True), (1 - 1e-9, False)])
    def test_boundary_of_feasibility(self, factor, feasible):
        spec = spec_on(quarterly())
        m2 = 0.2 * (1 - math.exp(-0.25))
        em = ExponentialMomentBound(5 * m2 * factor)
        model = hjm_model(LevyModel.homogeneous(Brownian(), em))
        if feasible:
            b = model.strip_bounds(spec)
            assert 0 < b.upper - 1 < 1e-8
        else:
            with pytest.raises(InfeasibleStripError):
                model.strip_bounds(spec)

    def test_heavy_tailed_nig_is_infeasible_for_forward_start(self):
        alpha, beta, sh = 0.39673797065922645, -0.15255790036764297, 0.014188769725838653
        model = hjm_model(nig(alpha, beta), sigma_hat=sh)
        with pytest.raises(InfeasibleStripError):
            model.strip_bounds(spec_on(quarterly()))

    def test_mgf_rejects_argument_outside_strip(self):
        model = hjm_model(nig())
        spec = spec_on(quarterly())
        b = model.strip_bounds(spec)
        with pytest.raises(StripError) as info:
            model.mgf(spec, b.upper + 0.5)
        assert info.value.upper == pytest.approx(b.upper)


class TestMgf:
    @pytest.mark.parametrize("name", sorted(DRIVERS))
    def test_identities(self, name):
        model = hjm_model(DRIVERS[name]())
        spec = spec_on(quarterly())
        assert abs(model.mgf(spec, 0.0) - 1.0) < 1e-12
        assert model.mgf(spec, 1.0).real == pytest.approx(model.Z(spec), rel=1e-11)
        assert model.Z(spec) == pytest.approx(1.0408107741923882, rel=1e-14)

    @pytest.mark.parametrize("name", sorted(DRIVERS))
    @pytest.mark.parametrize("z", [2.0, 1.5 - 3j, -1.0 + 20j])
    def test_matches_untelescoped_form(self, name, z):
        model = hjm_model(DRIVERS[name](), sigma_hat=0.02)
        spec = spec_on(quarterly(1.5, 4))
        assert np.log(model.mgf(spec, z)) == pytest.approx(untelescoped_log_mgf(model, spec, z), abs=1e-10)

    def test_vectorised_matches_scalar(self):
        model = hjm_model(nig())
        spec = spec_on(quarterly())
        zs = np.array([1.2 - 1j, 0.5 + 40j, 2.0])
        np.testing.assert_allclose(model.mgf(spec, zs), [model.mgf(spec, z) for z in zs], rtol=1e-12)

    def test_matches_monte_carlo(self):
        model = hjm_model(nig(), sigma_hat=0.03)
        spec = spec_on(quarterly())
        plan = composition_plan(model, spec, 200_000, seed=11)
        z = 1.5 + 3j
        est = mc_mgf(model, spec, plan, z)
        assert est.deviation(model.mgf(spec, z)) < 3.0

    def test_gaussian_moments(self):
        model = hjm_model(brownian())
        spec = spec_on(quarterly())
        m, v = gaussian_log_moments(model, spec)
        assert m + 0.5 * v == pytest.approx(math.log(model.Z(spec)), abs=1e-14)
        _, g = model.composition_log_value_terms(spec)
        var, _ = integrate.quad(lambda s: float(g(np.array([s]))[0] ** 2), 0.0, 5.75, points=[5.0, 5.25, 5.5],
                                epsabs=1e-16, epsrel=1e-12, limit=200)
        assert v == pytest.approx(var, rel=1e-10)
        assert model.mgf(spec, 2.0).real == pytest.approx(math.exp(2 * m + 2 * v), rel=1e-11)

    def test_tabulated_reproduces_vasicek(self):
        vas = VasicekVolatility(0.01, 0.05)
        taus = np.linspace(0.0, 10.0, 2001)
        tab = TabulatedVolatility(tuple(taus), tuple(vas.Sigma(0.0, taus)))
        spec = spec_on(quarterly())
        a = hjm_model(nig())
        b = HjmModel(a.driver, tab, a.curve)
        z = 1.3 - 2j
        assert b.mgf(spec, z) == pytest.approx(a.mgf(spec, z), rel=1e-7)


@pytest.mark.parametrize("name", ["brownian", "nig"])
def test_discounted_bonds_are_martingales(name):
    model = hjm_model(DRIVERS[name](), sigma_hat=0.02)
    rows = mc_martingale_report(model, paths=100_000, seed=21)
    assert len(rows) == 4
    assert all(r.deviation_se < 3.0 for r in rows)


@given(u=st.floats(-200.0, 200.0), R=st.floats(1.05, 3.0))
def test_mgf_conjugate_symmetry_and_modulus(u, R):
    model = hjm_model(nig())
    spec = spec_on(quarterly())
    z = complex(R, u)
    mz, mzc, mr = model.mgf(spec, np.array([z, z.conjugate(), R]))
    assert mzc == pytest.approx(np.conj(mz), rel=1e-12, abs=1e-300)
    assert abs(mz) <= mr.real * (1 + 1e-12)
