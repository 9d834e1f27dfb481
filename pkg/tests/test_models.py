"""Distribution models: masses, tails, Chernoff function, sampling."""

import math

import numpy as np
import pytest
from scipy import stats

from seqtest.errors import DomainError
from seqtest.models import Bernoulli, Poisson, model_by_name

BERN = Bernoulli()
POIS = Poisson()


class TestPmfSum:
    def test_fair_coin_pair(self):
        assert BERN.pmf_sum(2, 1, 0.5) == pytest.approx(0.5, abs=1e-15)

    def test_binomial_mass_matches_factorial_form(self):
        oracle = math.comb(10, 3) * 0.3**3 * 0.7**7
        assert BERN.pmf_sum(10, 3, 0.3) == pytest.approx(oracle, rel=1e-13)

    def test_poisson_zero_mass(self):
        assert POIS.pmf_sum(1, 0, 1.0) == pytest.approx(math.exp(-1.0), rel=1e-13)

    def test_bernoulli_rejects_theta_outside_open_interval(self):
        with pytest.raises(DomainError):
            BERN.validate_theta(0.0)
        with pytest.raises(DomainError):
            BERN.validate_theta(1.0)
        BERN.validate_theta(0.0, closed=True)

    def test_poisson_rejects_nonpositive_theta(self):
        with pytest.raises(DomainError):
            POIS.validate_theta(0.0)

    def test_vectorized_mass_sums_to_one(self):
        ks = np.arange(26)
        assert BERN.pmf_sum(25, ks, 0.37).sum() == pytest.approx(1.0, abs=1e-14)

    def test_mass_against_scipy(self):
        ks = np.arange(41)
        np.testing.assert_allclose(BERN.pmf_sum(40, ks, 0.83),
                                   stats.binom.pmf(ks, 40, 0.83), atol=1e-14)
        ks = np.arange(80)
        np.testing.assert_allclose(POIS.pmf_sum(7, ks, 1.9),
                                   stats.poisson.pmf(ks, 7 * 1.9), atol=1e-14)


class TestTails:
    def test_single_fair_coin(self):
        assert BERN.tail_lower(1, 0.0, 0.5) == pytest.approx(0.5, abs=1e-15)
        assert BERN.tail_upper(1, 0.0, 0.5) == pytest.approx(1.0, abs=1e-15)

    def test_lower_tail_is_three_binomial_masses(self):
        oracle = sum(math.comb(5, k) * 0.4**k * 0.6 ** (5 - k) for k in (0, 1, 2))
        assert BERN.tail_lower(5, 0.4, 0.4) == pytest.approx(oracle, rel=1e-13)

    def test_poisson_lower_tail_is_partial_series(self):
        # mean count 6, threshold mean 1 -> sum count 3
        oracle = math.exp(-6.0) * sum(6.0**j / math.factorial(j) for j in range(4))
        assert POIS.tail_lower(3, 1.0, 2.0) == pytest.approx(oracle, rel=1e-12)

    def test_tails_overlap_by_the_atom(self):
        for z in (0.0, 0.2, 0.4, 1.0):
            f = BERN.tail_lower(5, z, 0.3)
            g = BERN.tail_upper(5, z, 0.3)
            atom = BERN.pmf_sum(5, int(round(z * 5)), 0.3)
            assert f + g == pytest.approx(1.0 + atom, abs=1e-13)

    def test_ule_monotonicity_in_theta(self):
        """Upper tail grows and lower tail shrinks as theta grows."""
        thetas = np.linspace(0.05, 0.95, 19)
        for z in (0.2, 0.5, 0.8):
            up = [BERN.tail_upper(12, z, t) for t in thetas]
            lo = [BERN.tail_lower(12, z, t) for t in thetas]
            assert all(b - a >= -1e-12 for a, b in zip(up, up[1:]))
            assert all(b - a <= 1e-12 for a, b in zip(lo, lo[1:]))
        for z in (0.5, 2.0):
            up = [POIS.tail_upper(4, z, t) for t in np.linspace(0.2, 4.0, 20)]
            assert all(b - a >= -1e-12 for a, b in zip(up, up[1:]))


class TestChernoff:
    def test_value_one_at_the_mean(self):
        assert BERN.chernoff(0.3, 0.3) == pytest.approx(1.0, abs=1e-14)
        assert POIS.chernoff(1.7, 1.7) == pytest.approx(1.0, abs=1e-14)

    def test_bernoulli_closed_form_against_rho_minimization(self):
        z, theta = 0.5, 0.25
        rhos = np.linspace(-5, 5, 200001)
        oracle = np.min(np.exp(-rhos * z) * (1 - theta + theta * np.exp(rhos)))
        assert BERN.chernoff(z, theta) == pytest.approx(oracle, rel=1e-8)
        assert BERN.chernoff(z, theta) == pytest.approx(0.8660, abs=5e-5)

    def test_poisson_closed_form_against_rho_minimization(self):
        z, theta = 2.0, 1.0
        rhos = np.linspace(-5, 5, 200001)
        oracle = np.min(np.exp(-rhos * z) * np.exp(theta * (np.exp(rhos) - 1.0)))
        assert POIS.chernoff(z, theta) == pytest.approx(oracle, rel=1e-8)
        assert POIS.chernoff(z, theta) == pytest.approx(math.e / 4.0, rel=1e-12)

    def test_support_endpoints(self):
        assert BERN.chernoff(0.0, 0.3) == pytest.approx(0.7, rel=1e-13)
        assert BERN.chernoff(1.0, 0.3) == pytest.approx(0.3, rel=1e-13)
        assert POIS.chernoff(0.0, 2.5) == pytest.approx(math.exp(-2.5), rel=1e-13)

    def test_rejects_z_outside_support_hull(self):
        with pytest.raises(DomainError):
            BERN.chernoff(1.1, 0.5)
        with pytest.raises(DomainError):
            POIS.chernoff(-0.2, 1.0)

    def test_strictly_below_one_off_the_mean(self):
        for z in (0.1, 0.45, 0.9):
            for theta in (0.2, 0.5, 0.8):
                v = BERN.chernoff(z, theta)
                assert 0.0 < v <= 1.0
                if abs(z - theta) > 1e-9:
                    assert v < 1.0


class TestChernoffBoundAndMonotonicity:
    """Tail bound and the four monotonicity directions, tight grids."""

    def test_tail_bound_bernoulli_exhaustive(self):
        for n in (1, 5, 20, 50):
            ks = np.arange(n + 1)
            zs = ks / n
            for theta in np.arange(0.05, 0.96, 0.05):
                cn = BERN.chernoff(zs, theta) ** n
                for k, z, cap in zip(ks, zs, cn):
                    if z <= theta:
                        assert BERN.tail_lower(n, z, theta) <= cap + 1e-12
                    if z >= theta:
                        assert BERN.tail_upper(n, z, theta) <= cap + 1e-12

    def test_tail_bound_poisson(self):
        for n in (1, 4):
            for theta in (0.5, 1.0, 3.0):
                for z in np.arange(0.0, 4.0 * theta + 1e-9, theta / 4):
                    cap = POIS.chernoff(z, theta) ** n
                    if z <= theta:
                        assert POIS.tail_lower(n, z, theta) <= cap + 1e-12
                    if z >= theta:
                        assert POIS.tail_upper(n, z, theta) <= cap + 1e-12

    def test_monotone_in_theta_each_side_of_z(self):
        thetas = np.linspace(0.02, 0.98, 97)
        for z in (0.25, 0.5, 0.75):
            vals = BERN.chernoff(z, thetas[0]), *(BERN.chernoff(z, t) for t in thetas[1:])
            below = [v for t, v in zip(thetas, vals) if t <= z]
            above = [v for t, v in zip(thetas, vals) if t >= z]
            assert all(b - a >= -1e-12 for a, b in zip(below, below[1:]))
            assert all(b - a <= 1e-12 for a, b in zip(above, above[1:]))

    def test_monotone_in_z_each_side_of_theta(self):
        zs = np.linspace(0.0, 1.0, 101)
        for theta in (0.3, 0.6):
            vals = [BERN.chernoff(z, theta) for z in zs]
            below = [v for z, v in zip(zs, vals) if z <= theta]
            above = [v for z, v in zip(zs, vals) if z >= theta]
            assert all(b - a >= -1e-12 for a, b in zip(below, below[1:]))
            assert all(b - a <= 1e-12 for a, b in zip(above, above[1:]))


class TestProbabilityIntegralBound:
    def test_lower_tail_transform_is_superuniform(self):
        """Pr{F(mean) <= a} <= a, exact enumeration over the support."""
        for n in (1, 7, 30):
            for theta in (0.2, 0.5, 0.9):
                ks = np.arange(n + 1)
                mass = BERN.pmf_sum(n, ks, theta)
                fvals = np.array([BERN.tail_lower(n, k / n, theta) for k in ks])
                for a in np.arange(0.01, 1.0, 0.01):
                    assert mass[fvals <= a].sum() <= a + 1e-12


class TestIncrementAndDraw:
    def test_bernoulli_increment_is_exact(self):
        probs, deficit = BERN.increment_pmf(6, 0.4)
        assert deficit == 0.0
        np.testing.assert_allclose(probs, stats.binom.pmf(np.arange(7), 6, 0.4),
                                   atol=1e-14)

    def test_poisson_increment_deficit_is_certified(self):
        probs, deficit = POIS.increment_pmf(3, 2.0, tail_mass=1e-15)
        assert deficit <= 1e-15
        assert probs.sum() + deficit == pytest.approx(1.0, abs=1e-13)
        # the declared deficit equals the analytic upper tail mass
        assert deficit == pytest.approx(stats.poisson.sf(len(probs) - 1, 6.0), rel=1e-9)

    def test_draw_matches_model_distribution(self):
        rng = np.random.default_rng(11)
        xs = BERN.draw(rng, 20000, 0.3)
        assert set(np.unique(xs)) <= {0, 1}
        assert abs(xs.mean() - 0.3) < 0.01
        ys = POIS.draw(rng, 20000, 2.5)
        assert ys.min() >= 0
        assert abs(ys.mean() - 2.5) < 0.05


def test_model_registry_round_trip():
    assert isinstance(model_by_name("bernoulli"), Bernoulli)
    assert isinstance(model_by_name("poisson"), Poisson)
    with pytest.raises(DomainError):
        model_by_name("geometric")
