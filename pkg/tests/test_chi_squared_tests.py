from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from src.chi_squared_tests import (
    CellHistogram,
    cell_integrals,
    chi2_decide,
    chi2_decide_and_power,
    chi2_functional,
    chi2_noncentrality_argument,
    chi2_power_formula,
    chi2_statistic,
    chi2_tail_bound_check,
    default_cells,
    fourier_identity,
    scale_to_chi2_noncentrality,
)
from src.errors import InvalidInputError
from src.rng import stream
from src.sequence_model import CoefficientVector, random_cosine_polynomial, random_trig_polynomial


class TestHistogram:
    def test_counts(self):
        hist = CellHistogram.from_sample([0.05, 0.3, 0.31, 0.99, 1.0], m=4)
        assert hist.counts.tolist() == [1, 2, 0, 2]
        assert hist.p_hat.sum() == pytest.approx(1.0)

    def test_rejects_values_outside_unit_interval(self):
        with pytest.raises(InvalidInputError):
            CellHistogram.from_sample([0.5, 1.2], m=4)

    def test_counts_must_sum_to_n(self):
        with pytest.raises(InvalidInputError):
            CellHistogram(m=2, counts=np.array([1, 1]), n=3)

    def test_default_cells(self):
        assert default_cells(4096, 0.25) == 4096
        assert default_cells(3, 0.45) == 2


class TestFunctional:
    @given(st.integers(min_value=0, max_value=10_000), st.sampled_from([4, 8, 16]))
    @settings(max_examples=30, deadline=None)
    def test_cell_form_equals_fourier_form(self, seed, m):
        rng = stream(seed, "chi2-identity")
        theta = random_trig_polynomial(int(rng.integers(1, 33)), rng, scale=0.05)
        direct = chi2_functional(theta, m, 10)
        assert abs(direct - fourier_identity(theta, m, 10)) <= 1e-10 * (1.0 + direct)

    @pytest.mark.parametrize("maker", [random_trig_polynomial, random_cosine_polynomial])
    def test_cell_integrals_sum_to_zero(self, maker, rng):
        assert cell_integrals(maker(9, rng, scale=0.1), 7).sum() == pytest.approx(0.0, abs=1e-14)

    def test_multiples_of_m_are_invisible(self):
        # период 1/m: интеграл по каждой ячейке равен нулю
        theta = CoefficientVector.from_mapping("trig", {8: 0.2})
        assert chi2_functional(theta, 8, 100) == pytest.approx(0.0, abs=1e-20)

    def test_generic_basis_rejected(self):
        with pytest.raises(InvalidInputError):
            cell_integrals(CoefficientVector.from_mapping("generic", {1: 0.1}), 4)

    def test_tail_bound_requires_d_above_one(self):
        with pytest.raises(InvalidInputError):
            chi2_tail_bound_check(CoefficientVector.from_mapping("trig", {40: 0.1}), 8, d=1.0)

    def test_tail_bound_holds_for_high_frequency(self):
        theta = CoefficientVector.from_mapping("trig", {17: 0.1, 40: 0.05, 97: 0.02})
        check = chi2_tail_bound_check(theta, 8)
        assert check.i_n == 16
        assert check.holds


class TestDecision:
    def test_null_mean_is_m_minus_one(self):
        m, n = 16, 200
        values = [chi2_statistic(stream(8, "chi2-null", i).random(n), m) for i in range(4000)]
        se = np.std(values, ddof=1) / np.sqrt(len(values))
        assert abs(np.mean(values) - (m - 1)) <= 4 * se

    def test_zero_alternative_prediction(self):
        assert chi2_power_formula(CoefficientVector.zeros("trig"), 64, 10_000, 0.05) == pytest.approx(0.95)

    def test_decide_and_power_dispatch(self):
        theta = CoefficientVector.from_mapping("trig", {1: 0.05})
        beta = chi2_decide_and_power(theta, 16, 1000, 0.05)
        assert 0.0 < beta < 0.95
        decision = chi2_decide_and_power(stream(1, "chi2").random(1000), 16, 1000, 0.05)
        assert decision.threshold == pytest.approx(1.6448536269514722)

    def test_sample_size_must_match(self):
        with pytest.raises(InvalidInputError):
            chi2_decide_and_power(np.full(10, 0.5), 4, 20, 0.05)

    def test_small_m_warns(self, caplog):
        with caplog.at_level("WARNING", logger="src.chi_squared_tests"):
            chi2_decide(stream(1, "chi2").random(100), 4, 0.05)
        assert "below" in caplog.text

    def test_sparse_cells_warn(self, caplog):
        # m = 64 passes the cell floor, n²/m = 100²/64 ≈ 156 does not warn, 60²/64 ≈ 56 does
        theta = CoefficientVector.from_mapping("trig", {1: 0.05})
        with caplog.at_level("WARNING", logger="src.chi_squared_tests"):
            chi2_power_formula(theta, 64, 100, 0.05)
        assert caplog.text == ""
        with caplog.at_level("WARNING", logger="src.chi_squared_tests"):
            chi2_power_formula(theta, 64, 60, 0.05)
        assert "n^2/m" in caplog.text

    def test_scaling_hits_target(self):
        theta = CoefficientVector.from_mapping("trig", {1: 0.01, 2: 0.01})
        scaled = scale_to_chi2_noncentrality(theta, 64, 10_000, 1.0)
        assert chi2_noncentrality_argument(scaled, 64, 10_000) == pytest.approx(1.0)
