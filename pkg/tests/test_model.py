import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from aoivoi.model import (
    ClassSpec,
    Deterministic,
    Exponential,
    SpecError,
    SystemSpec,
    arrival_mgf,
    hyperexponential,
    make_spec,
    mixture_mgf,
    mixture_moments,
    service_mgf,
)

from helpers import random_spec


def exp_class(rate, p=1.0, value=1.0, decay=1.0):
    return ClassSpec(p, value, decay, Exponential(rate))


class TestServiceMgf:
    def test_zero_argument(self):
        assert service_mgf(exp_class(1.0), 0.0) == 1.0

    def test_exponential(self):
        assert service_mgf(exp_class(1.0), -0.1) == pytest.approx(1 / 1.1, rel=1e-15)

    def test_deterministic(self):
        cls = ClassSpec(1.0, 1.0, 0.5, Deterministic(2.0))
        assert service_mgf(cls, -0.5) == pytest.approx(math.exp(-1.0), rel=1e-15)

    def test_rejects_positive_argument(self):
        with pytest.raises(ValueError):
            service_mgf(exp_class(1.0), 0.1)


class TestArrivalMgf:
    def test_finite_rate(self):
        assert arrival_mgf(10.0, -0.1) == pytest.approx(10 / 10.1, rel=1e-15)

    def test_generate_at_will(self):
        assert arrival_mgf(math.inf, -3.0) == 1.0
        assert arrival_mgf(math.inf, 0.0) == 1.0

    def test_zero_argument(self):
        assert arrival_mgf(1.0, 0.0) == 1.0


class TestMixtureMoments:
    def test_fig3_parameters(self):
        spec = hyperexponential([0.5, 0.5], [100, 1], [0.1, 1], [0.1, 1], 10, 0.5)
        m = mixture_moments(spec)
        assert m.EY == pytest.approx(5.5)
        assert m.EY2 == pytest.approx(101.0)
        assert m.EZ == pytest.approx(5.6)
        assert m.EZ2 == pytest.approx(102.12)

    def test_single_exponential(self):
        m = mixture_moments(hyperexponential([1], [1], [1], [1], 1, 0))
        assert (m.EY, m.EY2, m.EZ, m.EZ2) == (1.0, 2.0, 2.0, 6.0)

    def test_deterministic_generate_at_will(self):
        spec = make_spec([1], [1], [1], [Deterministic(1.0)], math.inf, 0)
        m = mixture_moments(spec)
        assert (m.EY, m.EY2, m.EZ, m.EZ2) == (1.0, 1.0, 1.0, 1.0)

    def test_variance_non_negative(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            m = mixture_moments(random_spec(rng))
            assert m.EY > 0
            assert m.EY2 - m.EY**2 >= -1e-12 * m.EY2
            assert m.EZ >= m.EY
            assert m.EZ2 - m.EZ**2 >= -1e-12 * m.EZ2

    def test_matches_sample_moments(self):
        spec = make_spec(
            [0.3, 0.5, 0.2], [1, 1, 1], [1, 1, 1],
            [Exponential(0.5), Exponential(3.0), Deterministic(1.5)], 2.0, 0.3,
        )
        rng = np.random.default_rng(5)
        n = 10**6
        j = rng.choice(3, size=n, p=spec.probabilities)
        y = np.empty(n)
        for k, c in enumerate(spec.classes):
            mask = j == k
            y[mask] = c.service.sample(rng, int(mask.sum()))
        m = mixture_moments(spec)
        for sample, exact in ((y, m.EY), (y**2, m.EY2)):
            se = sample.std(ddof=1) / math.sqrt(n)
            assert abs(sample.mean() - exact) <= 3 * se


class TestMixtureMgf:
    def test_zero(self):
        spec = hyperexponential([0.5, 0.5], [1, 1], [1, 1], [1, 2], 1, 0)
        assert mixture_mgf(spec, 0.0) == 1.0

    def test_two_classes(self):
        spec = hyperexponential([0.5, 0.5], [1, 1], [1, 1], [1, 2], 1, 0)
        assert mixture_mgf(spec, -1.0) == pytest.approx(0.5 * 0.5 + 0.5 * 2 / 3, rel=1e-15)

    def test_single_class_equals_service_mgf(self):
        spec = hyperexponential([1], [1], [1], [0.7], 1, 0)
        assert mixture_mgf(spec, -0.3) == service_mgf(spec.classes[0], -0.3)


@given(
    rate=st.floats(0.01, 100),
    duration=st.floats(0, 20),
    s1=st.floats(-20, 0),
    s2=st.floats(-20, 0),
)
def test_mgf_bounded_and_monotone(rate, duration, s1, s2):
    lo, hi = sorted((s1, s2))
    for cls in (exp_class(rate), ClassSpec(1.0, 1.0, 1.0, Deterministic(duration))):
        a, b = service_mgf(cls, lo), service_mgf(cls, hi)
        assert 0 <= a <= b <= 1
        assert b > 0
    assert 0 < arrival_mgf(rate, lo) <= arrival_mgf(rate, hi) <= 1


class TestValidation:
    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(SpecError):
            hyperexponential([0.5, 0.4], [1, 1], [1, 1], [1, 1], 1, 0)

    def test_tolerance_is_absolute_1e12(self):
        hyperexponential([0.5, 0.5 + 5e-13], [1, 1], [1, 1], [1, 1], 1, 0)
        with pytest.raises(SpecError):
            hyperexponential([0.5, 0.5 + 5e-12], [1, 1], [1, 1], [1, 1], 1, 0)

    def test_needs_a_class(self):
        with pytest.raises(SpecError):
            SystemSpec((), 1.0, 0.0)

    def test_beta_one_requires_decay(self):
        with pytest.raises(SpecError):
            hyperexponential([1], [1], [0.0], [1], 1, 1.0)
        hyperexponential([1], [1], [0.5], [1], 1, 1.0)

    @pytest.mark.parametrize("kwargs", [
        dict(probability=1.2, value=1, decay=1),
        dict(probability=1, value=-1, decay=1),
        dict(probability=1, value=1, decay=-0.1),
    ])
    def test_class_fields(self, kwargs):
        with pytest.raises(SpecError):
            ClassSpec(service=Exponential(1.0), **kwargs)

    def test_distributions(self):
        with pytest.raises(SpecError):
            Exponential(0.0)
        with pytest.raises(SpecError):
            Deterministic(-1.0)
        Deterministic(0.0)

    @pytest.mark.parametrize("rate", [0.0, -1.0, math.nan])
    def test_arrival_rate(self, rate):
        with pytest.raises(SpecError):
            hyperexponential([1], [1], [1], [1], rate, 0)

    def test_beta_range(self):
        with pytest.raises(SpecError):
            hyperexponential([1], [1], [1], [1], 1, 1.5)

    def test_generate_at_will_flag(self):
        assert hyperexponential([1], [1], [1], [1], math.inf, 0).generate_at_will
        assert not hyperexponential([1], [1], [1], [1], 1e9, 0).generate_at_will

    def test_frozen(self):
        spec = hyperexponential([1], [1], [1], [1], 1, 0)
        with pytest.raises(AttributeError):
            spec.beta = 0.3
