import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from aoivoi.model import ClassSpec, Exponential, hyperexponential, mixture_moments
from aoivoi.policy import (
    DomainError,
    ThresholdPolicy,
    controlled_wait,
    h,
    h_inverse,
    min_interupdate_time,
    tau_threshold,
    threshold_policy,
    value_decay_factor,
)

from helpers import fig3, random_spec


def cls(decay=1.0, rate=1.0, value=1.0):
    return ClassSpec(1.0, value, decay, Exponential(rate))


def bisect_inverse(c, tau, beta, phi):
    """Independent oracle: plain bisection on h."""
    lo, hi = 0.0, 1.0
    while h(c, hi, beta, phi) < tau:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h(c, mid, beta, phi) < tau:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestValueDecayFactor:
    def test_no_decay_generate_at_will(self):
        spec = hyperexponential([1], [5], [0.0], [1], math.inf, 0)
        assert value_decay_factor(spec.classes[0], math.inf, "per_class", spec) == 5.0
        assert value_decay_factor(spec.classes[0], math.inf, "mixture", spec) == 5.0

    def test_fig3_class1_per_class(self):
        spec = fig3(10)
        phi = value_decay_factor(spec.classes[0], 10, "per_class", spec)
        assert phi == pytest.approx(100 * (10 / 10.1) * 0.5, rel=1e-14)
        assert phi == pytest.approx(49.50495, abs=1e-5)

    def test_fig3_class1_mixture(self):
        spec = fig3(10)
        phi = value_decay_factor(spec.classes[0], 10, "mixture", spec)
        assert phi == pytest.approx(100 * (10 / 10.1) * (0.5 * 0.5 + 0.5 / 1.1), rel=1e-14)

    def test_variants_agree_for_single_class(self):
        spec = hyperexponential([1], [3], [0.4], [0.7], 2, 0.5)
        c = spec.classes[0]
        assert value_decay_factor(c, 2, "mixture", spec) == value_decay_factor(c, 2, "per_class", spec)

    def test_range(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            spec = random_spec(rng)
            for c in spec.classes:
                for v in ("mixture", "per_class"):
                    assert 0 <= value_decay_factor(c, spec.arrival_rate, v, spec) <= c.value


class TestTau:
    def test_cancellation(self):
        m = mixture_moments(hyperexponential([1], [1], [1], [1], 1, 0))
        assert tau_threshold(m.EZ, 0.0, m) == 0.0
        assert tau_threshold(2.0, 0.0, m) == 0.0
        assert tau_threshold(0.0, 1.0, m) == 0.0


class TestH:
    def test_at_zero(self):
        assert h(cls(0.5), 0.0, 0.3, 3.0) == pytest.approx(-0.9)

    def test_beta_zero_identity(self):
        for t in (0.0, 0.7, 12.0):
            assert h(cls(0.5), t, 0.0, 3.0) == t

    def test_value(self):
        assert h(cls(1.0), 1.0, 0.5, 2.0) == pytest.approx(0.5 - math.exp(-1.0), rel=1e-15)
        assert h(cls(1.0), 1.0, 0.5, 2.0) == pytest.approx(0.132121, abs=1e-6)

    @given(
        beta=st.floats(0, 1),
        phi=st.floats(0.01, 100),
        alpha=st.floats(0.01, 5),
        t1=st.floats(0, 50),
        dt=st.floats(1e-3, 10),
    )
    def test_strictly_increasing(self, beta, phi, alpha, t1, dt):
        c = cls(alpha)
        assume(beta < 1 or alpha * (t1 + dt) < 30)
        assert h(c, t1 + dt, beta, phi) > h(c, t1, beta, phi)


class TestHInverse:
    def test_beta_zero(self):
        assert h_inverse(cls(), 3.7, 0.0, 1.0) == 3.7

    def test_beta_one_at_minimum(self):
        assert h_inverse(cls(0.5), -3.0, 1.0, 3.0) == 0.0

    def test_round_trip_example(self):
        c = cls(1.0)
        tau = h(c, 1.0, 0.5, 2.0)
        assert h_inverse(c, tau, 0.5, 2.0) == pytest.approx(1.0, abs=1e-9)
        assert h_inverse(c, tau, 0.5, 2.0) == pytest.approx(bisect_inverse(c, tau, 0.5, 2.0), rel=1e-12)

    def test_no_decay_linear(self):
        c = cls(0.0)
        assert h_inverse(c, 1.0, 0.5, 2.0) == pytest.approx((1.0 + 1.0) / 0.5)

    def test_beta_one_closed_form(self):
        c = cls(0.5)
        assert h_inverse(c, -1.0, 1.0, 3.0) == pytest.approx(math.log(3.0) / 0.5)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            h_inverse(cls(1.0), -2.0, 0.5, 2.0)
        with pytest.raises(DomainError):
            h_inverse(cls(1.0), 0.0, 1.0, 2.0)

    @given(
        beta=st.floats(0, 1),
        phi=st.floats(0, 200),
        alpha=st.floats(0, 5),
        u=st.floats(0, 1),
        span=st.floats(0, 100),
    )
    def test_round_trip(self, beta, phi, alpha, u, span):
        c = cls(alpha)
        lo = -beta * phi
        if beta == 1.0:
            assume(alpha > 0 and phi > 0)
            tau = lo * (1 - u)
            assume(tau < 0)
        else:
            tau = lo + u * (span + beta * phi)
        t = h_inverse(c, tau, beta, phi)
        assert t >= 0
        scale = max(abs(tau), beta * phi, 1e-300)
        assert abs(h(c, t, beta, phi) - tau) <= 1e-9 * scale

    def test_matches_bisection_oracle(self):
        rng = np.random.default_rng(8)
        for _ in range(300):
            beta = rng.uniform(0.01, 0.99)
            phi = rng.uniform(0.1, 100)
            c = cls(rng.uniform(0.01, 3))
            tau = -beta * phi + rng.uniform(0, 50)
            assert h_inverse(c, tau, beta, phi) == pytest.approx(bisect_inverse(c, tau, beta, phi), rel=1e-11, abs=1e-12)


class TestMinInterupdateTime:
    def setup_method(self):
        self.spec = hyperexponential([0.5, 0.5], [10, 1], [0.3, 1], [0.5, 2], 2, 0.0)
        self.m = mixture_moments(self.spec)

    def test_beta_zero_at_EZ(self):
        for c in self.spec.classes:
            assert min_interupdate_time(c, self.m.EZ, 0.0, 5.0, self.m) == 0.0

    def test_beta_zero_shift(self):
        for c in self.spec.classes:
            assert min_interupdate_time(c, self.m.EZ + 1, 0.0, 5.0, self.m) == pytest.approx(1.0, rel=1e-15)

    def test_boundary_of_case_split(self):
        beta, phi = 0.4, 2.5
        theta = -beta * phi + (1 - beta) * self.m.EZ
        assert tau_threshold(theta, beta, self.m) == pytest.approx(-beta * phi)
        assert min_interupdate_time(self.spec.classes[0], theta, beta, phi, self.m) == pytest.approx(0.0, abs=1e-12)

    def test_below_threshold_is_zero(self):
        assert min_interupdate_time(self.spec.classes[0], -100.0, 0.4, 2.5, self.m) == 0.0

    def test_beta_one_degenerate_is_infinite(self):
        assert min_interupdate_time(self.spec.classes[0], 0.0, 1.0, 2.5, self.m) == math.inf

    def test_nondecreasing_in_theta(self):
        rng = np.random.default_rng(21)
        for _ in range(30):
            spec = random_spec(rng)
            m = mixture_moments(spec)
            thetas = np.linspace(-110, 60, 100)
            ys = np.array([threshold_policy(spec, t, m).ybar for t in thetas])
            finite = np.isfinite(ys)
            assert finite.all()
            assert np.all(np.diff(ys, axis=0) >= -1e-12 * np.maximum(1, ys[1:]))

    def test_nondecreasing_in_phi(self):
        rng = np.random.default_rng(22)
        for _ in range(200):
            beta = rng.uniform(0, 0.99)
            c = cls(rng.uniform(0, 2))
            theta = rng.uniform(-50, 50)
            phis = np.sort(rng.uniform(0, 100, 20))
            ys = [min_interupdate_time(c, theta, beta, f, self.m) for f in phis]
            assert all(b >= a - 1e-12 * max(1, a) for a, b in zip(ys, ys[1:]))

    def test_beta_zero_collapse(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            spec = random_spec(rng, min_classes=2, beta=0.0)
            m = mixture_moments(spec)
            theta = rng.uniform(-5, 30)
            policy = threshold_policy(spec, theta, m)
            assert len(set(policy.ybar)) == 1
            assert policy.ybar[0] == max(theta - m.EZ, 0.0)


class TestControlledWait:
    def policy(self, ybar):
        return ThresholdPolicy(ybar=(ybar,), theta=0.0, beta=0.0, phi=(1.0,))

    def test_examples(self):
        assert controlled_wait(0, 3.0, self.policy(2.0)) == 0.0
        assert controlled_wait(0, 0.5, self.policy(2.0)) == 1.5
        assert controlled_wait(0, 0.0, self.policy(0.0)) == 0.0
        assert controlled_wait(0, 7.0, self.policy(0.0)) == 0.0

    def test_rejects_infinite(self):
        with pytest.raises(ValueError):
            controlled_wait(0, 1.0, self.policy(math.inf))
