"""Closed-form epoch expectations for a threshold policy.

Over one epoch (delivery to delivery) the accumulated age ``A``, accumulated
value ``V`` and duration ``T`` have expectations that depend on the policy only
through the per-class wait moments E[W_i], E[W_i^2] and the MGF of
``max(ybar_i, Y_i)``.  Long-run AoI and VoI are E[A]/E[T] and E[V]/E[T].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import ClassSpec, Deterministic, MomentSet, SystemSpec, mixture_moments, service_mgf
from .policy import ThresholdPolicy, decay_factors, threshold_policy

_SERIES_CUTOFF = 1.0


@dataclass(frozen=True)
class EpochExpectations:
    EA: float
    EV: float
    ET: float
    EW: tuple
    EW2: tuple
    max_mgf: tuple

    @property
    def aoi(self) -> float:
        return self.EA / self.ET

    @property
    def voi(self) -> float:
        return self.EV / self.ET


def _exp_tail(x: float, k: int) -> float:
    """(-1)^(k+1) * sum_{n>k} (-x)^n / n!, which is positive for x > 0."""
    term = x**k / math.factorial(k)
    total = 0.0
    n = k
    sign = 1.0
    while True:
        n += 1
        term *= x / n
        total += sign * term
        sign = -sign
        if term <= 1e-17 * abs(total):
            return total


def wait_moments(cls: ClassSpec, ybar: float) -> tuple:
    """(E[W], E[W^2]) of the controlled wait ``[ybar - Y]^+`` for a class-``cls`` update."""
    if not (ybar >= 0 and math.isfinite(ybar)):
        raise ValueError(f"threshold must be finite and non-negative, got {ybar!r}")
    service = cls.service
    if isinstance(service, Deterministic):
        ew = max(ybar - service.duration, 0.0)
        return ew, ew * ew
    mu = service.rate
    x = mu * ybar
    if x < _SERIES_CUTOFF:
        # ybar - 1/mu + exp(-x)/mu and ybar^2 - 2 E[W]/mu cancel badly for small x
        ew = _exp_tail(x, 1) / mu
        ew2 = 2.0 * _exp_tail(x, 2) / mu**2
    else:
        ew = ybar - 1.0 / mu + math.exp(-x) / mu
        ew2 = ybar * ybar - 2.0 * ew / mu
    return ew, ew2


def max_mgf(cls: ClassSpec, ybar: float, s: float) -> float:
    """E[exp(s * max(ybar, Y))], the MGF of service plus controlled wait."""
    if s > 0:
        raise ValueError(f"only s <= 0 is supported, got {s!r}")
    if ybar < 0:
        raise ValueError(f"threshold must be non-negative, got {ybar!r}")
    service = cls.service
    if isinstance(service, Deterministic):
        return math.exp(s * max(ybar, service.duration))
    mu = service.rate
    return math.exp(s * ybar) * -math.expm1(-mu * ybar) + mu / (mu - s) * math.exp(-(mu - s) * ybar)


def epoch_expectations(policy: ThresholdPolicy, spec: SystemSpec, moments: MomentSet | None = None) -> EpochExpectations:
    """E[A], E[V], E[T] and their per-class ingredients.

    The value decay factors are taken from ``spec.phi_variant``, so one policy
    can be evaluated under either variant.
    """
    policy.require_finite()
    moments = mixture_moments(spec) if moments is None else moments
    phi = decay_factors(spec)
    ew, ew2, mgfs = [], [], []
    age_terms, value_terms, wait_terms = [], [], []
    for cls, ybar, f in zip(spec.classes, policy.ybar, phi):
        w1, w2 = wait_moments(cls, ybar)
        ew.append(w1)
        ew2.append(w2)
        p = cls.probability
        age_terms.append(p * ((ybar + moments.EZ) * w1 - 0.5 * w2))
        wait_terms.append(p * w1)
        a = cls.decay
        m = max_mgf(cls, ybar, -a)
        mgfs.append(m)
        if a == 0.0:
            value_terms.append(p * cls.value * (w1 + moments.EZ))
        else:
            value_terms.append(p / a * (cls.value * service_mgf(cls, -a) - f * m))
    EA = math.fsum(age_terms) + moments.EY * moments.EZ + 0.5 * moments.EZ2
    EV = math.fsum(value_terms)
    ET = math.fsum(wait_terms) + moments.EZ
    return EpochExpectations(EA=EA, EV=EV, ET=ET, EW=tuple(ew), EW2=tuple(ew2), max_mgf=tuple(mgfs))


def expected_age(policy: ThresholdPolicy, spec: SystemSpec, moments: MomentSet | None = None) -> float:
    return epoch_expectations(policy, spec, moments).EA


def expected_value(policy: ThresholdPolicy, spec: SystemSpec) -> float:
    return epoch_expectations(policy, spec).EV


def expected_epoch(policy: ThresholdPolicy, spec: SystemSpec, moments: MomentSet | None = None) -> float:
    return epoch_expectations(policy, spec, moments).ET


def metrics(policy: ThresholdPolicy, spec: SystemSpec) -> tuple:
    """(AoI, VoI) of ``policy``."""
    e = epoch_expectations(policy, spec)
    return e.aoi, e.voi


def evaluate_theta(theta: float, spec: SystemSpec, moments: MomentSet | None = None):
    """Return ``(p(theta), policy, expectations)``.

    With ``beta = 1`` and ``tau(theta) >= 0`` the theta-policy waits forever;
    the auxiliary objective then diverges to ``-inf`` (or stays negative at
    ``theta = 0``) and ``(-inf, policy, None)`` is returned.
    """
    moments = mixture_moments(spec) if moments is None else moments
    policy = threshold_policy(spec, theta, moments)
    if not policy.finite:
        return -math.inf, policy, None
    e = epoch_expectations(policy, spec, moments)
    beta = spec.beta
    p = (1.0 - beta) * e.EA - beta * e.EV - theta * e.ET
    return p, policy, e


def dinkelbach_objective(theta: float, spec: SystemSpec) -> float:
    """p(theta) = (1-beta) E[A] - beta E[V] - theta E[T] at the theta-policy."""
    return evaluate_theta(theta, spec)[0]
