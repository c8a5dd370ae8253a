"""Class-dependent threshold waiting policies.

For a Dinkelbach parameter ``theta`` every class ``i`` gets a minimum
inter-update time ``ybar_i``: after delivering a class-``i`` update whose
service took ``y``, the server blocks arrivals for ``[ybar_i - y]^+``.
``ybar_i`` inverts the increasing threshold function

    h_i(t) = (1 - beta) t - beta phi_i exp(-alpha_i t)

at the common threshold ``tau(theta) = theta - (1 - beta) E[Z]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import (
    ClassSpec,
    MomentSet,
    SystemSpec,
    arrival_mgf,
    mixture_mgf,
    mixture_moments,
    service_mgf,
)

_NEWTON_RTOL = 1e-12
_NEWTON_MAXITER = 200


class DomainError(ValueError):
    """The threshold function has no finite inverse at the requested level."""


@dataclass(frozen=True)
class ThresholdPolicy:
    """Per-class minimum inter-update times and the parameters that produced them.

    ``ybar`` entries may be ``inf`` (pure VoI weight with a non-negative
    threshold); such a policy cannot be evaluated or simulated.
    """

    ybar: tuple
    theta: float
    beta: float
    phi: tuple
    phi_variant: str = "mixture"

    @property
    def finite(self) -> bool:
        return all(math.isfinite(y) for y in self.ybar)

    def require_finite(self) -> None:
        if not self.finite:
            raise ValueError(f"policy has an infinite threshold: ybar={self.ybar}")


def value_decay_factor(cls: ClassSpec, rate: float, variant: str, spec: SystemSpec) -> float:
    """nu_i * Phi_X(-alpha_i) * Phi(-alpha_i), the value surviving one uncontrolled wait and service.

    The last factor is the class's own service MGF for ``variant="per_class"``
    and the class-mixture service MGF for ``variant="mixture"``.
    """
    s = -cls.decay
    if variant == "per_class":
        service_part = service_mgf(cls, s)
    elif variant == "mixture":
        service_part = mixture_mgf(spec, s)
    else:
        raise ValueError(f"unknown phi variant {variant!r}")
    return cls.value * arrival_mgf(rate, s) * service_part


def decay_factors(spec: SystemSpec, variant: str | None = None) -> tuple:
    variant = spec.phi_variant if variant is None else variant
    return tuple(value_decay_factor(c, spec.arrival_rate, variant, spec) for c in spec.classes)


def tau_threshold(theta: float, beta: float, moments: MomentSet) -> float:
    return theta - (1.0 - beta) * moments.EZ


def h(cls: ClassSpec, t: float, beta: float, phi: float) -> float:
    """Threshold function of ``cls`` at time ``t >= 0``."""
    return (1.0 - beta) * t - beta * phi * math.exp(-cls.decay * t)


def _h_prime(alpha: float, t: float, beta: float, phi: float) -> float:
    return (1.0 - beta) + beta * phi * alpha * math.exp(-alpha * t)


def h_inverse(cls: ClassSpec, tau: float, beta: float, phi: float) -> float:
    """The unique ``t >= 0`` with ``h(cls, t, beta, phi) == tau``.

    Raises
    ------
    DomainError
        If ``tau < -beta * phi`` (below h(0)) or, for ``beta == 1``, if
        ``tau >= 0`` (h never reaches it).
    """
    alpha = cls.decay
    bphi = beta * phi
    if tau < -bphi:
        raise DomainError(f"tau={tau!r} is below h(0)={-bphi!r}")
    if beta == 0.0:
        return tau
    if beta == 1.0:
        if tau >= 0.0:
            raise DomainError("with beta = 1 the threshold function never reaches tau >= 0")
        if alpha == 0.0:
            raise DomainError("with beta = 1 and zero decay the threshold function is constant")
        return max(-math.log(-tau / phi) / alpha, 0.0)
    bbar = 1.0 - beta
    if alpha == 0.0 or bphi == 0.0:
        return (tau + bphi) / bbar
    if tau == -bphi:
        return 0.0

    # bbar*t - bphi <= h(t) <= bbar*t brackets the root
    lo = max(tau / bbar, 0.0)
    hi = (tau + bphi) / bbar
    t = lo
    for _ in range(_NEWTON_MAXITER):
        f = h(cls, t, beta, phi) - tau
        if f == 0.0:
            return t
        if f < 0.0:
            lo = t
        else:
            hi = t
        step = f / _h_prime(alpha, t, beta, phi)
        t_new = t - step
        if not lo <= t_new <= hi:
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) <= _NEWTON_RTOL * max(abs(t_new), 1e-300) or hi - lo <= _NEWTON_RTOL * hi:
            return t_new
        t = t_new
    return t


def min_interupdate_time(
    cls: ClassSpec, theta: float, beta: float, phi: float, moments: MomentSet
) -> float:
    """``ybar_i(theta)``; 0 below h(0) and ``inf`` where no finite inverse exists."""
    tau = tau_threshold(theta, beta, moments)
    if tau < -beta * phi:
        return 0.0
    if beta == 1.0 and tau >= 0.0:
        return math.inf
    return h_inverse(cls, tau, beta, phi)


def threshold_policy(spec: SystemSpec, theta: float, moments: MomentSet | None = None) -> ThresholdPolicy:
    """The theta-policy of ``spec`` using the phi variant stored on ``spec``."""
    moments = mixture_moments(spec) if moments is None else moments
    phi = decay_factors(spec)
    ybar = tuple(
        min_interupdate_time(c, theta, spec.beta, f, moments) for c, f in zip(spec.classes, phi)
    )
    return ThresholdPolicy(ybar=ybar, theta=theta, beta=spec.beta, phi=phi, phi_variant=spec.phi_variant)


def zero_wait_policy(spec: SystemSpec) -> ThresholdPolicy:
    """Admit the first arrival after every delivery."""
    return ThresholdPolicy(
        ybar=(0.0,) * spec.num_classes,
        theta=math.nan,
        beta=spec.beta,
        phi=decay_factors(spec),
        phi_variant=spec.phi_variant,
    )


def fixed_policy(spec: SystemSpec, ybar) -> ThresholdPolicy:
    """A threshold policy with user-chosen ``ybar`` values."""
    ybar = tuple(float(y) for y in ybar)
    if len(ybar) != spec.num_classes:
        raise ValueError(f"expected {spec.num_classes} thresholds, got {len(ybar)}")
    if any(y < 0 for y in ybar):
        raise ValueError("thresholds must be non-negative")
    return ThresholdPolicy(
        ybar=ybar, theta=math.nan, beta=spec.beta, phi=decay_factors(spec), phi_variant=spec.phi_variant
    )


def controlled_wait(i: int, y: float, policy: ThresholdPolicy) -> float:
    """Blocking time after a class-``i`` update whose service took ``y``."""
    ybar = policy.ybar[i]
    if math.isinf(ybar):
        raise ValueError(f"class {i} has an infinite threshold")
    return max(ybar - y, 0.0)
