"""Update classes, system description and the moments/MGFs of the delay variables.

An update system is a list of classes, a Poisson sample arrival rate and the
AoI/VoI weight.  ``arrival_rate = math.inf`` selects the generate-at-will
limit, in which the uncontrolled wait after every controlled wait is zero.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

PROBABILITY_ATOL = 1e-12

PHI_VARIANTS = ("mixture", "per_class")


class SpecError(ValueError):
    """Raised for an invalid class or system description."""


@dataclass(frozen=True)
class Exponential:
    """Exponential service with ``rate`` (1/time)."""

    rate: float

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise SpecError(f"exponential rate must be positive and finite, got {self.rate!r}")

    @property
    def mean(self) -> float:
        return 1.0 / self.rate

    @property
    def second_moment(self) -> float:
        return 2.0 / self.rate**2

    def mgf(self, s: float) -> float:
        return self.rate / (self.rate - s)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.standard_exponential(size) / self.rate


@dataclass(frozen=True)
class Deterministic:
    """Constant service ``duration`` (time)."""

    duration: float

    def __post_init__(self):
        if not (self.duration >= 0 and math.isfinite(self.duration)):
            raise SpecError(
                f"deterministic duration must be non-negative and finite, got {self.duration!r}"
            )

    @property
    def mean(self) -> float:
        return self.duration

    @property
    def second_moment(self) -> float:
        return self.duration**2

    def mgf(self, s: float) -> float:
        return math.exp(s * self.duration)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, self.duration)


ServiceDistribution = Union[Exponential, Deterministic]


@dataclass(frozen=True)
class ClassSpec:
    """One update class.

    Attributes
    ----------
    probability : float
        Probability that an admitted sample belongs to this class.
    value : float
        Initial value ``nu`` of a delivered update of this class.
    decay : float
        Exponential value decay rate ``alpha`` (1/time); zero means the value
        stays fixed at ``nu``.
    service : Exponential or Deterministic
        Processing time distribution.
    """

    probability: float
    value: float
    decay: float
    service: ServiceDistribution

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise SpecError(f"class probability must lie in [0, 1], got {self.probability!r}")
        if not (self.value >= 0 and math.isfinite(self.value)):
            raise SpecError(f"class value must be non-negative and finite, got {self.value!r}")
        if not (self.decay >= 0 and math.isfinite(self.decay)):
            raise SpecError(f"decay rate must be non-negative and finite, got {self.decay!r}")
        if not isinstance(self.service, (Exponential, Deterministic)):
            raise SpecError(f"unsupported service distribution {self.service!r}")


@dataclass(frozen=True)
class SystemSpec:
    """The complete update system.

    ``phi_variant`` picks which service MGF enters the value decay factor:
    ``"mixture"`` uses the MGF of the next (unknown class) service time,
    ``"per_class"`` uses the prior update's own class MGF.
    """

    classes: tuple
    arrival_rate: float
    beta: float
    phi_variant: str = "mixture"

    def __post_init__(self):
        object.__setattr__(self, "classes", tuple(self.classes))
        if not self.classes:
            raise SpecError("at least one class is required")
        for c in self.classes:
            if not isinstance(c, ClassSpec):
                raise SpecError(f"expected ClassSpec, got {type(c).__name__}")
        total = math.fsum(c.probability for c in self.classes)
        if abs(total - 1.0) > PROBABILITY_ATOL:
            raise SpecError(f"class probabilities sum to {total!r}, not 1")
        if not self.arrival_rate > 0 or math.isnan(self.arrival_rate):
            raise SpecError(f"arrival rate must be in (0, inf], got {self.arrival_rate!r}")
        if not 0.0 <= self.beta <= 1.0:
            raise SpecError(f"beta must lie in [0, 1], got {self.beta!r}")
        if self.beta == 1.0 and any(c.decay == 0 for c in self.classes):
            raise SpecError("beta = 1 requires every class to have a positive decay rate")
        if not math.fsum(c.probability * c.service.mean for c in self.classes) > 0:
            raise SpecError("mean service time must be positive")
        if self.phi_variant not in PHI_VARIANTS:
            raise SpecError(f"phi_variant must be one of {PHI_VARIANTS}, got {self.phi_variant!r}")

    @property
    def generate_at_will(self) -> bool:
        return math.isinf(self.arrival_rate)

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([c.probability for c in self.classes])

    def with_beta(self, beta: float) -> "SystemSpec":
        return dataclasses.replace(self, beta=beta)

    def with_variant(self, phi_variant: str) -> "SystemSpec":
        return dataclasses.replace(self, phi_variant=phi_variant)


@dataclass(frozen=True)
class MomentSet:
    """First two moments of the service time Y and of Z = X + Y."""

    EY: float
    EY2: float
    EZ: float
    EZ2: float


def service_mgf(cls: ClassSpec, s: float) -> float:
    """E[exp(s * Y_i)] for the service time of ``cls``; only ``s <= 0`` is supported."""
    if s > 0:
        raise ValueError(f"service MGF is only supported for s <= 0, got {s!r}")
    return cls.service.mgf(s)


def arrival_mgf(rate: float, s: float) -> float:
    """MGF of the exponential(``rate``) uncontrolled wait; 1 for generate-at-will."""
    if s > 0:
        raise ValueError(f"arrival MGF is only supported for s <= 0, got {s!r}")
    if math.isinf(rate):
        return 1.0
    return rate / (rate - s)


def mixture_moments(spec: SystemSpec) -> MomentSet:
    p = [c.probability for c in spec.classes]
    ey = math.fsum(pi * c.service.mean for pi, c in zip(p, spec.classes))
    ey2 = math.fsum(pi * c.service.second_moment for pi, c in zip(p, spec.classes))
    if spec.generate_at_will:
        return MomentSet(EY=ey, EY2=ey2, EZ=ey, EZ2=ey2)
    lam = spec.arrival_rate
    return MomentSet(
        EY=ey,
        EY2=ey2,
        EZ=1.0 / lam + ey,
        EZ2=2.0 / lam**2 + 2.0 * ey / lam + ey2,
    )


def mixture_mgf(spec: SystemSpec, s: float) -> float:
    """MGF of the class-mixture service time Y."""
    return math.fsum(c.probability * service_mgf(c, s) for c in spec.classes)


def make_spec(
    probabilities: Sequence[float],
    values: Sequence[float],
    decays: Sequence[float],
    services: Sequence[ServiceDistribution],
    arrival_rate: float,
    beta: float,
    phi_variant: str = "mixture",
) -> SystemSpec:
    """Build a SystemSpec from parallel per-class sequences."""
    n = len(probabilities)
    if not (len(values) == len(decays) == len(services) == n):
        raise SpecError("per-class sequences must have equal length")
    classes = [
        ClassSpec(float(p), float(v), float(a), s)
        for p, v, a, s in zip(probabilities, values, decays, services)
    ]
    return SystemSpec(tuple(classes), float(arrival_rate), float(beta), phi_variant)


def hyperexponential(
    probabilities: Sequence[float],
    values: Sequence[float],
    decays: Sequence[float],
    rates: Sequence[float],
    arrival_rate: float,
    beta: float,
    phi_variant: str = "mixture",
) -> SystemSpec:
    """Shorthand for a system whose classes all have exponential service."""
    return make_spec(
        probabilities, values, decays, [Exponential(float(r)) for r in rates],
        arrival_rate, beta, phi_variant,
    )
