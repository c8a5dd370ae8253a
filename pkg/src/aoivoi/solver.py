"""Dinkelbach root search for the optimal threshold policy and beta sweeps.

``p(theta)`` is continuous and strictly decreasing (its slope is ``-E[T]`` at
the theta-policy), so its unique root is bracketed and bisected.  The root
equals the optimal weighted objective ``(1-beta) AoI - beta VoI``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .analytic import epoch_expectations, evaluate_theta
from .model import SystemSpec, mixture_moments
from .policy import ThresholdPolicy, zero_wait_policy

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200
_MAX_EXPANSIONS = 64
_MONOTONE_RTOL = 1e-9


class SolverError(RuntimeError):
    pass


class NoBracket(SolverError):
    """No sign change of p(theta) could be found."""


class NotConverged(SolverError):
    """Bisection ran out of iterations before reaching the tolerance."""


class FrontierError(SolverError):
    """A frontier violated its monotonicity invariants."""


@dataclass(frozen=True)
class PolicySolution:
    theta: float
    policy: ThresholdPolicy
    aoi: float
    voi: float
    objective: float
    residual: float
    iterations: int
    epoch_length: float

    @property
    def ybar(self) -> tuple:
        return self.policy.ybar


@dataclass(frozen=True)
class FrontierPoint:
    beta: float
    theta: float
    aoi: float
    voi: float
    ybar: tuple


def default_beta_grid(count: int = 41, stop: float = 0.999) -> list:
    return [float(b) for b in np.linspace(0.0, stop, count)]


def _initial_bracket(spec: SystemSpec, moments):
    # objective >= -beta * max(nu) > -max(nu) - 1, so p is positive there
    lo = -max(c.value for c in spec.classes) - 1.0
    zw = epoch_expectations(zero_wait_policy(spec), spec, moments)
    hi = (1.0 - spec.beta) * zw.aoi - spec.beta * zw.voi
    return lo, hi


def solve(spec: SystemSpec, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> PolicySolution:
    """Find ``theta*`` with ``|p(theta*)| <= tol * E[T]`` by bracketed bisection.

    Raises
    ------
    NoBracket
        If bracket expansion fails to find a sign change.
    NotConverged
        If ``max_iter`` bisection steps do not reach the tolerance.
    """
    moments = mixture_moments(spec)

    def f(theta):
        return evaluate_theta(theta, spec, moments)

    lo, hi = _initial_bracket(spec, moments)
    p_lo, _, _ = f(lo)
    step = max(1.0, abs(lo))
    for _ in range(_MAX_EXPANSIONS):
        if p_lo > 0:
            break
        lo -= step
        step *= 2.0
        p_lo, _, _ = f(lo)
    else:
        raise NoBracket(f"p(theta) stayed non-positive down to theta={lo!r}")

    step = max(1.0, abs(hi))
    p_hi, _, _ = f(hi)
    for _ in range(_MAX_EXPANSIONS):
        if p_hi < 0:
            break
        hi += step
        step *= 2.0
        p_hi, _, _ = f(hi)
    else:
        raise NoBracket(f"p(theta) stayed non-negative up to theta={hi!r}")

    best = None
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        p, policy, e = f(mid)
        if e is not None and (best is None or abs(p) / e.ET < best[0]):
            best = (abs(p) / e.ET, mid, p, policy, e, it)
        if e is not None and abs(p) <= tol * e.ET:
            return _package(spec, mid, p, policy, e, it)
        if p > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4.0 * np.finfo(float).eps * max(1.0, abs(mid)):
            # the bracket has collapsed to adjacent floats
            if best is not None and best[0] <= tol:
                _, theta, p, policy, e, _ = best
                return _package(spec, theta, p, policy, e, it)
            raise NotConverged(
                f"bracket collapsed at theta={mid!r} with |p|/E[T]={best[0] if best else math.inf!r} > tol={tol!r}"
            )
    raise NotConverged(f"no convergence within {max_iter} bisection steps (bracket [{lo!r}, {hi!r}])")


def _package(spec, theta, p, policy, e, iterations) -> PolicySolution:
    objective = (1.0 - spec.beta) * e.aoi - spec.beta * e.voi
    if abs(objective - theta) > 1e-8 * max(1.0, abs(theta)):
        raise SolverError(f"objective {objective!r} differs from theta* {theta!r}")
    return PolicySolution(
        theta=theta,
        policy=policy,
        aoi=e.aoi,
        voi=e.voi,
        objective=objective,
        residual=abs(p),
        iterations=iterations,
        epoch_length=e.ET,
    )


def frontier(
    spec: SystemSpec,
    beta_grid: Sequence[float],
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> list:
    """Solve at every ``beta`` of ``beta_grid`` (the beta stored on ``spec`` is ignored)."""
    grid = [float(b) for b in beta_grid]
    if not grid:
        raise ValueError("beta grid is empty")
    if any(not 0.0 <= b <= 1.0 for b in grid):
        raise ValueError("beta grid values must lie in [0, 1]")
    if any(b2 < b1 for b1, b2 in zip(grid, grid[1:])):
        raise ValueError("beta grid must be sorted ascending")
    points = []
    for b in grid:
        sol = solve(spec.with_beta(b), tol=tol, max_iter=max_iter)
        points.append(FrontierPoint(beta=b, theta=sol.theta, aoi=sol.aoi, voi=sol.voi, ybar=sol.ybar))
    _check_monotone(points)
    return points


def _check_monotone(points) -> None:
    for a, b in zip(points, points[1:]):
        if b.aoi < a.aoi - _MONOTONE_RTOL * max(1.0, abs(a.aoi)):
            raise FrontierError(f"AoI decreased from beta={a.beta} to beta={b.beta}: {a.aoi} -> {b.aoi}")
        if b.voi < a.voi - _MONOTONE_RTOL * max(1.0, abs(a.voi)):
            raise FrontierError(f"VoI decreased from beta={a.beta} to beta={b.beta}: {a.voi} -> {b.voi}")


def dominates(better: Sequence[FrontierPoint], worse: Sequence[FrontierPoint], rtol: float = 1e-9) -> bool:
    """True if ``better`` achieves an objective no larger than ``worse`` at every shared beta.

    Equal theta* at every weight means the lower-left (AoI, -VoI) boundary of
    ``better`` lies on or below that of ``worse``.
    """
    if [p.beta for p in better] != [p.beta for p in worse]:
        raise ValueError("frontiers must share the same beta grid")
    return all(b.theta <= w.theta + rtol * max(1.0, abs(w.theta)) for b, w in zip(better, worse))
