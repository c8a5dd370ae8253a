"""Monte Carlo simulation of the M/G/1/1 blocking update system.

The fast path iterates the epoch recursion: after a delivery of class ``i``
with service ``Yp`` the server blocks for ``W' = [ybar_i - Yp]^+``, then admits
the first Poisson arrival (after an exponential gap ``X``) which is served for
``Y``.  Blocking during service needs no explicit simulation because the
Poisson gap after the blocking period is memoryless; :func:`simulate_explicit`
materializes every arrival to check that equivalence.

Estimates are renewal-reward ratios sum(A)/sum(T) and sum(V)/sum(T).  Epochs
share one service time with their neighbour, so standard errors use the delta
method with the lag-1 autocovariance included.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .analytic import epoch_expectations
from .model import Deterministic, SystemSpec
from .policy import ThresholdPolicy

DEFAULT_CHUNK = 1 << 18
Z_FAIL = 4.0


@dataclass(frozen=True)
class EpochRecord:
    prior_class: int
    prior_service: float
    controlled_wait: float
    exogenous_wait: float
    next_class: int
    next_service: float
    age_area: float
    value_area: float
    duration: float


@dataclass(frozen=True)
class SimResult:
    epochs: int
    seed: Optional[int]
    aoi: float
    aoi_se: float
    voi: float
    voi_se: float
    mean_age_area: float
    mean_age_area_se: float
    mean_value_area: float
    mean_value_area_se: float
    mean_epoch: float
    mean_epoch_se: float
    class_counts: tuple
    wait_mean: tuple
    wait_se: tuple
    discarded: Optional[int] = None
    records: Optional[tuple] = field(default=None, repr=False)


class _Accumulator:
    """Shifted sufficient statistics of the per-epoch vector (A, V, T).

    Sums are kept relative to ``shift`` (the first chunk mean) so the
    covariance estimates do not cancel catastrophically.  ``merge`` is
    associative and commutative up to floating-point rounding.
    """

    def __init__(self, num_classes: int):
        self.n = 0
        self.npairs = 0
        self.shift = None
        self.s1 = np.zeros(3)
        self.s2 = np.zeros((3, 3))
        self.lag = np.zeros((3, 3))
        # sums of the left and right members of the lag pairs
        self.head = np.zeros(3)
        self.tail = np.zeros(3)
        self.last = None
        self.class_counts = np.zeros(num_classes, dtype=np.int64)
        self.w_count = np.zeros(num_classes, dtype=np.int64)
        self.w_sum = np.zeros(num_classes)
        self.w_sq = np.zeros(num_classes)

    def add(self, q, prior_class, wait, next_class):
        if self.shift is None:
            self.shift = q.mean(axis=0)
        d = q - self.shift
        self.s1 += d.sum(axis=0)
        self.s2 += d.T @ d
        self.lag += d[:-1].T @ d[1:]
        self.head += d[:-1].sum(axis=0)
        self.tail += d[1:].sum(axis=0)
        self.npairs += len(d) - 1
        if self.last is not None:
            self.lag += np.outer(self.last, d[0])
            self.head += self.last
            self.tail += d[0]
            self.npairs += 1
        self.last = d[-1].copy()
        self.n += len(d)
        m = len(self.class_counts)
        self.class_counts += np.bincount(next_class, minlength=m)
        self.w_count += np.bincount(prior_class, minlength=m)
        self.w_sum += np.bincount(prior_class, weights=wait, minlength=m)
        self.w_sq += np.bincount(prior_class, weights=wait * wait, minlength=m)

    def merge(self, other: "_Accumulator") -> "_Accumulator":
        """Pool two independent runs; no cross-run lag pair is added."""
        if other.n == 0:
            return self
        if self.n == 0:
            return other
        delta = other.shift - self.shift
        out = _Accumulator(len(self.class_counts))
        out.shift = self.shift
        out.n = self.n + other.n
        out.npairs = self.npairs + other.npairs
        out.s1 = self.s1 + other.s1 + other.n * delta
        out.s2 = (self.s2 + other.s2 + np.outer(other.s1, delta) + np.outer(delta, other.s1)
                  + other.n * np.outer(delta, delta))
        out.lag = (self.lag + other.lag + np.outer(other.head, delta) + np.outer(delta, other.tail)
                   + other.npairs * np.outer(delta, delta))
        out.head = self.head + other.head + other.npairs * delta
        out.tail = self.tail + other.tail + other.npairs * delta
        out.last = None
        out.class_counts = self.class_counts + other.class_counts
        out.w_count = self.w_count + other.w_count
        out.w_sum = self.w_sum + other.w_sum
        out.w_sq = self.w_sq + other.w_sq
        return out

    def summary(self):
        n = self.n
        md = self.s1 / n
        mean = self.shift + md
        c0 = self.s2 / n - np.outer(md, md)
        if self.npairs > 0:
            # centre each lag pair on the overall mean, which keeps the result shift-invariant
            c1 = (self.lag - np.outer(self.head, md) - np.outer(md, self.tail)) / self.npairs + np.outer(md, md)
        else:
            c1 = np.zeros((3, 3))
        sigma = c0 + c1 + c1.T
        return mean, sigma


def _ratio_se(mean, sigma, num, den, n) -> float:
    g = np.zeros(3)
    g[num] = 1.0 / mean[den]
    g[den] = -mean[num] / mean[den] ** 2
    var = float(g @ sigma @ g) / n
    return math.sqrt(max(var, 0.0))


def _result(acc: _Accumulator, seed, discarded=None, records=None) -> SimResult:
    mean, sigma = acc.summary()
    n = acc.n
    se = np.sqrt(np.maximum(np.diag(sigma), 0.0) / n)
    A, V, T = mean
    with np.errstate(invalid="ignore", divide="ignore"):
        w_mean = acc.w_sum / acc.w_count
        w_var = acc.w_sq / acc.w_count - w_mean**2
        w_se = np.sqrt(np.maximum(w_var, 0.0) / np.maximum(acc.w_count - 1, 1))
    w_mean = np.where(acc.w_count > 0, w_mean, np.nan)
    w_se = np.where(acc.w_count > 0, w_se, np.nan)
    return SimResult(
        epochs=n,
        seed=seed,
        aoi=float(A / T),
        aoi_se=_ratio_se(mean, sigma, 0, 2, n),
        voi=float(V / T),
        voi_se=_ratio_se(mean, sigma, 1, 2, n),
        mean_age_area=float(A),
        mean_age_area_se=float(se[0]),
        mean_value_area=float(V),
        mean_value_area_se=float(se[1]),
        mean_epoch=float(T),
        mean_epoch_se=float(se[2]),
        class_counts=tuple(int(c) for c in acc.class_counts),
        wait_mean=tuple(float(w) for w in w_mean),
        wait_se=tuple(float(w) for w in w_se),
        discarded=discarded,
        records=records,
    )


class _ClassTable:
    """Per-class parameters as arrays for vectorized epoch evaluation."""

    def __init__(self, spec: SystemSpec, policy: ThresholdPolicy):
        classes = spec.classes
        self.m = len(classes)
        self.p = spec.probabilities
        self.det = np.array([isinstance(c.service, Deterministic) for c in classes])
        self.duration = np.array([c.service.duration if isinstance(c.service, Deterministic) else 0.0 for c in classes])
        self.inv_rate = np.array([0.0 if isinstance(c.service, Deterministic) else 1.0 / c.service.rate for c in classes])
        self.nu = np.array([c.value for c in classes])
        self.alpha = np.array([c.decay for c in classes])
        self.ybar = np.array(policy.ybar, dtype=float)

    def draw(self, rng: np.random.Generator, n: int):
        j = rng.choice(self.m, size=n, p=self.p)
        e = rng.standard_exponential(n)
        y = np.where(self.det[j], self.duration[j], e * self.inv_rate[j])
        return j, y

    def value_area(self, prior_class, prior_service, duration):
        nu = self.nu[prior_class]
        a = self.alpha[prior_class]
        decaying = a > 0
        a_safe = np.where(decaying, a, 1.0)
        v = nu / a_safe * np.exp(-a_safe * prior_service) * -np.expm1(-a_safe * duration)
        return np.where(decaying, v, nu * duration)

    def epoch(self, prior_class, prior_service, x, next_service):
        wait = np.maximum(self.ybar[prior_class] - prior_service, 0.0)
        t = wait + x + next_service
        a = prior_service * t + 0.5 * t * t
        v = self.value_area(prior_class, prior_service, t)
        return wait, a, v, t


def _check(policy: ThresholdPolicy, epochs: int) -> None:
    if epochs < 1:
        raise ValueError(f"epochs must be >= 1, got {epochs!r}")
    policy.require_finite()


def _records(i, yp, w, x, j, y, a, v, t) -> tuple:
    return tuple(
        EpochRecord(int(i[k]), float(yp[k]), float(w[k]), float(x[k]), int(j[k]), float(y[k]),
                    float(a[k]), float(v[k]), float(t[k]))
        for k in range(len(t))
    )


def _run(spec, policy, epochs, rng, record, chunk_size) -> _Accumulator:
    table = _ClassTable(spec, policy)
    acc = _Accumulator(table.m)
    rows = [] if record else None
    # warm-up: the update delivered at time zero, not scored
    prev_j, prev_y = table.draw(rng, 1)
    done = 0
    while done < epochs:
        n = min(chunk_size, epochs - done)
        j, y = table.draw(rng, n)
        if spec.generate_at_will:
            x = np.zeros(n)
        else:
            x = rng.standard_exponential(n) / spec.arrival_rate
        i = np.concatenate([prev_j, j[:-1]])
        yp = np.concatenate([prev_y, y[:-1]])
        w, a, v, t = table.epoch(i, yp, x, y)
        acc.add(np.column_stack([a, v, t]), i, w, j)
        if record:
            rows.extend(_records(i, yp, w, x, j, y, a, v, t))
        prev_j, prev_y = j[-1:], y[-1:]
        done += n
    acc.records = tuple(rows) if record else None
    return acc


def simulate(
    spec: SystemSpec,
    policy: ThresholdPolicy,
    epochs: int,
    seed: int,
    record: bool = False,
    chunk_size: int = DEFAULT_CHUNK,
) -> SimResult:
    """Simulate ``epochs`` scored epochs of ``policy`` on ``spec``.

    Parameters
    ----------
    spec, policy
        System and a threshold policy with finite thresholds.
    epochs : int
        Number of scored epochs (a single warm-up epoch is drawn first).
    seed : int
        Seed of the PCG64 generator; identical inputs give identical output.
    record : bool
        Also return every :class:`EpochRecord` (use only for small runs).
    """
    _check(policy, epochs)
    rng = np.random.default_rng(seed)
    acc = _run(spec, policy, epochs, rng, record, chunk_size)
    return _result(acc, seed, records=acc.records)


def replicate(
    spec: SystemSpec,
    policy: ThresholdPolicy,
    epochs: int,
    seed: int,
    replications: int,
    workers: int | None = None,
) -> tuple:
    """Run independent replications on spawned sub-seeds.

    Returns ``(pooled, per_replication)``; the pooled estimate is independent
    of the order in which the replications finish.
    """
    _check(policy, epochs)
    children = np.random.SeedSequence(seed).spawn(replications)

    def one(ss):
        return _run(spec, policy, epochs, np.random.default_rng(ss), False, DEFAULT_CHUNK)

    with ThreadPoolExecutor(max_workers=workers) as pool:
        accs = list(pool.map(one, children))
    pooled = accs[0]
    for acc in accs[1:]:
        pooled = pooled.merge(acc)
    return _result(pooled, seed), [_result(a, None) for a in accs]


def simulate_explicit(
    spec: SystemSpec,
    policy: ThresholdPolicy,
    epochs: int,
    seed: int,
    record: bool = False,
) -> SimResult:
    """Debug simulator that generates every Poisson arrival and discards blocked ones.

    Arrivals landing during service or during the controlled wait are dropped;
    the first arrival after the controlled wait ends is admitted.  Slow; meant
    for small runs that cross-check :func:`simulate`.
    """
    _check(policy, epochs)
    table = _ClassTable(spec, policy)
    ss_arrivals, ss_jobs = np.random.SeedSequence(seed).spawn(2)
    arr_rng = np.random.default_rng(ss_arrivals)
    job_rng = np.random.default_rng(ss_jobs)
    classes, services = table.draw(job_rng, epochs + 1)
    lam = spec.arrival_rate

    block = 1 << 16
    buf = np.empty(0)
    ptr = 0
    last_arrival = 0.0

    def refill():
        nonlocal buf, ptr, last_arrival
        fresh = last_arrival + np.cumsum(arr_rng.standard_exponential(block) / lam)
        buf = np.concatenate([buf[ptr:], fresh])
        ptr = 0
        last_arrival = float(fresh[-1])

    cols = {k: np.empty(epochs) for k in ("yp", "w", "x", "y", "t")}
    prior = np.empty(epochs, dtype=np.int64)
    discarded = 0
    delivery = 0.0
    ybar = table.ybar
    for k in range(epochs):
        i = classes[k]
        yp = services[k]
        gate = delivery + max(ybar[i] - yp, 0.0)
        if spec.generate_at_will:
            start = gate
        else:
            while len(buf) == 0 or buf[-1] <= gate:
                refill()
            idx = ptr + int(np.searchsorted(buf[ptr:], gate, side="right"))
            discarded += idx - ptr
            start = float(buf[idx])
            ptr = idx + 1
        y = services[k + 1]
        finish = start + y
        prior[k] = i
        cols["yp"][k] = yp
        cols["w"][k] = gate - delivery
        cols["x"][k] = start - gate
        cols["y"][k] = y
        cols["t"][k] = finish - delivery
        delivery = finish

    t = cols["t"]
    yp = cols["yp"]
    a = yp * t + 0.5 * t * t
    v = table.value_area(prior, yp, t)
    nxt = classes[1:]
    acc = _Accumulator(table.m)
    acc.add(np.column_stack([a, v, t]), prior, cols["w"], nxt)
    records = _records(prior, yp, cols["w"], cols["x"], nxt, cols["y"], a, v, t) if record else None
    return _result(acc, seed, discarded=discarded if not spec.generate_at_will else 0, records=records)


def age_sample_path(records) -> tuple:
    """Breakpoints ``(times, ages)`` of the piecewise-linear age sawtooth.

    Time zero is the warm-up delivery; each epoch contributes the segment from
    age ``prior_service`` up to ``prior_service + duration``.
    """
    n = len(records)
    times = np.empty(2 * n)
    ages = np.empty(2 * n)
    t0 = 0.0
    for k, r in enumerate(records):
        times[2 * k] = t0
        ages[2 * k] = r.prior_service
        t0 += r.duration
        times[2 * k + 1] = t0
        ages[2 * k + 1] = r.prior_service + r.duration
    return times, ages


def sample_path_aoi(records) -> float:
    """Time-average age from trapezoid integration of the sawtooth."""
    times, ages = age_sample_path(records)
    return float(np.trapezoid(ages, times) / (times[-1] - times[0]))


@dataclass(frozen=True)
class ValidationRow:
    metric: str
    analytic: float
    simulated: float
    se: float
    z: float
    passed: bool


@dataclass(frozen=True)
class ValidationReport:
    rows: tuple
    sim: SimResult
    phi_variant: str

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def row(self, metric: str) -> ValidationRow:
        for r in self.rows:
            if r.metric == metric:
                return r
        raise KeyError(metric)

    def format_table(self) -> str:
        lines = [f"{'metric':<10} {'analytic':>16} {'simulated':>16} {'std.err':>12} {'z':>8}  status"]
        for r in self.rows:
            status = "PASS" if r.passed else "FAIL"
            lines.append(
                f"{r.metric:<10} {r.analytic:>16.9g} {r.simulated:>16.9g} {r.se:>12.4g} {r.z:>8.3f}  {status}"
            )
        return "\n".join(lines)


def _row(metric, analytic, simulated, se, z_fail) -> ValidationRow:
    diff = simulated - analytic
    if math.isnan(simulated):
        return ValidationRow(metric, analytic, simulated, se, math.nan, True)
    if se > 0:
        z = diff / se
    else:
        z = 0.0 if abs(diff) <= 1e-9 * max(1.0, abs(analytic)) else math.copysign(math.inf, diff)
    return ValidationRow(metric, analytic, simulated, se, z, abs(z) <= z_fail)


def validate(
    spec: SystemSpec,
    policy: ThresholdPolicy,
    epochs: int,
    seed: int,
    z_fail: float = Z_FAIL,
) -> ValidationReport:
    """Compare closed-form expectations with a simulation of the same policy.

    The analytic side uses ``spec.phi_variant``; a row fails when its z-score
    exceeds ``z_fail`` in magnitude.
    """
    sim = simulate(spec, policy, epochs, seed)
    e = epoch_expectations(policy, spec)
    rows = [
        _row("AoI", e.aoi, sim.aoi, sim.aoi_se, z_fail),
        _row("VoI", e.voi, sim.voi, sim.voi_se, z_fail),
        _row("E[A]", e.EA, sim.mean_age_area, sim.mean_age_area_se, z_fail),
        _row("E[V]", e.EV, sim.mean_value_area, sim.mean_value_area_se, z_fail),
        _row("E[T]", e.ET, sim.mean_epoch, sim.mean_epoch_se, z_fail),
    ]
    for i, (ew, w_sim, w_se) in enumerate(zip(e.EW, sim.wait_mean, sim.wait_se), start=1):
        rows.append(_row(f"E[W_{i}]", ew, w_sim, w_se, z_fail))
    return ValidationReport(rows=tuple(rows), sim=sim, phi_variant=spec.phi_variant)
