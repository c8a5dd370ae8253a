import math

import numpy as np

from aoivoi.model import ClassSpec, Deterministic, Exponential, SystemSpec, hyperexponential

FIG3_SOLID = dict(probabilities=[0.5, 0.5], values=[100, 1], decays=[0.1, 1], rates=[0.1, 1])
FIG3_DOTTED = dict(probabilities=[0.5, 0.5], values=[100, 1], decays=[0.1, 1], rates=[1, 0.1])


def fig3(arrival_rate, beta=0.5, dotted=False, phi_variant="mixture"):
    params = FIG3_DOTTED if dotted else FIG3_SOLID
    return hyperexponential(**params, arrival_rate=arrival_rate, beta=beta, phi_variant=phi_variant)


def fig4(alpha, arrival_rate, beta=0.5):
    return hyperexponential([0.5, 0.5], [100, 1], [alpha, alpha], [1, 1], arrival_rate, beta)


def random_spec(
    rng,
    min_classes=1,
    max_classes=4,
    rates=(1.0, 10.0, math.inf),
    beta=None,
    positive_decay=False,
    allow_deterministic=True,
):
    m = int(rng.integers(min_classes, max_classes + 1))
    p = rng.dirichlet(np.ones(m))
    p = p / p.sum()
    p[-1] = 1.0 - p[:-1].sum()
    classes = []
    for k in range(m):
        if allow_deterministic and rng.random() < 0.3:
            service = Deterministic(float(rng.uniform(0.1, 5.0)))
        else:
            service = Exponential(float(rng.uniform(0.1, 5.0)))
        if positive_decay or rng.random() < 0.85:
            decay = float(rng.uniform(0.01, 2.0))
        else:
            decay = 0.0
        classes.append(ClassSpec(float(p[k]), float(rng.uniform(0.0, 100.0)), decay, service))
    lam = float(rates[int(rng.integers(len(rates)))])
    b = float(rng.uniform(0.0, 0.99)) if beta is None else float(beta)
    return SystemSpec(tuple(classes), lam, b)
