"""Field oracles: closed-form example systems and dataset lookups."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .polytope import Hyperbox
from .uncertainty import Dataset, LipschitzBound


class UnknownSystem(KeyError):
    pass


class OracleUnavailable(LookupError):
    pass


def pendulum(x):
    x = np.asarray(x, dtype=float)
    return np.stack([x[..., 1], -np.sin(x[..., 0]) - 2.0 * x[..., 1]], axis=-1)


def vdp_inverted(x):
    x = np.asarray(x, dtype=float)
    x1, x2 = x[..., 0], x[..., 1]
    return np.stack([-2.0 * x2, -10.0 * x2 * (0.21 - x1**2) + 0.25 * x2**2], axis=-1)


@dataclass(frozen=True)
class Oracle:
    """Pointwise access to a vector field; ``f`` maps (..., n) to (..., n)."""

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    closed_form: bool = True

    def __call__(self, x) -> np.ndarray:
        return self.f(np.asarray(x, dtype=float))


def dataset_oracle(dataset: Dataset, name: str = "dataset") -> Oracle:
    """Oracle that answers only at the points of ``dataset``."""

    def lookup(x):
        X = np.atleast_2d(x)
        out = np.empty_like(X)
        for k, p in enumerate(X):
            dist = np.abs(dataset.X - p).max(axis=1)
            i = int(dist.argmin())
            if dist[i] > 1e-9:
                raise OracleUnavailable(f"no sample at x = {tuple(float(v) for v in p)}")
            out[k] = dataset.F[i]
        return out.reshape(np.shape(x))

    return Oracle(name, lookup, closed_form=False)


@dataclass(frozen=True)
class Example:
    """A closed-form system with the domain, target and bound used for it."""

    oracle: Oracle
    domain: Hyperbox
    target: Hyperbox
    bound: LipschitzBound


BUILTIN = {
    "pendulum": Example(
        Oracle("pendulum", pendulum),
        Hyperbox((-1.0, -1.0), (1.0, 1.0)),
        Hyperbox((-0.1, -0.1), (0.1, 0.1)),
        LipschitzBound((1.15, 3.15)),
    ),
    "vdp-inverted": Example(
        Oracle("vdp-inverted", vdp_inverted),
        Hyperbox((-0.5, -0.5), (0.5, 0.5)),
        Hyperbox((-0.05, -0.05), (0.05, 0.05)),
        LipschitzBound((2.15, 6.35)),
    ),
}


def builtin_example(name: str) -> Example:
    try:
        return BUILTIN[name]
    except KeyError:
        raise UnknownSystem(f"unknown system {name!r}; choose from {', '.join(sorted(BUILTIN))}") from None


def builtin_oracle(name: str) -> Oracle:
    return builtin_example(name).oracle
