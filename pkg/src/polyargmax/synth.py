"""Synthetic logit generators and the fixture sets used by the experiments.

Generator specs are short strings, e.g. ``normal:170,10``, ``peaked:3,1``
(top gap, tail sigma) or ``two-level:0.9``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadSpec
from .sampling import make_rng

_ARITY = {"normal": 2, "peaked": 2, "two-level": 1}


@dataclass(frozen=True)
class GenSpec:
    dist: str
    args: tuple[float, ...]

    def __post_init__(self):
        if self.dist not in _ARITY:
            raise BadSpec(f"unknown distribution {self.dist!r}; expected one of {sorted(_ARITY)}")
        if len(self.args) != _ARITY[self.dist]:
            raise BadSpec(f"{self.dist} takes {_ARITY[self.dist]} argument(s), got {len(self.args)}")
        if self.dist == "normal" and not self.args[1] > 0:
            raise BadSpec("normal sigma must be > 0")
        if self.dist == "peaked" and not (self.args[0] >= 0 and self.args[1] > 0):
            raise BadSpec("peaked needs gap >= 0 and sigma > 0")
        if self.dist == "two-level" and not 0 < self.args[0] < 1:
            raise BadSpec("two-level top mass must lie in (0, 1)")

    def __str__(self):
        return f"{self.dist}:" + ",".join(f"{a:g}" for a in self.args)


def parse_gen_spec(text: str) -> GenSpec:
    dist, sep, rest = text.strip().partition(":")
    if not sep:
        raise BadSpec(f"generator spec {text!r} must look like dist:arg[,arg]")
    try:
        args = tuple(float(a) for a in rest.split(",") if a.strip())
    except ValueError as exc:
        raise BadSpec(f"non-numeric argument in {text!r}") from exc
    return GenSpec(dist.strip(), args)


def synthesize(spec: GenSpec | str, n: int, count: int, seed: int = 0) -> np.ndarray:
    """``count`` vectors of length ``n``, deterministic in ``seed``."""
    if isinstance(spec, str):
        spec = parse_gen_spec(spec)
    if n < 2:
        raise BadSpec("n must be >= 2")
    if count < 1:
        raise BadSpec("count must be >= 1")
    rng = make_rng(seed)
    if spec.dist == "normal":
        mu, sigma = spec.args
        return rng.normal(mu, sigma, size=(count, n))
    if spec.dist == "peaked":
        gap, sigma = spec.args
        out = rng.normal(0.0, sigma, size=(count, n))
        top = rng.integers(0, n, size=count)
        rows = np.arange(count)
        out[rows, top] = -np.inf
        out[rows, top] = out.max(axis=1) + gap
        return out
    s = spec.args[0]
    out = np.full((count, n), (1.0 - s) / (n - 1))
    out[:, 0] = s
    return out


# Fixture sets. Their parameters are part of the experiment definitions.
RECOVERY_FIXTURE = ("peaked:3,2", 50257, 100, 20240901)
NUCLEUS_FIXTURE = ("peaked:5,1", 256, 100, 20240902)
HE_FIXTURE = ("peaked:3,2", 32768, 10, 20240903)


def fixture(name: str) -> np.ndarray:
    table = {"recovery": RECOVERY_FIXTURE, "nucleus": NUCLEUS_FIXTURE, "he": HE_FIXTURE}
    if name not in table:
        raise BadSpec(f"unknown fixture {name!r}; expected one of {sorted(table)}")
    spec, n, count, seed = table[name]
    return synthesize(spec, n, count, seed)
