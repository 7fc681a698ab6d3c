"""Plaintext CutMax: iterative standardize / shift / odd-power argmax surrogate.

Every operation here works on a single vector of shape ``(n,)`` or on a batch
of shape ``(..., n)``; reductions always run over the last axis.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateInput,
    InvalidParams,
    NonFiniteError,
    TieWarning,
    UncheckedParamsWarning,
)

EPS_VAR = 1e-24
TIE_GAP = 1e-9


def _broadcast(value, T: int, name: str) -> tuple:
    if np.ndim(value) == 0:
        return (value,) * T
    seq = tuple(value)
    if len(seq) != T:
        raise InvalidParams(f"{name} schedule has length {len(seq)}, expected T={T}")
    return seq


@dataclass(frozen=True)
class CutMaxParams:
    """Amplification powers ``p``, scaling divisors ``c`` and iteration count ``T``.

    ``p`` and ``c`` accept a scalar (broadcast to every iteration) or a
    per-iteration schedule of length ``T``.  Even powers are only accepted
    with ``unchecked=True``; they void the order-preservation guarantee.
    ``stop_eps`` enables early stopping once the normalized top mass reaches
    ``1 - stop_eps`` (off by default).
    """

    p: tuple[int, ...]
    c: tuple[float, ...]
    T: int
    unchecked: bool = False
    stop_eps: float | None = None
    eps_var: float = EPS_VAR

    def __init__(self, p, c, T: int | None = None, *, unchecked=False, stop_eps=None, eps_var=EPS_VAR):
        if T is None:
            T = len(p) if np.ndim(p) else (len(c) if np.ndim(c) else None)
            if T is None:
                raise InvalidParams("T is required when p and c are scalars")
        if int(T) != T or T < 1:
            raise InvalidParams(f"T must be a positive integer, got {T}")
        T = int(T)
        ps = tuple(int(v) for v in _broadcast(p, T, "p"))
        cs = tuple(float(v) for v in _broadcast(c, T, "c"))
        for v in cs:
            if not (v > 0 and math.isfinite(v)):
                raise InvalidParams(f"every c must be a positive finite real, got {v}")
        for v in ps:
            if unchecked:
                if v < 1:
                    raise InvalidParams(f"power must be >= 1, got {v}")
            elif v < 3 or v % 2 == 0:
                raise InvalidParams(f"p must be odd and >= 3 (got {v}); pass unchecked=True for even schedules")
        if stop_eps is not None and not (0 < stop_eps < 1):
            raise InvalidParams("stop_eps must lie in (0, 1)")
        object.__setattr__(self, "p", ps)
        object.__setattr__(self, "c", cs)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "unchecked", bool(unchecked))
        object.__setattr__(self, "stop_eps", stop_eps)
        object.__setattr__(self, "eps_var", float(eps_var))
        if unchecked and any(v % 2 == 0 for v in ps):
            warnings.warn(f"even powers in schedule {ps}: order preservation is not guaranteed",
                          UncheckedParamsWarning, stacklevel=2)

    def schedule(self):
        return list(zip(self.p, self.c))

    def guaranteed(self, n: int) -> bool:
        """True when the convergence theory applies: odd powers and every c > sqrt(n-1)."""
        bound = math.sqrt(n - 1)
        return all(v % 2 == 1 and v >= 3 for v in self.p) and all(v > bound for v in self.c)

    def as_dict(self) -> dict:
        return {"T": self.T, "p": list(self.p), "c": list(self.c)}


@dataclass
class ResidualStats:
    """Mean, variance, standardized residuals and non-top dispersion of one state."""

    mu: np.ndarray | float
    s2: np.ndarray | float
    residuals: np.ndarray
    dispersion: np.ndarray | float
    top_index: np.ndarray | int


def as_logits(x, *, min_len: int = 2) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[-1] < min_len:
        raise InvalidParams(f"logit vectors need n >= {min_len}")
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise NonFiniteError(f"non-finite entry at {tuple(int(i) for i in bad)}", index=tuple(bad))
    return arr


def residual_stats(y: np.ndarray, eps_var: float = EPS_VAR) -> ResidualStats:
    y = np.asarray(y, dtype=np.float64)
    mu = y.mean(axis=-1, keepdims=True)
    centered = y - mu
    s2 = np.mean(centered * centered, axis=-1, keepdims=True)
    if np.any(~(s2 >= eps_var)):
        raise DegenerateInput(
            f"variance {float(np.min(s2)):.3e} below floor {eps_var:.1e}; "
            "input has no unique maximizer, tie-break upstream")
    r = centered / np.sqrt(s2)
    top = np.argmax(y, axis=-1)
    dispersion = _nontop_sq_dev(r, top)
    if y.ndim == 1:
        return ResidualStats(float(mu[0]), float(s2[0]), r, float(dispersion), int(top))
    return ResidualStats(mu[..., 0], s2[..., 0], r, dispersion, top)


def _nontop_sq_dev(v: np.ndarray, top) -> np.ndarray:
    n = v.shape[-1]
    top = np.asarray(top)
    top_val = np.take_along_axis(v, top[..., None], axis=-1)[..., 0]
    others_mean = (v.sum(axis=-1) - top_val) / (n - 1)
    sq = (v - others_mean[..., None]) ** 2
    return sq.sum(axis=-1) - (top_val - others_mean) ** 2


def nontop_value_dispersion(y) -> np.ndarray | float:
    """Sum of squared deviations of the non-top entries of the *normalized* vector.

    This is the quantity the contraction bound controls after one step
    (values of the normalized image, not its standardized residuals).
    """
    y = np.asarray(y, dtype=np.float64)
    z = y / y.sum(axis=-1, keepdims=True)
    out = _nontop_sq_dev(z, np.argmax(z, axis=-1))
    return float(out) if z.ndim == 1 else out


def cutmax_step(y, p: int, c: float, eps_var: float = EPS_VAR):
    """One inner update ``y -> (1 + r/c)**p``; stats describe ``y`` before the update."""
    stats = residual_stats(y, eps_var)
    nxt = (1.0 + stats.residuals / c) ** p
    return nxt, stats


def _check_ties(x: np.ndarray) -> None:
    if x.shape[-1] < 2:
        return
    top2 = np.partition(x, -2, axis=-1)[..., -2:]
    gap = top2[..., 1] - top2[..., 0]
    if np.any(gap < TIE_GAP):
        warnings.warn("top-2 gap below 1e-9: mass will split among tied maxima",
                      TieWarning, stacklevel=3)


def normalize(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    return y / y.sum(axis=-1, keepdims=True)


def cutmax(x, params: CutMaxParams) -> np.ndarray:
    """Near-one-hot score vector peaked at ``argmax(x)``; sums to 1 along the last axis."""
    y = as_logits(x)
    _check_ties(y)
    for p, c in params.schedule():
        y, _ = cutmax_step(y, p, c, params.eps_var)
        if params.stop_eps is not None:
            z = normalize(y)
            if np.all(z.max(axis=-1) >= 1.0 - params.stop_eps):
                return z
    return normalize(y)


@dataclass
class TraceEntry:
    iteration: int
    stats: ResidualStats  # state entering this iteration
    frac_below_mean: float  # of the state leaving it
    top_mass: float
    value_dispersion: float = field(default=0.0)


def convergence_trace(x, params: CutMaxParams) -> list[TraceEntry]:
    """Per-iteration diagnostics for one vector."""
    y = as_logits(x)
    if y.ndim != 1:
        raise InvalidParams("convergence_trace takes a single vector")
    out = []
    for t, (p, c) in enumerate(params.schedule(), start=1):
        y, stats = cutmax_step(y, p, c, params.eps_var)
        z = normalize(y)
        out.append(TraceEntry(
            iteration=t,
            stats=stats,
            frac_below_mean=float(np.mean(y < y.mean())),
            top_mass=float(z.max()),
            value_dispersion=float(nontop_value_dispersion(y)),
        ))
    return out


def _require_guarantee(n: int, c: float) -> float:
    if n < 2:
        raise InvalidParams("n must be >= 2")
    root = math.sqrt(n - 1)
    if not c > root:
        raise InvalidParams(f"c={c} must exceed sqrt(n-1)={root:.6g}")
    return root


def fixed_point_top_mass(n: int, p: int, c: float) -> float:
    root = _require_guarantee(n, c)
    hi = (1.0 + root / c) ** p
    lo = (1.0 - 1.0 / (c * root)) ** p
    return hi / (hi + (n - 1) * lo)


def fixed_point_target(n: int, p: int, c: float) -> np.ndarray:
    """Two-level vector every two-level state maps to in one step (top at index 0)."""
    s = fixed_point_top_mass(n, p, c)
    out = np.full(n, (1.0 - s) / (n - 1))
    out[0] = s
    return out


def two_level(n: int, s: float, top: int = 0) -> np.ndarray:
    out = np.full(n, (1.0 - s) / (n - 1))
    out[top] = s
    return out


def contraction_factor(n: int, p: int, c: float) -> float:
    root = _require_guarantee(n, c)
    a = root / c
    return (p / c) ** 2 * (1 + a) ** (2 * (p - 1)) / (n ** 2 * (1 - a) ** (2 * p))


def top_mass(z) -> np.ndarray | float:
    z = np.asarray(z)
    out = z.max(axis=-1)
    return float(out) if z.ndim == 1 else out
