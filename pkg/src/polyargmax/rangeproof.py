"""Interval propagation through the encrypted CutMax circuit.

Given bounds on the input logits, a lower bound on their variance and the
approximation configs, this tracks an interval for every intermediate
(mean, centred values, variance, inverse-sqrt input, shifted values,
powers, final sum) and flags any step that leaves the scheme's magnitude
bound or an approximation's guaranteed domain. The surviving variance and
sum intervals become the plaintext scales the encrypted circuit needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .core import CutMaxParams
from .errors import InvalidParams, RangeProofViolation
from .polyapprox import ApproxConfig

DEFAULT_B_CKKS = 2.0 ** 40


@dataclass(frozen=True)
class HEScales:
    """Plaintext scales for the encrypted circuit.

    ``var_bounds[t]`` is the assumed variance interval entering iteration
    ``t``; the circuit divides the variance by its upper end so it lands in
    the inverse-sqrt domain. ``sum_bounds`` brackets the final sum that is
    inverted at the end.
    """

    var_bounds: tuple[tuple[float, float], ...]
    sum_bounds: tuple[float, float]
    source: str = "manual"

    def __post_init__(self):
        for lo, hi in (*self.var_bounds, self.sum_bounds):
            if not (0 < lo <= hi and math.isfinite(hi)):
                raise InvalidParams(f"scale interval [{lo}, {hi}] must satisfy 0 < lo <= hi < inf")


@dataclass
class Interval:
    step: str
    iteration: int
    lo: float
    hi: float
    flag: str = ""


@dataclass
class RangeTrace:
    steps: list[Interval] = field(default_factory=list)
    scales: HEScales | None = None

    @property
    def violations(self) -> list[Interval]:
        return [s for s in self.steps if s.flag]

    @property
    def ok(self) -> bool:
        return not self.violations

    def raise_if_violated(self) -> "RangeTrace":
        if self.violations:
            msg = "; ".join(f"t={v.iteration} {v.step}: {v.flag}" for v in self.violations)
            raise RangeProofViolation(msg, self.violations)
        return self


def _rel_error(cfg: ApproxConfig) -> float:
    # abs error <= 2^-alpha where 1/sqrt(x) >= 1/sqrt(hi), so relative <= 2^-alpha * sqrt(hi)
    return cfg.tolerance * math.sqrt(cfg.input_range[1])


def range_proof(x_bounds, n: int, params: CutMaxParams, invsqrt_cfg: ApproxConfig, *,
                var_floor: float = 0.0, b_ckks: float = DEFAULT_B_CKKS) -> RangeTrace:
    """Propagate intervals through every step; never raises, it reports.

    Variance of the inputs is bracketed by ``[var_floor, ((hi - lo) / 2)^2]``
    (the upper end is the largest variance values confined to [lo, hi] can
    have). For later iterations the shifted values ``z = 1 + r/c`` lie in
    ``1 +- sqrt(n-1)/c`` up to the inverse-sqrt error, and since
    ``Y = z^p`` is monotone with slope between ``p z_lo^(p-1)/c`` and
    ``p z_hi^(p-1)/c`` per unit residual, the next variance lies between
    the squares of those slopes.
    """
    lo, hi = (float(v) for v in x_bounds)
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise InvalidParams(f"x bounds must be finite with lo < hi, got {x_bounds}")
    if n < 2:
        raise InvalidParams("n must be >= 2")
    trace = RangeTrace()
    add = trace.steps.append
    cfg_lo, cfg_hi = invsqrt_cfg.input_range
    delta = _rel_error(invsqrt_cfg)
    root = math.sqrt(n - 1)

    def check(step, t, a, b, domain=None):
        flag = ""
        if max(abs(a), abs(b)) > b_ckks:
            flag = f"magnitude {max(abs(a), abs(b)):.3g} exceeds B_CKKS={b_ckks:.3g}"
        elif domain is not None and (a < domain[0] * (1 - 1e-12) or b > domain[1] * (1 + 1e-12)):
            flag = f"[{a:.4g}, {b:.4g}] leaves approximation domain [{domain[0]:.4g}, {domain[1]:.4g}]"
        add(Interval(step, t, a, b, flag))

    y_lo, y_hi = lo, hi
    var_lo, var_hi = var_floor, ((hi - lo) / 2.0) ** 2
    var_bounds = []
    for t, (p, c) in enumerate(params.schedule(), start=1):
        check("y", t, y_lo, y_hi)
        check("mean", t, y_lo, y_hi)
        span = y_hi - y_lo
        check("centred", t, -span, span)
        check("square", t, 0.0, span * span)
        check("variance", t, var_lo, var_hi)
        scale = var_hi / cfg_hi
        var_bounds.append((max(var_lo, var_hi * cfg_lo / cfg_hi), var_hi))
        check("invsqrt_input", t, var_lo / scale, var_hi / scale, (cfg_lo, cfg_hi))
        sd_inv_hi = math.inf if var_lo <= 0 else (1 + delta) / math.sqrt(var_lo)
        check("inv_sigma", t, (1 - delta) / math.sqrt(var_hi), sd_inv_hi)
        a = root / c * (1 + delta)
        z_lo, z_hi = 1.0 - a, 1.0 + a
        flag = "" if z_lo > 0 else "shifted values not confined to (0, 2)"
        add(Interval("shifted", t, z_lo, z_hi, flag))
        if z_lo >= 0 or p % 2 == 1:
            y_lo, y_hi = z_lo ** p, z_hi ** p
        else:
            y_lo, y_hi = 0.0, max(abs(z_lo), z_hi) ** p
        check("power", t, y_lo, y_hi)
        slope_lo = p * max(z_lo, 0.0) ** (p - 1) * (1 - delta) / c if p > 1 else (1 - delta) / c
        slope_hi = p * z_hi ** (p - 1) * (1 + delta) / c if p > 1 else (1 + delta) / c
        var_lo, var_hi = slope_lo ** 2, slope_hi ** 2
    # mean of z is exactly 1 (residuals sum to 0), so Jensen gives sum >= n for z >= 0
    s_lo = n * max(y_lo, 1.0 if y_lo >= 0 else y_lo)
    s_hi = n * y_hi
    check("sum", params.T, s_lo, s_hi)
    if s_lo <= 0:
        trace.steps[-1].flag = "final sum not bounded away from 0"
    else:
        b = 0.5 * (s_lo + s_hi)
        check("inv_input", params.T, s_lo / b, s_hi / b, (1e-300, 2.0 - 1e-12))
    if trace.ok:
        trace.scales = HEScales(tuple(var_bounds), (s_lo, s_hi), source="range_proof")
    return trace
