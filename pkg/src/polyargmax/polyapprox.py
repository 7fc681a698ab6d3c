"""Add/multiply-only approximations of 1/x, 1/sqrt(x) and sign(x).

Every routine is written once against the ``+ - *`` operator set, so the
same code runs on floats, numpy arrays and ``hesim.SlotVector`` values.
Plaintext inputs are range-checked; slot inputs are not (an encrypted
value cannot be inspected, so range safety is the caller's job, see
``rangeproof``).

Constructions:

* inverse: Goldschmidt product ``prod_{i=0..d} (1 + (1-x)^(2^i))`` on (0, 2)
* inverse square root: Newton steps ``y <- 1.5 y - 0.5 x y^3`` from an
  affine seed fitted to the configured domain
* sign: a few steep odd cubics followed by ``s <- 1.5 s - 0.5 s^3``
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from .errors import InvalidParams, RangeError
from .hesim import SlotVector

# steep first-stage cubic: g(s) = (G1*s - G3*s^3) / 1024, slope ~2.08 at 0
_G1, _G3 = 2126.0 / 1024.0, 1359.0 / 1024.0

# Table of (iterations, steep iterations) per target error exponent
_SIGN_PRESETS = {7: (7, 4), 9: (9, 6), 11: (11, 8), 13: (12, 8)}
# Newton iterations and log2 of the domain width lo = 2^-k, per target exponent
_INVSQRT_PRESETS = {7: (5, 6), 9: (6, 7), 11: (7, 8), 13: (8, 9)}


@dataclass(frozen=True)
class ApproxConfig:
    """Iteration count, guaranteed input domain and target error ``2^-alpha_bits``.

    ``steep_iterations`` only matters for ``sign``: how many of the
    ``iterations`` use the steep first-stage cubic.
    """

    iterations: int
    input_range: tuple[float, float] = (2.0 ** -6, 1.0)
    alpha_bits: int = 7
    steep_iterations: int = 0

    def __post_init__(self):
        if int(self.iterations) != self.iterations or self.iterations < 0:
            raise InvalidParams(f"iterations must be a non-negative integer, got {self.iterations}")
        lo, hi = (float(v) for v in self.input_range)
        if not (0 < lo < hi and math.isfinite(hi)):
            raise InvalidParams(f"input_range must satisfy 0 < lo < hi, got {self.input_range}")
        if not 0 <= self.steep_iterations <= self.iterations:
            raise InvalidParams("steep_iterations must lie in [0, iterations]")
        object.__setattr__(self, "input_range", (lo, hi))

    @property
    def tolerance(self) -> float:
        return 2.0 ** -self.alpha_bits


@dataclass(frozen=True)
class ApproxCost:
    name: str
    mults: int
    depth: int

    def __post_init__(self):
        if self.name not in ("inv", "invsqrt", "sign"):
            raise InvalidParams(f"unknown approximation {self.name!r}")


def _check_plain(x, lo: float, hi: float, name: str, closed: bool = True):
    if isinstance(x, SlotVector):
        return x
    arr = np.asarray(x, dtype=np.float64)
    ok = (arr >= lo) & (arr <= hi) if closed else (arr > lo) & (arr < hi)
    if not np.all(ok):
        bad = arr[~ok].ravel()[0]
        br = "[]" if closed else "()"
        raise RangeError(f"{name}: input {bad:.6g} outside {br[0]}{lo:.6g}, {hi:.6g}{br[1]}")
    return arr if arr.ndim else float(arr)


# -- inverse --

def inv(x, cfg: ApproxConfig):
    """Goldschmidt inverse of ``x`` in (0, 2) with ``cfg.iterations`` factors beyond the first."""
    x = _check_plain(x, 0.0, 2.0, "inv", closed=False)
    e = 1.0 - x
    f = 1.0 + e
    power = e
    for _ in range(cfg.iterations):
        power = power * power
        f = f * (1.0 + power)
    return f


def inv_error_bound(d: int, lo: float, hi: float) -> float:
    """Worst-case |f(x) - 1/x| over [lo, hi] inside (0, 2): |1-x|^(2^(d+1)) / x."""
    k = 2 ** (d + 1)
    return max(abs(1.0 - lo) ** k / lo, abs(1.0 - hi) ** k / hi)


def inv_iterations(lo: float, hi: float, alpha_bits: int, max_iter: int = 40) -> int:
    if not 0 < lo < hi < 2:
        raise InvalidParams(f"inverse domain must lie in (0, 2), got [{lo}, {hi}]")
    tol = 2.0 ** -alpha_bits
    for d in range(max_iter + 1):
        if inv_error_bound(d, lo, hi) <= tol:
            return d
    raise InvalidParams(f"no iteration count <= {max_iter} meets 2^-{alpha_bits} on [{lo}, {hi}]")


def inv_preset(alpha_bits: int, input_range=(2.0 ** -6, 1.0)) -> ApproxConfig:
    """Smallest Goldschmidt depth meeting ``2^-alpha_bits`` on ``input_range`` (inside (0, 2))."""
    lo, hi = input_range
    return ApproxConfig(inv_iterations(lo, hi, alpha_bits), (lo, hi), alpha_bits)


def inv_scaled(x, cfg: ApproxConfig):
    """``1/x`` for x in ``cfg.input_range``: divide by the domain midpoint, invert, divide again.

    Centring the domain on 1 makes ``|1 - x/b|`` as small as possible.
    """
    lo, hi = cfg.input_range
    x = _check_plain(x, lo, hi, "inv_scaled")
    b = 0.5 * (lo + hi)
    return inv(x * (1.0 / b), cfg) * (1.0 / b)


def inv_scaled_preset(alpha_bits: int, input_range) -> ApproxConfig:
    lo, hi = (float(v) for v in input_range)
    b = 0.5 * (lo + hi)
    return ApproxConfig(inv_iterations(lo / b, hi / b, alpha_bits), (lo, hi), alpha_bits)


# -- inverse square root --

@lru_cache(maxsize=64)
def invsqrt_seed(ratio: float) -> tuple[float, float]:
    """Affine seed ``a + b*x`` for 1/sqrt(x) on [ratio, 1].

    Chosen to minimize the worst relative error after ONE Newton step.
    From there on the error map e -> -e^2 (3 + e) / 2 is monotone in |e|,
    so this seed is also optimal for every larger iteration count.
    """
    xs = np.geomspace(ratio, 1.0, 4001)
    root = np.sqrt(xs)
    design = np.stack([root, xs * root], axis=1)
    a0, b0 = np.linalg.lstsq(design, np.ones_like(xs), rcond=None)[0]

    def worst_after_one_step(v):
        e = (v[0] + v[1] * xs) * root - 1.0
        return np.max(np.abs(e * e * (3.0 + e) * 0.5))

    best = None
    for scale in (1.0, 1.2, 1.5):
        res = minimize(worst_after_one_step, [a0 * scale, b0 * scale], method="Nelder-Mead",
                       options={"xatol": 1e-13, "fatol": 1e-15, "maxiter": 8000})
        if best is None or res.fun < best.fun:
            best = res
    return float(best.x[0]), float(best.x[1])


def invsqrt(x, cfg: ApproxConfig):
    """1/sqrt(x) on ``cfg.input_range`` by Newton iteration from a fitted affine seed.

    The seed is fitted on [lo/hi, 1]; the scale ``hi`` is folded into its
    plaintext coefficients, so no separate rescaling pass is needed.
    """
    lo, hi = cfg.input_range
    x = _check_plain(x, lo, hi, "invsqrt")
    a, b = invsqrt_seed(lo / hi)
    a, b = a / math.sqrt(hi), b / (hi * math.sqrt(hi))
    half = 0.5 * x
    y = a + b * x
    for _ in range(cfg.iterations):
        y = 1.5 * y - (half * y) * (y * y)
    return y


def invsqrt_preset(alpha_bits: int) -> ApproxConfig:
    if alpha_bits not in _INVSQRT_PRESETS:
        raise InvalidParams(f"no invsqrt preset for alpha={alpha_bits}; known {sorted(_INVSQRT_PRESETS)}")
    d, k = _INVSQRT_PRESETS[alpha_bits]
    return ApproxConfig(d, (2.0 ** -k, 1.0), alpha_bits)


def invsqrt_config(ratio: float, alpha_bits: int, max_iter: int = 60) -> ApproxConfig:
    """Fewest Newton iterations meeting ``2^-alpha_bits`` on [ratio, 1], checked on a dense grid."""
    if not 0 < ratio < 1:
        raise InvalidParams(f"domain ratio must lie in (0, 1), got {ratio}")
    xs = np.geomspace(ratio, 1.0, 20001)
    target = 1.0 / np.sqrt(xs)
    for d in range(max_iter + 1):
        cfg = ApproxConfig(d, (ratio, 1.0), alpha_bits)
        if np.max(np.abs(invsqrt(xs, cfg) - target)) <= cfg.tolerance:
            return cfg
    raise InvalidParams(f"no iteration count <= {max_iter} meets 2^-{alpha_bits} on [{ratio}, 1]")


def rescaled_invsqrt(x, cfg: ApproxConfig, bound: float):
    """``invsqrt(x / bound) / sqrt(bound)``: evaluates 1/sqrt(x) for x in ``bound * cfg.input_range``."""
    return invsqrt(x * (1.0 / bound), cfg) * (1.0 / math.sqrt(bound))


# -- sign --

def _steep(s):
    return _G1 * s - (_G3 * s) * (s * s)


def _smooth(s):
    return 1.5 * s - (0.5 * s) * (s * s)


def sign(x, cfg: ApproxConfig):
    """Odd polynomial approximation of sign(x) for x in [-1, 1]."""
    s = _check_plain(x, -1.0, 1.0, "sign")
    for i in range(cfg.iterations):
        s = _steep(s) if i < cfg.steep_iterations else _smooth(s)
    return s


def indicator(s):
    """Map a sign value in [-1, 1] to {0, 1}: (1 + s) / 2."""
    return 0.5 + 0.5 * s


@lru_cache(maxsize=64)
def sign_floor(iterations: int, steep_iterations: int, alpha_bits: int) -> float:
    """Smallest |x| above which the composite is within ``2^-alpha_bits`` of sign(x).

    Found by scanning a dense log grid; the returned value is the first
    grid point after the last failing one.
    """
    cfg = ApproxConfig(iterations, (1.0, 2.0), alpha_bits, steep_iterations)
    xs = np.geomspace(1e-7, 1.0, 400001)
    err = np.abs(sign(xs, cfg) - 1.0)
    bad = np.nonzero(err > 2.0 ** -alpha_bits)[0]
    if bad.size == 0:
        return float(xs[0])
    if bad[-1] + 1 >= xs.size:
        raise InvalidParams("sign composite never reaches the target accuracy")
    return float(xs[bad[-1] + 1])


def sign_preset(alpha_bits: int) -> ApproxConfig:
    """Fixed iteration counts per alpha (depth 14/18/22/24); ``input_range`` is the guaranteed |x| range."""
    if alpha_bits not in _SIGN_PRESETS:
        raise InvalidParams(f"no sign preset for alpha={alpha_bits}; known {sorted(_SIGN_PRESETS)}")
    iters, steep = _SIGN_PRESETS[alpha_bits]
    return ApproxConfig(iters, (sign_floor(iters, steep, alpha_bits), 1.0), alpha_bits, steep)


# -- cost metadata --

def cost(name: str, cfg: ApproxConfig, count_scalar_mults: bool = False) -> ApproxCost:
    """Multiplications and depth the routine adds when run on a fresh ``SlotVector``.

    With ``count_scalar_mults`` plaintext-scalar products are charged too
    (one multiplication and one level each), as a CKKS rescale would.
    """
    d = cfg.iterations
    if name == "inv":
        return ApproxCost("inv", 2 * d, d + 1 if d else 0)
    if name == "invsqrt":
        if count_scalar_mults:
            return ApproxCost("invsqrt", 4 * d + 2, 2 * d + 1)
        return ApproxCost("invsqrt", 3 * d, 2 * d)
    if name == "sign":
        return ApproxCost("sign", (4 if count_scalar_mults else 2) * d, 2 * d)
    raise InvalidParams(f"unknown approximation {name!r}")


def table_row(name: str, alpha_bits: int) -> tuple[int, int]:
    """(iterations, depth) for a preset, in the ciphertext-only accounting."""
    cfg = sign_preset(alpha_bits) if name == "sign" else invsqrt_preset(alpha_bits)
    return cfg.iterations, cost(name, cfg).depth
