"""Argmax circuits over simulated ciphertexts: CutMax-HE plus the tournament and league baselines.

Each entry point builds its own ``SlotContext``, runs the circuit using only
slot-legal operations, decrypts the result and returns an ``ArgmaxReport``
carrying the ledger and, for CutMax-HE, the closed-form cost prediction.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import polyapprox as pa
from .core import CutMaxParams, as_logits, residual_stats
from .errors import InvalidParams, QualityWarning, RangeProofViolation, WidthMismatch
from .hesim import CostLedger, NoiseModel, SlotContext, total_sum, unpack
from .rangeproof import HEScales

MASK_TOLERANCE = 0.05  # masks farther than this from {0, 1} trigger a QualityWarning


@dataclass
class ArgmaxReport:
    algorithm: str
    n: int
    s: int
    params: dict
    output: np.ndarray
    ledger: CostLedger
    formula_mults: int | None = None
    formula_depth: int | None = None
    sign_stages: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def predicted_index(self) -> int:
        return int(np.argmax(self.output))

    @property
    def top_mass(self) -> float:
        return float(np.max(self.output))

    def record(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "n": self.n,
            "s": self.s,
            "params": self.params,
            "ledger": self.ledger.record(),
            "formulaMults": self.formula_mults,
            "formulaDepth": self.formula_depth,
            "predictedIndex": self.predicted_index,
            "topMass": self.top_mass,
            "signStages": self.sign_stages,
        }

    def to_json(self) -> str:
        return json.dumps(self.record(), sort_keys=True)


def _ceil_log2(p: int) -> int:
    return (int(p) - 1).bit_length()


def _next_pow2(n: int) -> int:
    return 1 << (int(n) - 1).bit_length()


def cutmax_he_formula(params: CutMaxParams, invsqrt_cost: pa.ApproxCost,
                      inv_cost: pa.ApproxCost) -> tuple[int, int]:
    """Closed-form (mults, depth): sum_t (M_invsqrt + 5 + ceil log2 p_t) + M_inv + 1, and the depth analogue."""
    mults = sum(invsqrt_cost.mults + 5 + _ceil_log2(p) for p in params.p) + inv_cost.mults + 1
    depth = sum(invsqrt_cost.depth + 5 + _ceil_log2(p) for p in params.p) + inv_cost.depth + 1
    return mults, depth


def calibrate_scales(samples, params: CutMaxParams, margin: float = 1.25) -> HEScales:
    """Scales from plaintext runs over representative inputs, widened by ``margin`` on each side.

    Used when the interval bounds are too loose for the approximation
    domains (large powers make them explode); the guarantee then only
    covers inputs resembling the calibration set.
    """
    if margin < 1:
        raise InvalidParams("margin must be >= 1")
    X = np.atleast_2d(as_logits(samples))
    var = np.empty((X.shape[0], params.T))
    sums = np.empty(X.shape[0])
    for i, x in enumerate(X):
        y = x
        for t, (p, c) in enumerate(params.schedule()):
            st = residual_stats(y, params.eps_var)
            var[i, t] = st.s2
            y = (1.0 + st.residuals / c) ** p
        sums[i] = y.sum()
    bounds = tuple((float(var[:, t].min() / margin), float(var[:, t].max() * margin))
                   for t in range(params.T))
    return HEScales(bounds, (float(sums.min() / margin), float(sums.max() * margin)), source="calibrated")


def _inv_config(scales: HEScales, alpha_bits: int) -> tuple[pa.ApproxConfig, float]:
    lo, hi = scales.sum_bounds
    b = 0.5 * (lo + hi)
    lo_s, hi_s = lo / b, hi / b
    if hi_s >= 2.0:
        # degenerate single-point bracket still needs a non-empty domain
        lo_s, hi_s = lo_s, min(hi_s, 2.0 - 1e-12)
    if lo_s == hi_s:
        lo_s, hi_s = lo_s * (1 - 1e-9), hi_s * (1 + 1e-9)
    d = pa.inv_iterations(lo_s, hi_s, alpha_bits)
    return pa.ApproxConfig(d, (lo_s, hi_s), alpha_bits), b


def invsqrt_config_for(scales: HEScales, alpha_bits: int) -> pa.ApproxConfig:
    """Inverse-sqrt config whose domain covers the widest variance bracket in ``scales``."""
    ratio = min(lo / hi for lo, hi in scales.var_bounds)
    preset = pa.invsqrt_preset(alpha_bits) if alpha_bits in (7, 9, 11, 13) else None
    if preset is not None and ratio >= preset.input_range[0] / preset.input_range[1]:
        return preset
    return pa.invsqrt_config(min(ratio, 0.5), alpha_bits)


def _check_scales(scales: HEScales, params: CutMaxParams, cfg: pa.ApproxConfig):
    if len(scales.var_bounds) != params.T:
        raise InvalidParams(f"scales cover {len(scales.var_bounds)} iterations, params have T={params.T}")
    ratio = cfg.input_range[0] / cfg.input_range[1]
    bad = [(t + 1, lo, hi) for t, (lo, hi) in enumerate(scales.var_bounds) if lo / hi < ratio * (1 - 1e-12)]
    if bad:
        msg = ", ".join(f"t={t}: variance ratio {lo / hi:.3g} < domain ratio {ratio:.3g}" for t, lo, hi in bad)
        raise RangeProofViolation(f"inverse-sqrt input leaves its domain ({msg})", bad)


def cutmax_he(x, params: CutMaxParams, scales: HEScales, *, alpha_bits: int = 11,
              invsqrt_cfg: pa.ApproxConfig | None = None, slots: int | None = None,
              count_scalar_mults: bool = True, noise: NoiseModel | None = None,
              seed: int = 0) -> ArgmaxReport:
    """Encrypted CutMax on packed slots.

    ``alpha_bits`` selects the inverse-sqrt preset and the Goldschmidt depth
    of the final inverse; ``invsqrt_cfg`` overrides the former when the
    variance brackets need a wider domain than the preset covers.

    Per iteration, on one ciphertext: mean by rotate-and-sum times 1/n;
    centring; squaring; a plaintext vector product that both masks padding
    lanes and applies 1/(n b_t); rotate-and-sum; inverse sqrt; a plaintext
    vector product applying 1/(c sqrt(b_t)) and the mask; the product with
    the centred values; +1; the odd power. Padding lanes start at 1 and the
    masked update keeps them at exactly 1, so every sum subtracts the
    padding count as a plaintext constant.

    Finally Y is scaled by 1/b (b centres the sum bracket on 1), summed,
    inverted with Goldschmidt and multiplied back in.
    """
    x = as_logits(x)
    if x.ndim != 1:
        raise InvalidParams("cutmax_he takes a single vector")
    residual_stats(x, params.eps_var)  # propagates DegenerateInput
    n = x.size
    s = int(slots) if slots is not None else min(_next_pow2(n), 1 << 15)
    isq_cfg = invsqrt_cfg or pa.invsqrt_preset(alpha_bits)
    _check_scales(scales, params, isq_cfg)
    inv_cfg, b_sum = _inv_config(scales, alpha_bits)
    cfg_hi = isq_cfg.input_range[1]

    ctx = SlotContext(s, noise=noise, seed=seed, count_scalar_mults=count_scalar_mults)
    Y = ctx.pack(x, fill=1.0)
    k = len(Y)
    pad = float(k * s - n)
    masks = np.zeros(k * s)
    masks[:n] = 1.0
    masks = masks.reshape(k, s)

    for (p, c), (_, var_hi) in zip(params.schedule(), scales.var_bounds):
        b_t = var_hi / cfg_hi
        mu = (total_sum(Y) - pad) * (1.0 / n)
        diff = [y - mu for y in Y]
        wsq = [(d * d) * (m / (n * b_t)) for d, m in zip(diff, masks)]
        inv_sd = pa.invsqrt(total_sum(wsq), isq_cfg)
        scaled = [inv_sd * (m / (c * math.sqrt(b_t))) for m in masks]
        Y = [(g * d + 1.0).pow(p) for g, d in zip(scaled, diff)]

    Yb = [y * (1.0 / b_sum) for y in Y]
    inv_s = pa.inv(total_sum(Yb) - pad / b_sum, inv_cfg)
    Z = [y * inv_s for y in Yb]

    mode = count_scalar_mults
    f_mults, f_depth = cutmax_he_formula(params, pa.cost("invsqrt", isq_cfg, mode), pa.cost("inv", inv_cfg, mode))
    return ArgmaxReport(
        algorithm="cutmaxHE", n=n, s=s,
        params={**params.as_dict(), "alphaBits": alpha_bits, "invsqrtIterations": isq_cfg.iterations,
                "invIterations": inv_cfg.iterations, "ciphertexts": k, "countScalarMults": mode},
        output=unpack(Z, n), ledger=ctx.ledger.copy(),
        formula_mults=f_mults, formula_depth=f_depth,
    )


def expected_rotations(T: int, s: int) -> int:
    """Rotation count of ``cutmax_he``: two rotate-and-sums per iteration plus one at the end."""
    log_s = s.bit_length() - 1
    return T * 2 * log_s + log_s


def _warn_masks(values: np.ndarray, stage: int):
    dist = np.minimum(np.abs(values), np.abs(1.0 - values))
    if dist.size and dist.max() > MASK_TOLERANCE:
        warnings.warn(f"stage {stage}: comparison mask {dist.max():.3f} away from {{0,1}} (near tie)",
                      QualityWarning, stacklevel=3)


def _value_bounds(value_range) -> tuple[float, float]:
    lo, hi = (float(v) for v in value_range)
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise InvalidParams(f"value_range must be finite with lo < hi, got {value_range}")
    return lo, hi


def tournament_argmax(x, sign_cfg: pa.ApproxConfig, *, value_range, slots: int | None = None,
                      count_scalar_mults: bool = True, noise: NoiseModel | None = None,
                      seed: int = 0) -> ArgmaxReport:
    """Pairwise knockout in log2(N) stages, carrying a one-hot weight vector over original positions.

    Stage with m live candidates: B is A shifted by m/2, d = A - B,
    mask = (1 + sign(d / R)) / 2, and A <- B + mask * d keeps the larger.
    Original index j sits at position j mod m, so its weight is multiplied
    by mask or 1 - mask, laid out with period m by plaintext masking and
    rotate-doubling. When m exceeds the slot count the halves live in
    different ciphertexts and no rotation is needed.

    Padding lanes hold ``lo - (hi - lo)/16`` so every lane stays inside
    the comparison range and pads never win.
    """
    x = as_logits(x, min_len=1)
    if x.ndim != 1:
        raise InvalidParams("tournament_argmax takes a single vector")
    lo, hi = _value_bounds(value_range)
    n = x.size
    N = _next_pow2(n)
    s = int(slots) if slots is not None else min(N, 1 << 15)
    pad_value = lo - (hi - lo) / 16.0
    R = (hi - pad_value)
    ctx = SlotContext(s, noise=noise, seed=seed, count_scalar_mults=count_scalar_mults)
    A = ctx.pack(np.concatenate([x, np.full(N - n, pad_value)]), fill=pad_value)
    W = ctx.pack(np.ones(N), fill=0.0)
    stages = 0
    m = N
    while m > 1:
        half = m // 2
        if m > s:
            km = m // s
            d = [a - b for a, b in zip(A[: km // 2], A[km // 2: km])]
            mask = [pa.indicator(pa.sign(v * (1.0 / R), sign_cfg)) for v in d]
            for mk in mask:
                _warn_masks(mk.decrypt(), stages + 1)
            A = [b + mk * v for b, mk, v in zip(A[km // 2: km], mask, d)]
            loser = [1.0 - mk for mk in mask]
            W = [w * (mask[pos] if pos < km // 2 else loser[pos - km // 2])
                 for w, pos in ((w, j % km) for j, w in enumerate(W))]
        else:
            a = A[0]
            b = a.rotate(half)
            d = a - b
            mask = pa.indicator(pa.sign(d * (1.0 / R), sign_cfg))
            _warn_masks(mask.decrypt()[:half], stages + 1)
            A = [b + mask * d]
            H = np.zeros(s)
            H[:half] = 1.0
            kept = mask * H
            ext = kept + (H - kept).rotate_right(half)
            step = m
            while step < min(N, s):
                ext = ext + ext.rotate_right(step)
                step *= 2
            W = [w * ext for w in W]
        stages += 1
        m = half
    out = unpack(W, N)[:n]
    return ArgmaxReport(
        algorithm="tournament", n=n, s=s,
        params={"alphaBits": sign_cfg.alpha_bits, "signIterations": sign_cfg.iterations,
                "valueRange": [lo, hi], "countScalarMults": count_scalar_mults},
        output=out, ledger=ctx.ledger.copy(), sign_stages=stages,
        extra={"maxValue": float(A[0].decrypt()[0])},
    )


def league_argmax(x, sign_cfg: pa.ApproxConfig, *, value_range, slots: int | None = None,
                  count_scalar_mults: bool = True, noise: NoiseModel | None = None,
                  seed: int = 0) -> ArgmaxReport:
    """Round-robin scoring in one ciphertext: n - 1 rotated comparisons, then one sign to extract.

    Each lane accumulates (1 + sign(A_i - A_{i+k})) / 2 over k = 1..n-1, so
    the maximum scores n - 1. The one-hot is
    (1 + sign((score - (n - 1.5)) / (n - 1.5))) / 2. When 2n fits in the
    slots the vector is replicated so a plain rotation acts cyclically on
    the first n lanes; idle lanes are filled with ``lo`` to keep every
    comparison in range.
    """
    x = as_logits(x, min_len=2)
    if x.ndim != 1:
        raise InvalidParams("league_argmax takes a single vector")
    lo, hi = _value_bounds(value_range)
    n = x.size
    s = int(slots) if slots is not None else _next_pow2(2 * n)
    if n > s or (n < s < 2 * n):
        raise WidthMismatch(f"league needs n == s or 2n <= s (n={n}, s={s})")
    R = hi - lo
    ctx = SlotContext(s, noise=noise, seed=seed, count_scalar_mults=count_scalar_mults)
    A = ctx.encrypt(x, fill=0.0)
    if 2 * n <= s:
        idle = np.zeros(s)
        idle[2 * n:] = lo
        A = A + A.rotate_right(n) + idle
    score = None
    for k in range(1, n):
        ind = pa.indicator(pa.sign((A - A.rotate(k)) * (1.0 / R), sign_cfg))
        _warn_masks(ind.decrypt()[:n], k)
        score = ind if score is None else score + ind
    score_plain = score.decrypt()[:n]
    centre = n - 1.5
    onehot = pa.indicator(pa.sign((score - centre) * (1.0 / centre), sign_cfg))
    return ArgmaxReport(
        algorithm="league", n=n, s=s,
        params={"alphaBits": sign_cfg.alpha_bits, "signIterations": sign_cfg.iterations,
                "valueRange": [lo, hi], "countScalarMults": count_scalar_mults},
        output=onehot.decrypt()[:n], ledger=ctx.ledger.copy(), sign_stages=n,
        extra={"scores": score_plain},
    )
