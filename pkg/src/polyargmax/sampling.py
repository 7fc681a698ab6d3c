"""Stochastic decoding through a single CutMax call.

Two perturbations are supported: Gumbel noise (argmax of logits plus
Gumbel samples is an exact softmax sample) and bounded Beta(alpha, 1) noise
(the one-shot nucleus sampler). The noise is drawn in plaintext; only the
addition and the CutMax run would happen under encryption.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import CutMaxParams, as_logits, cutmax
from .errors import DomainError, InvalidParams

SENTINEL = -1e9  # stand-in for a -inf logit; as_logits rejects real infinities


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator keyed by a 64-bit seed (identical streams across platforms)."""
    return np.random.Generator(np.random.Philox(int(seed) & (2 ** 64 - 1)))


def gumbel_from_uniform(u):
    u = np.asarray(u, dtype=np.float64)
    if np.any(~((u > 0) & (u < 1))):
        raise DomainError("uniforms must lie strictly inside (0, 1)")
    out = -np.log(-np.log(u))
    return float(out) if out.ndim == 0 else out


def beta_inverse_cdf(u, alpha: float):
    """Inverse CDF of Beta(alpha, 1), whose CDF is x^alpha: returns u^(1/alpha)."""
    if not alpha > 0:
        raise DomainError(f"alpha must be > 0, got {alpha}")
    u = np.asarray(u, dtype=np.float64)
    if np.any(~((u >= 0) & (u <= 1))):
        raise DomainError("uniforms must lie in [0, 1]")
    out = u ** (1.0 / alpha)
    return float(out) if out.ndim == 0 else out


def nucleus_alpha(p: float, q: float | None = None) -> float:
    """Beta shape with P(G > p) = q for G ~ Beta(alpha, 1): alpha = ln(1 - q) / ln(p)."""
    q = p if q is None else q
    if not (0 < p < 1 and 0 < q < 1):
        raise DomainError(f"need p, q in (0, 1), got p={p}, q={q}")
    return math.log1p(-q) / math.log(p)


@dataclass(frozen=True)
class SamplerConfig:
    nucleus_mass: float = 0.9
    tail_mass: float | None = None
    seed: int = 0

    def __post_init__(self):
        nucleus_alpha(self.nucleus_mass, self.tail_mass)  # validates

    @property
    def q(self) -> float:
        return self.nucleus_mass if self.tail_mass is None else self.tail_mass

    @property
    def alpha(self) -> float:
        return nucleus_alpha(self.nucleus_mass, self.tail_mass)


@dataclass
class SampleOutcome:
    onehot: np.ndarray
    inside_nucleus: bool | None = None

    @property
    def token_index(self) -> int:
        return int(np.argmax(self.onehot))


def softmax(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def top_p_set(x, p: float, include_ties: bool = True, rtol: float = 1e-12) -> np.ndarray:
    """Indices of the smallest descending-softmax prefix with mass >= p.

    With ``include_ties`` every token whose probability equals the last
    one admitted (within ``rtol``) is admitted too, so the set does not
    depend on how a sort breaks ties.
    """
    if not 0 < p <= 1:
        raise DomainError(f"nucleus mass must lie in (0, 1], got {p}")
    probs = softmax(as_logits(x, min_len=1))
    order = np.argsort(-probs, kind="stable")
    cum = np.cumsum(probs[order])
    k = int(np.searchsorted(cum, p * (1 - rtol), side="left")) + 1
    k = min(k, probs.size)
    if include_ties:
        cutoff = probs[order[k - 1]]
        return np.sort(np.nonzero(probs >= cutoff * (1 - rtol))[0])
    return np.sort(order[:k])


def _perturbed_argmax(x: np.ndarray, noise: np.ndarray, params: CutMaxParams) -> np.ndarray:
    return cutmax(x + noise, params)


def gumbel_max_sample(x, params: CutMaxParams, seed: int = 0) -> SampleOutcome:
    x = as_logits(x)
    rng = make_rng(seed)
    g = gumbel_from_uniform(_open_uniform(rng, x.shape))
    return SampleOutcome(_perturbed_argmax(x, g, params))


def nucleus_one_shot_sample(x, cfg: SamplerConfig, params: CutMaxParams, seed: int | None = None) -> SampleOutcome:
    """Perturb logits with Beta(alpha, 1) noise and take one CutMax."""
    x = as_logits(x)
    rng = make_rng(cfg.seed if seed is None else seed)
    g = beta_inverse_cdf(rng.random(x.shape), cfg.alpha)
    out = SampleOutcome(_perturbed_argmax(x, g, params))
    out.inside_nucleus = bool(out.token_index in set(top_p_set(x, cfg.nucleus_mass).tolist()))
    return out


def _open_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    # rng.random is in [0, 1); nudge an exact 0 into the open interval
    u = rng.random(shape)
    return np.where(u > 0, u, np.nextafter(0.0, 1.0))


def sample_indices(x, method: str, draws: int, params: CutMaxParams, rng: np.random.Generator,
                   alpha: float | None = None) -> np.ndarray:
    """``draws`` token indices from one batched CutMax over perturbed copies of ``x``."""
    x = as_logits(x)
    if draws < 1:
        raise InvalidParams("draws must be >= 1")
    shape = (draws, x.size)
    if method == "gumbel":
        noise = gumbel_from_uniform(_open_uniform(rng, shape))
    elif method == "betacut":
        if alpha is None:
            raise InvalidParams("betacut sampling needs alpha")
        noise = beta_inverse_cdf(rng.random(shape), alpha)
    else:
        raise InvalidParams(f"unknown method {method!r}")
    return np.argmax(_perturbed_argmax(x, noise, params), axis=-1)


@dataclass
class ViolationRow:
    prompt_id: int
    method: str
    draws: int
    violations: int

    @property
    def rate(self) -> float:
        return self.violations / self.draws


def violation_experiment(prompts, cfg: SamplerConfig, draws: int, params_for=None) -> dict:
    """Fraction of draws outside the plaintext top-p set, per prompt and method.

    Prompt ``i`` uses the generator keyed by ``cfg.seed ^ i``; Gumbel
    uniforms are drawn before the Beta ones. ``params_for(n)`` picks the
    CutMax parameters for a prompt of length n (default p=3, c=2 sqrt(n-1),
    T=3, which preserves order so the sample is the exact perturbed argmax).
    """
    if draws < 1:
        raise InvalidParams("draws must be >= 1")
    params_for = params_for or default_sampling_params
    rows = []
    for i, x in enumerate(prompts):
        x = as_logits(x)
        nucleus = top_p_set(x, cfg.nucleus_mass)
        rng = make_rng(cfg.seed ^ i)
        params = params_for(x.size)
        for method in ("gumbel", "betacut"):
            idx = sample_indices(x, method, draws, params, rng, cfg.alpha)
            rows.append(ViolationRow(i, method, draws, int(np.count_nonzero(~np.isin(idx, nucleus)))))
    summary = {}
    for method, key in (("gumbel", "gumbelRate"), ("betacut", "betaCutRate")):
        rates = np.array([r.rate for r in rows if r.method == method])
        summary[key] = {"mean": float(rates.mean()), "std": float(rates.std())}
    summary["rows"] = rows
    return summary


def default_sampling_params(n: int) -> CutMaxParams:
    return CutMaxParams(3, 2.0 * math.sqrt(max(n - 1, 1)), 3)
