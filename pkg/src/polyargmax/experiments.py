"""Batch experiment runners behind the CLI. Each returns plain rows/dicts ready for CSV or JSON."""

from __future__ import annotations

import itertools
import math
import time
import warnings
from dataclasses import dataclass

import numpy as np

from . import polyapprox as pa
from .core import CutMaxParams, as_logits, convergence_trace, cutmax
from .encargmax import calibrate_scales, cutmax_he, invsqrt_config_for, league_argmax, tournament_argmax
from .errors import BadSpec, QualityWarning
from .grad import cutmax_jacobian, cutmax_jvp, finite_difference_jvp
from .sampling import SamplerConfig, make_rng, violation_experiment


DIRECTION_STREAM = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class GridCell:
    T: int
    p: tuple[int, ...]
    c: tuple[float, ...]

    def params(self, unchecked: bool = False) -> CutMaxParams:
        return CutMaxParams(self.p, self.c, self.T, unchecked=unchecked)

    def key(self):
        return (self.T, self.p, self.c)

    def label(self) -> tuple[str, str]:
        fmt = lambda vals: "/".join(f"{v:g}" for v in vals) if len(set(vals)) > 1 else f"{vals[0]:g}"
        return fmt(self.p), fmt(self.c)


def _expand(token: str, cast) -> list:
    """``7``, ``7-19/2`` (inclusive range with step) or ``16/4/4/6`` (a per-iteration schedule)."""
    if "-" in token[1:]:
        span, _, step = token.partition("/")
        lo, hi = span.split("-", 1)
        lo, hi, step = cast(lo), cast(hi), cast(step or 1)
        if step <= 0 or hi < lo:
            raise BadSpec(f"bad range {token!r}")
        out, v = [], lo
        while v <= hi + 1e-12:
            out.append(cast(v))
            v += step
        return [(v,) for v in out]
    return [tuple(cast(v) for v in token.split("/"))]


def parse_grid(text: str) -> list[GridCell]:
    """Comma-separated ``T:p:c`` cells; any field may be a range ``a-b/step``, p and c may be schedules."""
    cells = []
    try:
        for item in filter(None, (s.strip() for s in text.split(","))):
            parts = item.split(":")
            if len(parts) != 3:
                raise BadSpec(f"grid cell {item!r} must be T:p:c")
            Ts = [t[0] for t in _expand(parts[0], int)]
            for T, p, c in itertools.product(Ts, _expand(parts[1], int), _expand(parts[2], float)):
                p = p * T if len(p) == 1 else p
                c = c * T if len(c) == 1 else c
                if len(p) != T or len(c) != T:
                    raise BadSpec(f"schedule length does not match T={T} in {item!r}")
                cells.append(GridCell(T, p, c))
    except ValueError as exc:
        raise BadSpec(f"cannot parse grid {text!r}: {exc}") from exc
    if not cells:
        raise BadSpec("empty grid")
    return sorted(set(cells), key=GridCell.key)


def _stack(vectors) -> np.ndarray:
    lengths = {len(v) for v in vectors}
    if len(lengths) != 1:
        raise BadSpec(f"vectors must share one length, got {sorted(lengths)}")
    return as_logits(np.stack([np.asarray(v, dtype=np.float64) for v in vectors]))


def argmax_sweep(vectors, grid: list[GridCell]) -> list[dict]:
    """Recovery rate and top mass per grid cell, in grid-key order."""
    if not grid:
        raise BadSpec("empty grid")
    X = _stack(vectors)
    truth = X.argmax(axis=1)
    rows = []
    for cell in grid:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            Z = cutmax(X, cell.params(unchecked=True))
        top = Z.max(axis=1)
        p, c = cell.label()
        rows.append({
            "T": cell.T, "p": p, "c": c, "n": X.shape[1], "count": X.shape[0],
            "recovery": float(np.mean(Z.argmax(axis=1) == truth)),
            "mean_top_mass": float(top.mean()),
            "max_top_mass": float(top.max()),
        })
    return rows


def best_per_T(rows: list[dict]) -> list[dict]:
    """Highest mean top mass per T among cells with full recovery."""
    best = {}
    for r in rows:
        if r["recovery"] < 1.0:
            continue
        if r["T"] not in best or r["mean_top_mass"] > best[r["T"]]["mean_top_mass"]:
            best[r["T"]] = r
    return [best[t] for t in sorted(best)]


def he_bench(vectors, cell: GridCell, *, alpha_bits: int = 11, slots: int | None = None,
             algorithms=("cutmaxHE", "tournament", "league"), league_max_n: int = 256) -> list[dict]:
    """Accuracy against the plaintext argmax, mean top mass and ledger for each algorithm.

    The ledger is reported for the last input (it does not depend on the
    values). ``wall_clock_s`` times the simulator and is informational only.
    """
    X = _stack(vectors)
    n = X.shape[1]
    truth = X.argmax(axis=1)
    params = cell.params(unchecked=True)
    span = float(X.max() - X.min())
    value_range = (float(X.min()) - 0.01 * span, float(X.max()) + 0.01 * span)
    sign_cfg = pa.sign_preset(alpha_bits)
    out = []
    for algo in algorithms:
        if algo == "league" and n > league_max_n:
            out.append({"algorithm": algo, "n": n, "skipped": f"n > {league_max_n}"})
            continue
        start = time.perf_counter()
        reports = []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", QualityWarning)
            if algo == "cutmaxHE":
                scales = calibrate_scales(X, params)
                isq = invsqrt_config_for(scales, alpha_bits)
                reports = [cutmax_he(x, params, scales, alpha_bits=alpha_bits, invsqrt_cfg=isq, slots=slots)
                           for x in X]
            elif algo == "tournament":
                reports = [tournament_argmax(x, sign_cfg, value_range=value_range, slots=slots) for x in X]
            elif algo == "league":
                reports = [league_argmax(x, sign_cfg, value_range=value_range) for x in X]
            else:
                raise BadSpec(f"unknown algorithm {algo!r}")
        elapsed = time.perf_counter() - start
        last = reports[-1]
        row = {
            "algorithm": algo, "n": n, "s": last.s, "count": len(reports),
            "accuracy": float(np.mean([r.predicted_index == t for r, t in zip(reports, truth)])),
            "mean_top_mass": float(np.mean([r.top_mass for r in reports])),
            "ledger": last.ledger.record(),
            "formulaMults": last.formula_mults, "formulaDepth": last.formula_depth,
            "signStages": last.sign_stages, "params": last.params,
            "wall_clock_s": elapsed, "wall_clock_normative": False,
        }
        out.append(row)
    return out


def nucleus_violation(vectors, cfg: SamplerConfig, draws: int) -> tuple[list[dict], dict]:
    res = violation_experiment([np.asarray(v) for v in vectors], cfg, draws)
    rows = [{"prompt_id": r.prompt_id, "method": r.method, "draws": r.draws,
             "violations": r.violations, "rate": r.rate} for r in res["rows"]]
    summary = {k: v for k, v in res.items() if k != "rows"}
    summary.update({"prompts": len(vectors), "draws": draws, "p": cfg.nucleus_mass, "q": cfg.q,
                    "alpha": cfg.alpha, "seed": cfg.seed})
    return rows, summary


def converge_trace(vectors, cell: GridCell) -> list[dict]:
    params = cell.params(unchecked=True)
    rows = []
    for i, x in enumerate(vectors):
        for e in convergence_trace(x, params):
            rows.append({
                "vector_id": i, "iteration": e.iteration, "mu": e.stats.mu, "s2": e.stats.s2,
                "dispersion": e.stats.dispersion, "frac_below_mean": e.frac_below_mean,
                "top_mass": e.top_mass,
            })
    return rows


def grad_check(vectors, cell: GridCell, seed: int = 0, h: float = 1e-5) -> list[dict]:
    """JVP against central differences along a random direction, plus Jacobian row/column sums."""
    params = cell.params(unchecked=True)
    # a stream distinct from the generator's, else v could equal x (a null direction)
    rng = make_rng(seed ^ DIRECTION_STREAM)
    rows = []
    for i, x in enumerate(vectors):
        x = as_logits(x)
        v = rng.normal(size=x.size)
        jvp = cutmax_jvp(x, v, params)
        fd = finite_difference_jvp(x, v, params, h)
        J = cutmax_jacobian(x, params)
        rows.append({
            "vector_id": i, "n": x.size,
            "rel_error": float(np.linalg.norm(jvp - fd) / max(np.linalg.norm(fd), 1e-12)),
            "row_sum_max": float(np.abs(J.sum(axis=1)).max()),
            "col_sum_max": float(np.abs(J.sum(axis=0)).max()),
        })
    return rows


def default_cell(n: int, T: int = 3, p: int = 3) -> GridCell:
    c = 2.0 * math.sqrt(n - 1)
    return GridCell(T, (p,) * T, (c,) * T)
