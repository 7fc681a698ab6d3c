import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polyargmax import polyapprox as pa
from polyargmax.errors import InvalidParams, RangeError
from polyargmax.hesim import SlotContext


def goldschmidt_reference(x, d):
    """The product formula, factor by factor."""
    out = 1.0
    for i in range(d + 1):
        out *= 1.0 + (1.0 - x) ** (2 ** i)
    return out


# -- inverse --

@pytest.mark.parametrize("d", [0, 1, 5, 12])
def test_inv_of_one_is_exact(d):
    assert pa.inv(1.0, pa.ApproxConfig(d)) == 1.0


@pytest.mark.parametrize("x,target", [(0.5, 2.0), (1.5, 2.0 / 3.0)])
def test_inv_examples(x, target):
    cfg = pa.ApproxConfig(5)
    got = pa.inv(x, cfg)
    assert got == pytest.approx(goldschmidt_reference(x, 5), rel=1e-15)
    assert abs(got - target) <= 2.0 ** -7


@settings(max_examples=100)
@given(st.floats(0.01, 1.99), st.integers(0, 8))
def test_inv_matches_product_formula(x, d):
    assert pa.inv(x, pa.ApproxConfig(d)) == pytest.approx(goldschmidt_reference(x, d), rel=1e-12)


@pytest.mark.parametrize("x", [0.0, 2.0, -0.1, 3.0])
def test_inv_range_error(x):
    with pytest.raises(RangeError):
        pa.inv(x, pa.ApproxConfig(3))


def test_inv_error_bound_is_tight_on_the_grid():
    lo, hi = 2.0 ** -6, 1.0
    for d in range(3, 11):
        xs = np.linspace(lo, hi, 20001)
        err = np.max(np.abs(pa.inv(xs, pa.ApproxConfig(d)) - 1 / xs))
        assert err <= pa.inv_error_bound(d, lo, hi) + 1e-13
        assert err >= 0.5 * pa.inv_error_bound(d, lo, hi)


def test_inv_preset_and_scaled_variant():
    cfg = pa.inv_preset(7)
    assert cfg.iterations == 9
    cfg = pa.inv_scaled_preset(11, (10.0, 50.0))
    xs = np.linspace(10, 50, 1001)
    assert np.max(np.abs(pa.inv_scaled(xs, cfg) - 1 / xs)) <= 2.0 ** -11
    with pytest.raises(RangeError):
        pa.inv_scaled(60.0, cfg)


# -- inverse square root --

def test_invsqrt_examples():
    cfg = pa.invsqrt_preset(7)
    assert abs(pa.invsqrt(0.25, cfg) - 2.0) <= 2.0 ** -7
    # the seed is fitted for worst-case error, so x=1 is accurate, not exact
    assert abs(pa.invsqrt(1.0, cfg) - 1.0) <= 2.0 ** -7


def test_invsqrt_seed_beats_least_squares_fit():
    ratio = 2.0 ** -6
    xs = np.geomspace(ratio, 1, 5001)
    a, b = pa.invsqrt_seed(ratio)
    e = (a + b * xs) * np.sqrt(xs) - 1
    fitted = np.max(np.abs(e * e * (3 + e) / 2))
    design = np.stack([np.sqrt(xs), xs * np.sqrt(xs)], axis=1)
    a0, b0 = np.linalg.lstsq(design, np.ones_like(xs), rcond=None)[0]
    e0 = (a0 + b0 * xs) * np.sqrt(xs) - 1
    assert fitted < np.max(np.abs(e0 * e0 * (3 + e0) / 2))


def test_invsqrt_config_finds_minimal_iterations():
    cfg = pa.invsqrt_config(1e-3, 11)
    xs = np.geomspace(1e-3, 1, 5001)
    assert np.max(np.abs(pa.invsqrt(xs, cfg) - xs ** -0.5)) <= 2.0 ** -11
    fewer = pa.ApproxConfig(cfg.iterations - 1, cfg.input_range, 11)
    assert np.max(np.abs(pa.invsqrt(xs, fewer) - xs ** -0.5)) > 2.0 ** -11


def test_rescaled_invsqrt():
    cfg = pa.invsqrt_preset(9)
    xs = np.linspace(0.5, 64.0, 2001)
    got = pa.rescaled_invsqrt(xs, cfg, 64.0)
    np.testing.assert_allclose(got, xs ** -0.5, atol=2.0 ** -9)


def test_invsqrt_range_error():
    with pytest.raises(RangeError):
        pa.invsqrt(2.0, pa.invsqrt_preset(7))


# -- sign --

def test_sign_examples():
    cfg = pa.sign_preset(7)
    assert pa.sign(0.0, cfg) == 0.0
    pos = pa.sign(0.5, cfg)
    assert abs(pos - 1.0) <= 2.0 ** -7
    assert pa.sign(-0.5, cfg) == -pos


@settings(max_examples=100)
@given(st.floats(-1, 1), st.sampled_from([7, 9, 11, 13]))
def test_sign_is_odd_and_bounded(x, alpha):
    cfg = pa.sign_preset(alpha)
    s = pa.sign(x, cfg)
    assert pa.sign(-x, cfg) == -s
    assert abs(s) <= 1.0 + 2.0 ** -alpha


def test_sign_range_error():
    with pytest.raises(RangeError):
        pa.sign(1.5, pa.sign_preset(7))


def test_sign_floor_is_the_accuracy_boundary():
    for alpha in (7, 9, 11, 13):
        cfg = pa.sign_preset(alpha)
        lo = cfg.input_range[0]
        assert abs(pa.sign(lo, cfg) - 1) <= cfg.tolerance
        assert abs(pa.sign(0.98 * lo, cfg) - 1) > cfg.tolerance


@pytest.mark.parametrize("s,expected", [(1.0, 1.0), (-1.0, 0.0), (0.0, 0.5)])
def test_indicator(s, expected):
    assert pa.indicator(s) == expected


# -- envelopes --

@pytest.mark.parametrize("alpha", [7, 9, 11])
def test_error_envelope_on_guaranteed_domains(alpha):
    rng = np.random.default_rng(alpha)
    cfg = pa.inv_preset(alpha)
    xs = rng.uniform(*cfg.input_range, size=10_000)
    assert np.max(np.abs(pa.inv(xs, cfg) - 1 / xs)) <= cfg.tolerance
    cfg = pa.invsqrt_preset(alpha)
    xs = rng.uniform(*cfg.input_range, size=10_000)
    assert np.max(np.abs(pa.invsqrt(xs, cfg) - xs ** -0.5)) <= cfg.tolerance
    cfg = pa.sign_preset(alpha)
    xs = rng.uniform(*cfg.input_range, size=10_000) * rng.choice([-1, 1], size=10_000)
    assert np.max(np.abs(pa.sign(xs, cfg) - np.sign(xs))) <= cfg.tolerance


def test_cost_table_trend():
    assert [pa.table_row("sign", a) for a in (7, 9, 11, 13)] == [(7, 14), (9, 18), (11, 22), (12, 24)]
    assert [pa.table_row("invsqrt", a) for a in (7, 9, 11, 13)] == [(5, 10), (6, 12), (7, 14), (8, 16)]


def test_cost_rejects_unknown_name():
    with pytest.raises(InvalidParams):
        pa.cost("exp", pa.ApproxConfig(3))


# -- ledger consistency --

def _run(name, cfg, ckks):
    ctx = SlotContext(8, count_scalar_mults=ckks)
    x = ctx.encrypt(np.linspace(*cfg.input_range, 8) if name != "sign" else np.linspace(-1, 1, 8))
    fn = {"inv": pa.inv, "invsqrt": pa.invsqrt, "sign": pa.sign}[name]
    out = fn(x, cfg)
    return ctx.ledger.mults, out.depth


@pytest.mark.parametrize("ckks", [False, True])
@pytest.mark.parametrize("name,cfg", [
    ("inv", pa.ApproxConfig(0, (0.5, 1.5))),
    ("inv", pa.ApproxConfig(7, (0.5, 1.5))),
    ("invsqrt", pa.invsqrt_preset(7)),
    ("invsqrt", pa.invsqrt_preset(13)),
    ("sign", pa.sign_preset(7)),
    ("sign", pa.sign_preset(11)),
])
def test_advertised_cost_equals_ledger_delta(name, cfg, ckks):
    c = pa.cost(name, cfg, count_scalar_mults=ckks)
    assert _run(name, cfg, ckks) == (c.mults, c.depth)
    assert c.depth <= c.mults or c.mults == 0


def test_slot_and_plain_evaluation_agree():
    cfg = pa.invsqrt_preset(9)
    xs = np.linspace(*cfg.input_range, 16)
    ctx = SlotContext(16)
    np.testing.assert_allclose(pa.invsqrt(ctx.encrypt(xs), cfg).decrypt(), pa.invsqrt(xs, cfg), rtol=1e-12)


def test_config_validation():
    for kwargs in (dict(iterations=-1), dict(iterations=2.5), dict(iterations=2, input_range=(1.0, 0.5)),
                   dict(iterations=2, steep_iterations=3)):
        with pytest.raises(InvalidParams):
            pa.ApproxConfig(**kwargs)
    assert pa.ApproxConfig(3, alpha_bits=9).tolerance == 2.0 ** -9
    assert math.isclose(pa.ApproxConfig(3).input_range[0], 2.0 ** -6)
