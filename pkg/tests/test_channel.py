import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beamra.channel import (
    NO_POWER,
    LinkParams,
    decode,
    decode_many,
    interference_power,
    path_loss,
    received_power,
)
from beamra.geometry import Beam

TABLE = LinkParams()


@pytest.mark.parametrize("d, expected", [
    (1.0, 120.9),
    (10.0, 158.5),
    (5.0, 120.9 + 37.6 * math.log10(5.0)),
])
def test_path_loss(d, expected):
    assert path_loss(d) == pytest.approx(expected, abs=1e-12)


def test_path_loss_five_km_magnitude():
    assert path_loss(5.0) == pytest.approx(147.18, abs=0.01)


@pytest.mark.parametrize("d", [0.0, -1.0])
def test_path_loss_rejects_non_positive(d):
    with pytest.raises(ValueError):
        path_loss(d)


def test_received_power_boresight():
    b = Beam(0.7, math.pi / 3)
    assert received_power(TABLE, b, 0.7, 1.0) == pytest.approx(-79.9, abs=1e-12)
    assert received_power(TABLE, b, 0.7, 1.0, chi=8.0) == pytest.approx(-71.9, abs=1e-12)


def test_received_power_half_amplitude():
    # find the offset where a 7-element beam has amplitude 0.5 and check the 6.02 dB drop
    from scipy.optimize import brentq

    from beamra.antenna import array_factor_gain
    b = Beam(0.0, math.pi / 6)
    off = brentq(lambda x: array_factor_gain(b, x) - 0.5, 0.0, 0.4)
    expected = -79.9 + 20 * math.log10(0.5)
    assert received_power(TABLE, b, off, 1.0) == pytest.approx(expected, abs=1e-9)


def test_received_power_decreases_with_distance_and_offset():
    b = Beam(0.0, math.pi / 6)
    d = np.linspace(0.01, 10, 500)
    assert np.all(np.diff(received_power(TABLE, b, 0.0, d)) < 0)
    off = np.linspace(0.0, 0.4, 200)
    assert np.all(np.diff(received_power(TABLE, b, off, 1.0)) < 0)


@pytest.mark.parametrize("n", [1, 2, 10])
def test_interference_of_equal_terms(n):
    assert abs(interference_power([-100.0] * n) - (-100.0 + 10 * math.log10(n))) <= 1e-9


def test_interference_examples():
    assert interference_power([-100.0]) == -100.0
    assert interference_power([-100.0, -100.0]) == pytest.approx(-96.98970004336019, abs=1e-12)
    assert interference_power([]) == NO_POWER


def test_interference_skips_silent_terms():
    assert interference_power([-100.0, NO_POWER]) == -100.0


@given(st.lists(st.floats(-200, 50), min_size=1, max_size=20), st.floats(-200, 50), st.randoms())
@settings(max_examples=200, deadline=None)
def test_interference_permutation_and_monotone(powers, extra, rnd):
    base = interference_power(powers)
    shuffled = list(powers)
    rnd.shuffle(shuffled)
    assert interference_power(shuffled) == pytest.approx(base, abs=1e-9)
    # adding a term raises the sum; when it is far below the rest the increase is
    # smaller than a double can show, so only require non-decrease there
    more = interference_power(powers + [extra])
    assert more >= base
    if extra >= base - 100:
        assert more > base


@pytest.mark.parametrize("r, i, expected", [
    (-106.0, -108.0, True),
    (-106.0, NO_POWER, True),
    (-106.0, 10.0, False),
    (-106.0, 4.0, False),   # margin exactly -110 is not strictly above
])
def test_decode_examples(r, i, expected):
    assert decode(r, i, -110.0) is expected
    assert bool(decode_many(np.array([r]), np.array([i]), -110.0)[0]) is expected


def test_decode_null_signal_fails():
    assert decode(NO_POWER, NO_POWER, -110.0) is False


def test_decode_monotone_random_triples():
    rng = np.random.default_rng(7)
    r = rng.uniform(-200, 0, 10_000)
    i = rng.uniform(-200, 0, 10_000)
    g = rng.uniform(-150, 50, 10_000)
    dr = rng.uniform(0, 30, 10_000)
    di = rng.uniform(0, 30, 10_000)
    for rr, ii, gg, a, b in zip(r, i, g, dr, di):
        if decode(rr, ii, gg):
            assert decode(rr + a, ii, gg)
            assert decode(rr, ii - b, gg)
            assert decode(rr, NO_POWER, gg)


def test_decode_many_matches_scalar():
    rng = np.random.default_rng(1)
    r = rng.uniform(-150, -50, 500)
    i = np.where(rng.random(500) < 0.2, NO_POWER, rng.uniform(-150, -50, 500))
    got = decode_many(r, i, 3.0)
    assert got.tolist() == [decode(a, b, 3.0) for a, b in zip(r, i)]


def test_link_params_validation():
    with pytest.raises(ValueError):
        LinkParams(sigma_shadow=-1.0)
    with pytest.raises(ValueError):
        LinkParams(pl_b=0.0)
    assert TABLE.budget == 41.0
