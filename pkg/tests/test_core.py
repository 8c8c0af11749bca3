import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sns_tfqkd.core import (
    FIBER_LOSS_EXPONENT,
    DEFAULT_LOSS_EXPONENT,
    Z0,
    Z1,
    binary_entropy,
    channel_transmittance,
    density_distance,
    poisson_pmf,
    projector,
    validate_density,
)
from sns_tfqkd.channel import ChannelModel
from sns_tfqkd.protocol import x_states

unit = st.floats(0.0, 1.0, allow_nan=False)
phase = st.floats(0.0, 2 * math.pi, allow_nan=False)


@pytest.mark.parametrize(
    "x, expected",
    [
        (0.5, 1.0),
        (0.0, 0.0),
        (1.0, 0.0),
        # mpmath, 40 digits
        (0.11, 0.4999159581645279956),
    ],
)
def test_binary_entropy_values(x, expected):
    assert binary_entropy(x) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("bad", [-1e-9, 1.0000001, float("nan")])
def test_binary_entropy_domain(bad):
    with pytest.raises(ValueError):
        binary_entropy(bad)


def test_binary_entropy_vectorized():
    h = binary_entropy(np.array([0.0, 0.11, 0.5, 1.0]))
    assert h.shape == (4,)
    assert h[2] == 1.0 and h[0] == 0.0 and h[3] == 0.0


@given(unit)
def test_binary_entropy_symmetric(x):
    assert binary_entropy(x) == pytest.approx(binary_entropy(1.0 - x), abs=1e-12)


def test_poisson_values():
    assert poisson_pmf(0, 0.7) == pytest.approx(math.exp(-0.7), rel=1e-15)
    assert poisson_pmf(1, 1.0) == pytest.approx(0.36787944117144232, rel=1e-14)
    assert poisson_pmf(3, 0.0) == 0.0
    assert sum(poisson_pmf(k, 0.3) for k in range(41)) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(0.0, 50.0))
def test_poisson_normalized(mu):
    kmax = math.ceil(mu + 40 * math.sqrt(mu) + 40)
    assert abs(sum(poisson_pmf(k, mu) for k in range(kmax + 1)) - 1.0) < 1e-12


def test_poisson_domain():
    with pytest.raises(ValueError):
        poisson_pmf(0, -0.1)
    with pytest.raises(ValueError):
        poisson_pmf(-1, 0.1)


def test_transmittance_values():
    assert channel_transmittance(0) == 1.0
    assert channel_transmittance(100) == pytest.approx(0.1, rel=1e-14)
    assert channel_transmittance(200) == pytest.approx(0.01, rel=1e-14)
    fiber = ChannelModel(loss_exponent_per_km=FIBER_LOSS_EXPONENT)
    assert channel_transmittance(50, fiber) == pytest.approx(0.1, rel=1e-14)
    assert DEFAULT_LOSS_EXPONENT == 0.01
    with pytest.raises(ValueError):
        channel_transmittance(-1.0)


@given(st.floats(0, 500), st.floats(0, 500))
def test_transmittance_multiplicative(a, b):
    assert channel_transmittance(a + b) == pytest.approx(
        channel_transmittance(a) * channel_transmittance(b), rel=1e-12, abs=1e-300
    )


@given(st.floats(0, 500), st.floats(1e-3, 100))
def test_transmittance_decreasing(L, dL):
    assert channel_transmittance(L + dL) < channel_transmittance(L)


def test_density_distance_examples():
    rho = projector([1, 1j])
    assert density_distance(rho, rho) == pytest.approx(0.0, abs=1e-15)
    assert density_distance(projector(Z0), projector(Z1)) == pytest.approx(1.0, abs=1e-15)


@given(phase, phase)
def test_density_distance_mixtures_equal(ra, rb):
    plus, minus = x_states(ra, rb)
    mix_x = 0.5 * (projector(plus) + projector(minus))
    mix_z = 0.5 * (projector(Z0) + projector(Z1))
    assert density_distance(mix_x, mix_z) < 1e-12


def _random_rho(rng):
    a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    m = a @ a.conj().T
    return m / np.trace(m)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_density_distance_is_metric(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (_random_rho(rng) for _ in range(3))
    dab, dbc, dac = density_distance(a, b), density_distance(b, c), density_distance(a, c)
    assert 0.0 <= dab <= 1.0 + 1e-12
    assert dab == pytest.approx(density_distance(b, a), abs=1e-12)
    assert dac <= dab + dbc + 1e-10


def test_validate_density_rejects():
    with pytest.raises(ValueError):
        validate_density(np.eye(2))  # trace 2
    with pytest.raises(ValueError):
        validate_density(np.array([[1.5, 0], [0, -0.5]]))
    with pytest.raises(ValueError):
        validate_density(np.array([[0.5, 0.5], [0.0, 0.5]]))
