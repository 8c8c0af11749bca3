import numpy as np
import pytest

from sns_tfqkd.channel import ChannelModel, expected_observables
from sns_tfqkd.optimizer import SearchSpace, _AXES, _rate, log_rate_slope, optimize, sweep
from sns_tfqkd.protocol import ProtocolParams
from sns_tfqkd.security import analyze

SMALL = SearchSpace(grid_points=8)
CH = ChannelModel(E_a=0.1)


@pytest.mark.parametrize("bad", [dict(mu=(0.0, 1.0)), dict(epsilon=(0.1, 0.6)), dict(lam=(1.0, 0.5)),
                                 dict(p_x=(0.1, 0.7)), dict(grid_points=0)])
def test_search_space_validation(bad):
    with pytest.raises(ValueError):
        SearchSpace(**bad)


def test_grid_spacing():
    s = SearchSpace(grid_points=5)
    assert s.grid("mu")[0] == pytest.approx(1e-6) and s.grid("mu")[-1] == pytest.approx(1.5)
    assert np.allclose(np.diff(np.log(s.grid("epsilon"))), np.log(0.5 / 1e-4) / 4)
    assert np.allclose(np.diff(s.grid("lam")), (2.0 - 0.02) / 4)


def test_vectorized_rate_matches_scalar_analysis():
    p = ProtocolParams(mu=0.07, epsilon=0.02, lam=0.2, p_x=0.15)
    ch = CH.at(80)
    fast = _rate(np.array([p.mu]), np.array([p.epsilon]), np.array([p.lam]), np.array([p.p_x]),
                 ch, p.f, p.n_windows, None)[0]
    assert fast == pytest.approx(analyze(expected_observables(p, ch), p).R, rel=1e-12)


@pytest.mark.parametrize("L", [0.0, 100.0])
def test_optimum_not_below_grid_maximum(L):
    ch = CH.at(L)
    mesh = np.meshgrid(*[SMALL.grid(n) for n in _AXES], indexing="ij")
    grid_best = float(_rate(*mesh, ch, 1.16, 10**12, None).max())
    p, b = optimize(ch, SMALL)
    assert b.R >= grid_best > 0
    for name in _AXES:
        lo, hi = getattr(SMALL, name)
        assert lo <= getattr(p, name) <= hi


def test_positive_rate_at_zero_and_long_distance():
    assert optimize(CH.at(0.0))[1].R > 0
    assert optimize(ChannelModel(E_a=0.3).at(200.0))[1].R > 0


def test_high_misalignment_has_no_key():
    p, b = optimize(ChannelModel(E_a=0.5).at(10.0), SMALL)
    assert b.R == 0.0


def test_single_distance_sweep_equals_optimize():
    (row,) = sweep([70.0], 0.1, SMALL)
    p, b = optimize(CH.at(70.0), SMALL)
    assert row.params == p and row.R == b.R


def test_sweep_order_invariant_and_threaded():
    Ls = [150.0, 0.0, 75.0]
    a = sweep(Ls, 0.1, SMALL)
    b = sweep(sorted(Ls), 0.1, SMALL, threads=2)
    assert [r.L for r in a] == Ls
    by_L = {r.L: r for r in b}
    assert all(r == by_L[r.L] for r in a)


def test_rate_nonincreasing_with_distance():
    rows = sweep(np.arange(0, 401, 50.0), 0.1, SMALL)
    R = [r.R for r in rows]
    assert all(R[i + 1] <= R[i] * 1.05 for i in range(len(R) - 1))


def test_mu_max_caps_intensity():
    p, b = optimize(CH.at(50.0), SMALL, mu_M=0.05)
    assert p.mu <= 0.05 and p.mu_M == 0.05
    assert b.R <= optimize(CH.at(50.0), SMALL)[1].R


def test_negative_distance_rejected():
    with pytest.raises(ValueError):
        sweep([-1.0], 0.1, SMALL)


def test_log_rate_slope():
    from sns_tfqkd.optimizer import SweepRow
    rows = [SweepRow(L, None, 10 ** (-3 - 0.005 * L), 0, 0, 0) for L in (0, 50, 100, 150)]
    assert log_rate_slope(rows, 0, 200) == pytest.approx(-0.005)
    with pytest.raises(ValueError):
        log_rate_slope(rows, 0, 10)
