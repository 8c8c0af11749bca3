"""Acceptance criteria, one test each; results are also printed in the terminal summary."""

import math
import time
from dataclasses import replace
from decimal import Decimal, getcontext

import numpy as np
import pytest

from sns_tfqkd.channel import ChannelModel, monte_carlo_observables
from sns_tfqkd.core import DEFAULT_LOSS_EXPONENT
from sns_tfqkd.optimizer import log_rate_slope, optimize, sweep
from sns_tfqkd.protocol import ProtocolParams
from sns_tfqkd.security import key_length, single_photon_e1ph
from sns_tfqkd.verify import agreement_check, soundness_runs, source_equivalence_check

DEFAULT_CH = ChannelModel(loss_exponent_per_km=DEFAULT_LOSS_EXPONENT, eta_d=0.8, p_d=1e-11)
DISTANCES = [10.0 * i for i in range(41)]


@pytest.fixture(scope="module")
def default_sweep():
    t0 = time.perf_counter()
    rows = sweep(DISTANCES, 0.10, channel=DEFAULT_CH, f=1.16)
    return rows, time.perf_counter() - t0


def test_1_long_distance_key(default_sweep, record):
    rows, elapsed = default_sweep
    by_L = {r.L: r for r in rows}
    _, b200 = optimize(replace(DEFAULT_CH, E_a=0.30).at(200.0), f=1.16)
    ok = b200.R > 0 and by_L[300.0].R > 0 and elapsed < 300
    record(1, "long-distance key", ok,
           f"R(200 km, E_a=0.30)={b200.R:.3e}, R(300 km, E_a=0.10)={by_L[300.0].R:.3e}, "
           f"0-400 km sweep in {elapsed:.1f} s (limit 300 s)")
    assert ok


def test_2_square_root_scaling(default_sweep, record):
    rows, _ = default_sweep
    slope = log_rate_slope(rows, 50.0, 200.0)
    target = -DEFAULT_LOSS_EXPONENT / 2
    ok = abs(slope - target) <= 0.3 * abs(target)
    record(2, "sqrt(eta) scaling", ok,
           f"slope of log10 R over 50-200 km = {slope:.5f}/km, target {target:.5f} +/- 30%")
    assert ok


def test_3_monte_carlo_agreement(record):
    t0 = time.perf_counter()
    res = agreement_check(seed=2024)
    elapsed = time.perf_counter() - t0
    ok = res.passed and elapsed < 600
    record(3, "Monte Carlo vs analytic", ok, f"{res.detail}; {elapsed:.1f} s (limit 600 s)")
    assert ok


def test_4_bound_soundness(record):
    s = soundness_runs(trials=100, seed=7)
    ok = s.trials >= 100 and s.both_sound >= 0.99 * s.trials
    record(4, "bound soundness", ok,
           f"n1_L <= true n1 and e1ph_U >= true e1ph in {s.both_sound}/{s.trials} runs (need 99%); "
           f"relative spread n1_L {s.n1_rel_spread:.2%}, e1ph_U {s.e1ph_rel_spread:.2%}")
    assert ok


def test_5_source_equivalence(record):
    res = source_equivalence_check(n_pairs=1000, seed=5, tol=1e-12)
    record(5, "source equivalence", res.passed, res.detail)
    assert res.passed


def _key_length_decimal(n1, e1, n_t, ez, f):
    getcontext().prec = 50
    ln2 = Decimal(2).ln()

    def h(x):
        x = Decimal(x)
        return -(x * x.ln() + (1 - x) * (1 - x).ln()) / ln2

    return Decimal(n1) * (1 - h(e1)) - Decimal(n_t) * Decimal(f) * h(ez)


def test_6_formula_spot_checks(record):
    ref = _key_length_decimal("1000", "0.05", "2000", "0.01", "1.16")
    got = key_length(1000.0, 0.05, 2000.0, 0.01, 1.16)
    kl_err = abs(Decimal(got) - ref)

    # Single-photon source: every pulse carries exactly one photon, so the
    # phase-flip estimate must equal the X-window error rate.
    params = ProtocolParams(mu=0.5, epsilon=0.5, lam=0.5, p_x=0.5, n_windows=2 * 10**6)
    ch = ChannelModel(L=0.0, E_a=0.1)
    diffs = []
    for s in np.random.SeedSequence(6).generate_state(20):
        counts, truth = monte_carlo_observables(params, ch, int(s), source="single")
        diffs.append(single_photon_e1ph(truth) - counts.n_X1 / (counts.n_X0 + counts.n_X1))
    diffs = np.array(diffs)
    sigma = diffs.std(ddof=1) / math.sqrt(diffs.size)
    z = diffs.mean() / sigma
    ok = kl_err < Decimal("0.1") and abs(z) <= 4.0
    record(6, "formula spot-checks", ok,
           f"key_length = {got:.9f} vs 50-digit reference {float(ref):.9f} (|diff| {float(kl_err):.1e} bit); "
           f"single-photon e1ph minus measured X error = {diffs.mean():+.2e} ({z:+.2f} sigma, 20 seeds)")
    assert ok


def test_7_no_interference_no_key(record):
    rows = sweep(DISTANCES[1:], 0.5, channel=DEFAULT_CH, f=1.16)
    positive = [r.L for r in rows if r.R > 0]
    ok = not positive
    record(7, "zero-visibility degradation", ok,
           f"R = 0 at {len(rows) - len(positive)}/{len(rows)} distances in 10-400 km"
           + (f"; positive at {positive}" if positive else ""))
    assert ok
