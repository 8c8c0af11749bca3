"""Statistical self-checks shared by the ``verify`` command and the test suite."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .channel import ChannelModel, ObservedCounts, expected_observables, monte_carlo_observables
from .protocol import ProtocolParams, check_source_equivalence
from .security import analyze, single_photon_e1ph

# Point used for the soundness runs: enough counts per window that 8e6 windows
# give < 1 % relative spread on the bounds, yet multi-photon slack stays small.
SOUNDNESS_PARAMS = ProtocolParams(mu=0.2, epsilon=0.5, lam=1.0, p_x=0.5, n_windows=8 * 10**6)
SOUNDNESS_CHANNEL = ChannelModel(L=20.0, E_a=0.1)

AGREEMENT_PARAMS = ProtocolParams(mu=0.4, epsilon=0.05, lam=0.3, p_x=0.2, n_windows=10**8)
AGREEMENT_CHANNEL = ChannelModel(L=50.0, E_a=0.1)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def source_equivalence_check(n_pairs: int = 1000, seed: int = 0, tol: float = 1e-12) -> CheckResult:
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * math.pi, size=(n_pairs, 2))
    worst_d = worst_map = 0.0
    for rho_a, rho_b in phases:
        chk = check_source_equivalence(rho_a, rho_b)
        worst_d = max(worst_d, chk.distance)
        worst_map = max(worst_map, chk.mapping_error)
    ok = worst_d < tol and worst_map < tol
    return CheckResult(
        "source-equivalence", ok,
        f"max trace distance {worst_d:.3e}, max mapping error {worst_map:.3e} over {n_pairs} phase pairs",
    )


def tally_z_scores(observed: ObservedCounts, expected: ObservedCounts, n_windows: int) -> dict[str, float]:
    """Standardized deviation of each tally, treating it as a binomial count over windows."""
    z = {}
    for f in fields(ObservedCounts):
        o, e = float(getattr(observed, f.name)), float(getattr(expected, f.name))
        var = e * (1.0 - e / n_windows)
        if var <= 0:
            z[f.name] = 0.0 if o == e else math.inf
        else:
            z[f.name] = (o - e) / math.sqrt(var)
    return z


def agreement_check(
    params: ProtocolParams = AGREEMENT_PARAMS,
    ch: ChannelModel = AGREEMENT_CHANNEL,
    seed: int = 0,
    threads: int = 1,
    sigmas: float = 4.0,
) -> CheckResult:
    counts, _ = monte_carlo_observables(params, ch, seed, threads=threads)
    z = tally_z_scores(counts, expected_observables(params, ch), params.n_windows)
    worst = max(z, key=lambda k: abs(z[k]))
    ok = all(abs(v) <= sigmas for v in z.values())
    return CheckResult(
        "mc-vs-analytic", ok,
        f"{len(z)} tallies at N={params.n_windows:.3g}, worst {worst} at {z[worst]:+.2f} sigma (limit {sigmas})",
    )


@dataclass
class SoundnessSummary:
    trials: int
    n1_sound: int
    e1ph_sound: int
    both_sound: int
    n1_rel_spread: float
    e1ph_rel_spread: float


def soundness_runs(
    params: ProtocolParams = SOUNDNESS_PARAMS,
    ch: ChannelModel = SOUNDNESS_CHANNEL,
    trials: int = 100,
    seed: int = 0,
    threads: int = 1,
    fault: float = 0.0,
) -> SoundnessSummary:
    seeds = np.random.SeedSequence(seed).generate_state(trials)
    n1_ok = e1_ok = both = 0
    n1_vals, e1_vals = [], []
    for s in seeds:
        counts, truth = monte_carlo_observables(params, ch, int(s), threads=threads)
        b = analyze(counts, params, fault=fault)
        a = b.n1_L <= truth.true_n1
        c = b.e1ph_U >= single_photon_e1ph(truth)
        n1_ok += a
        e1_ok += c
        both += a and c
        n1_vals.append(b.n1_L)
        e1_vals.append(b.e1ph_U)
    spread = lambda v: float(np.std(v, ddof=1) / abs(np.mean(v))) if len(v) > 1 else 0.0
    return SoundnessSummary(trials, n1_ok, e1_ok, both, spread(n1_vals), spread(e1_vals))


def soundness_check(trials: int = 100, seed: int = 0, threads: int = 1, fault: float = 0.0,
                    min_fraction: float = 0.99, **kw) -> CheckResult:
    s = soundness_runs(trials=trials, seed=seed, threads=threads, fault=fault, **kw)
    ok = s.both_sound >= min_fraction * s.trials
    return CheckResult(
        "bound-soundness", ok,
        f"n1_L <= true n1 in {s.n1_sound}/{s.trials}, e1ph_U >= true e1ph in {s.e1ph_sound}/{s.trials} "
        f"(both {s.both_sound}); relative spread n1_L {s.n1_rel_spread:.2%}, e1ph_U {s.e1ph_rel_spread:.2%}",
    )
