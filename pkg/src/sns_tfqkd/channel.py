"""Channel, interference and detection model, analytic and Monte Carlo.

Both arms have transmittance ``eta_d * sqrt(eta_ch(L))``. The two weak beams
meet on a balanced beamsplitter whose interference term is scaled by the
visibility ``V = 1 - 2 E_a``; each output port has a threshold detector with
independent dark counts. An *effective event* is a window in which exactly
one detector clicks.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from .core import DEFAULT_LOSS_EXPONENT, channel_transmittance
from .protocol import (
    ProtocolParams,
    WindowClass,
    classify_windows,
    phase_slice_accept,
    sample_windows,
    slice_half_width,
    TWO_PI,
)

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)

DEFAULT_BATCH = 1 << 20


@dataclass(frozen=True)
class ChannelModel:
    L: float = 0.0
    loss_exponent_per_km: float = DEFAULT_LOSS_EXPONENT
    eta_d: float = 0.8
    p_d: float = 1e-11
    E_a: float = 0.1

    def __post_init__(self):
        if not self.L >= 0:
            raise ValueError(f"distance must be >= 0, got {self.L}")
        if not self.loss_exponent_per_km >= 0:
            raise ValueError("loss exponent must be >= 0")
        for name in ("eta_d", "p_d", "E_a"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {v}")

    @property
    def visibility(self) -> float:
        return 1.0 - 2.0 * self.E_a

    @property
    def arm_transmittance(self) -> float:
        """Per-arm transmittance including detector efficiency (each arm spans L/2)."""
        return self.eta_d * math.sqrt(channel_transmittance(self.L, self))

    def at(self, L: float) -> "ChannelModel":
        return ChannelModel(L, self.loss_exponent_per_km, self.eta_d, self.p_d, self.E_a)


@dataclass
class ObservedCounts:
    """Publicly observable tallies over ``N`` windows.

    ``N_X`` counts every slice-accepted X-X pair and ``N_Z`` every set-C pulse
    available to the estimation subsets; the analysis shrinks them to the
    matched subset sizes. Values are expectations (floats, possibly arrays) in
    analytic mode and integers in Monte Carlo mode.
    """

    N_X: float
    N_Z: float
    n_X0: float
    n_X1: float
    n_Z0: float
    n_Z1: float
    n_t: float
    n_err_Z: float
    N_C: float
    N_00: float
    k_00_0: float
    k_00_1: float

    def as_dict(self) -> dict:
        return asdict(self)

    def scaled(self, k: float) -> "ObservedCounts":
        return ObservedCounts(**{name: v * k for name, v in asdict(self).items()})


@dataclass
class GroundTruth:
    """Photon-number-tagged tallies that only a simulation can know.

    ``M_X`` and ``M_Z`` are the numbers of single-photon pulses in the X pool
    and in set C; the ``n_*`` fields count their effective events per detector.
    """

    M_X: int = 0
    n_plus0: int = 0
    n_plus1: int = 0
    M_Z: int = 0
    n_Z0: int = 0
    n_Z1: int = 0

    @property
    def true_n1(self) -> int:
        return self.n_Z0 + self.n_Z1

    @property
    def true_single_photon_X_errors(self) -> int:
        return self.n_plus1

    @property
    def matching_scale(self) -> float:
        """Factor that rescales the X-pool tallies to exactly half the Z single-photon count."""
        return self.M_Z / (2.0 * self.M_X)

    @property
    def n_minus0(self) -> float:
        return self.n_Z0 - self.matching_scale * self.n_plus0


def click_probabilities(I_A, I_B, delta, ch: ChannelModel):
    """Click probabilities ``(p_D0, p_D1)`` for source intensities ``I_A``, ``I_B``.

    ``delta`` is the relative phase of the two beams after compensation; D0 is
    the constructive port at ``delta = 0``. Broadcasts over array inputs.
    """
    m0, m1 = _port_means(I_A, I_B, delta, ch.arm_transmittance, ch.visibility)
    log_q = math.log1p(-ch.p_d) if ch.p_d < 1.0 else -math.inf
    return -np.expm1(log_q - m0), -np.expm1(log_q - m1)


def _port_means(I_A, I_B, delta, eta_a, V):
    I_A = np.asarray(I_A, dtype=float)
    I_B = np.asarray(I_B, dtype=float)
    if np.any(I_A < 0) or np.any(I_B < 0):
        raise ValueError("intensities must be >= 0")
    common = 0.5 * (I_A + I_B) * eta_a
    interference = V * np.sqrt(I_A * I_B) * eta_a * np.cos(delta)
    return common + interference, common - interference


def _single_click(m0, m1, p_d):
    """P(only D0 clicks), P(only D1 clicks) for Poisson port means m0, m1."""
    # expm1 keeps precision when both p_d and the port means are tiny
    log_q = math.log1p(-p_d) if p_d < 1.0 else -math.inf
    n0 = np.exp(log_q - m0)
    n1 = np.exp(log_q - m1)
    return -np.expm1(log_q - m0) * n1, -np.expm1(log_q - m1) * n0


def _expected(mu, eps, lam, p_x, n_windows, ch: ChannelModel) -> ObservedCounts:
    """Broadcasting core of :func:`expected_observables`."""
    mu = np.asarray(mu, dtype=float)
    eps = np.asarray(eps, dtype=float)
    lam = np.asarray(lam, dtype=float)
    p_x = np.asarray(p_x, dtype=float)
    eta_a, V, p_d = ch.arm_transmittance, ch.visibility, ch.p_d
    N = float(n_windows)
    p_z = 1.0 - p_x

    # X-X pairs: integrate over the accepted slice |delta| <= theta.
    theta = slice_half_width(lam)[..., None]
    x = 0.5 * theta * (_GL_NODES + 1.0)
    m = (mu * eta_a)[..., None]
    a0, a1 = _single_click(0.5 * m * (1 + V * np.cos(x)), 0.5 * m * (1 - V * np.cos(x)), p_d)
    half = 0.5 * theta[..., 0]
    n_xx = N * p_x**2
    n_X0 = n_xx * (half * (a0 @ _GL_WEIGHTS)) / math.pi
    n_X1 = n_xx * (half * (a1 @ _GL_WEIGHTS)) / math.pi
    N_X = n_xx * np.arccos(1.0 - lam) / math.pi

    # Z-Z, exactly one sender: each port sees mu/4 * eta_a.
    N_C = N * p_z**2 * 2.0 * eps * (1.0 - eps)
    c0, c1 = _single_click(0.25 * mu * eta_a, 0.25 * mu * eta_a, p_d)
    n_Z0 = N_C * c0
    n_Z1 = N_C * c1

    # Z-Z, both sent: no phase announcement, so delta is uniform on the circle.
    y = 0.5 * math.pi * (_GL_NODES + 1.0)
    b0, b1 = _single_click(0.5 * m * (1 + V * np.cos(y)), 0.5 * m * (1 - V * np.cos(y)), p_d)
    both_eff = N * p_z**2 * eps**2 * (0.5 * ((b0 + b1) @ _GL_WEIGHTS))

    N_00 = N * p_z**2 * (1.0 - eps) ** 2
    v0 = p_d * (1.0 - p_d)
    k_00 = N_00 * v0
    none_eff = 2.0 * k_00

    n_err = both_eff + none_eff
    n_t = n_Z0 + n_Z1 + n_err
    return ObservedCounts(
        N_X=N_X, N_Z=N_C, n_X0=n_X0, n_X1=n_X1, n_Z0=n_Z0, n_Z1=n_Z1,
        n_t=n_t, n_err_Z=n_err, N_C=N_C, N_00=N_00, k_00_0=k_00, k_00_1=k_00,
    )


def expected_observables(params: ProtocolParams, ch: ChannelModel) -> ObservedCounts:
    """Expected tallies over ``params.n_windows`` windows."""
    out = _expected(params.mu, params.epsilon, params.lam, params.p_x, params.n_windows, ch)
    return ObservedCounts(**{f.name: float(getattr(out, f.name)) for f in fields(out)})


# Monte Carlo ---------------------------------------------------------------

_TALLY_NAMES = (
    "N_X", "n_X0", "n_X1", "N_C", "n_Z0", "n_Z1", "n_t", "n_err_Z",
    "N_00", "k_00_0", "k_00_1",
    "gt_M_X", "gt_n_plus0", "gt_n_plus1", "gt_M_Z", "gt_n_Z0", "gt_n_Z1",
)
_T = {name: i for i, name in enumerate(_TALLY_NAMES)}


def _darks(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    """Bernoulli(p) mask of length n; sparse draws via geometric gaps when p is tiny."""
    if p <= 0.0 or n == 0:
        return np.zeros(n, dtype=bool)
    if p > 1e-3:
        return rng.random(n) < p
    mask = np.zeros(n, dtype=bool)
    pos = -1
    while True:
        chunk = int(n * p + 10.0 * math.sqrt(n * p) + 16)
        hits = pos + np.cumsum(rng.geometric(p, size=chunk))
        inside = hits[hits < n]
        mask[inside] = True
        if inside.size < chunk:
            return mask
        pos = int(hits[-1])


def _detect(rng, photons, p_d0, eta_a, p_d):
    """Route photons (lost / D0 / D1) and apply dark counts; returns click masks."""
    survived = rng.binomial(photons, eta_a)
    k0 = rng.binomial(survived, p_d0)
    k1 = survived - k0
    n = photons.size
    c0 = (k0 > 0) | _darks(rng, n, p_d)
    c1 = (k1 > 0) | _darks(rng, n, p_d)
    return c0 & ~c1, c1 & ~c0


def _photons(rng, mean, n, source):
    if source == "single":
        return np.ones(n, dtype=np.int64)
    return rng.poisson(mean, size=n)


def _simulate_batch(params: ProtocolParams, ch: ChannelModel, seed_seq, size: int, source: str):
    rng = np.random.default_rng(seed_seq)
    t = np.zeros(len(_TALLY_NAMES), dtype=np.int64)
    eta_a, V, p_d, mu = ch.arm_transmittance, ch.visibility, ch.p_d, params.mu

    tags = classify_windows(sample_windows(params, rng, size))

    # X-X pairs, post-selected by the phase slice.
    n_xx = int(np.count_nonzero(tags == WindowClass.XX_PAIR))
    d_a = rng.uniform(0.0, TWO_PI, n_xx)
    d_b = rng.uniform(0.0, TWO_PI, n_xx)
    keep = phase_slice_accept(d_a, d_b, params.lam)
    delta = (d_a - d_b)[keep]
    photons = _photons(rng, mu, delta.size, source)
    e0, e1 = _detect(rng, photons, 0.5 * (1.0 + V * np.cos(delta)), eta_a, p_d)
    one = photons == 1
    t[_T["N_X"]] = delta.size
    t[_T["n_X0"]] = np.count_nonzero(e0)
    t[_T["n_X1"]] = np.count_nonzero(e1)
    t[_T["gt_M_X"]] = np.count_nonzero(one)
    t[_T["gt_n_plus0"]] = np.count_nonzero(e0 & one)
    t[_T["gt_n_plus1"]] = np.count_nonzero(e1 & one)

    # Set C: a single sender, no interference partner.
    n_c = int(np.count_nonzero((tags == WindowClass.SET_C_ALICE_SENT) | (tags == WindowClass.SET_C_BOB_SENT)))
    photons = _photons(rng, 0.5 * mu, n_c, source)
    z0, z1 = _detect(rng, photons, np.full(n_c, 0.5), eta_a, p_d)
    one = photons == 1
    t[_T["N_C"]] = n_c
    t[_T["n_Z0"]] = np.count_nonzero(z0)
    t[_T["n_Z1"]] = np.count_nonzero(z1)
    t[_T["gt_M_Z"]] = np.count_nonzero(one)
    t[_T["gt_n_Z0"]] = np.count_nonzero(z0 & one)
    t[_T["gt_n_Z1"]] = np.count_nonzero(z1 & one)

    # Both sent in Z: interference at an unannounced, uniform relative phase.
    n_both = int(np.count_nonzero(tags == WindowClass.ZZ_BOTH_SENT))
    delta = rng.uniform(0.0, TWO_PI, n_both) - rng.uniform(0.0, TWO_PI, n_both)
    photons = _photons(rng, mu, n_both, source)
    b0, b1 = _detect(rng, photons, 0.5 * (1.0 + V * np.cos(delta)), eta_a, p_d)
    both_eff = np.count_nonzero(b0) + np.count_nonzero(b1)

    # Neither sent: dark counts only.
    n_00 = int(np.count_nonzero(tags == WindowClass.ZZ_NONE_SENT))
    v0, v1 = _detect(rng, np.zeros(n_00, dtype=np.int64), np.full(n_00, 0.5), eta_a, p_d)
    t[_T["N_00"]] = n_00
    t[_T["k_00_0"]] = np.count_nonzero(v0)
    t[_T["k_00_1"]] = np.count_nonzero(v1)

    t[_T["n_err_Z"]] = both_eff + t[_T["k_00_0"]] + t[_T["k_00_1"]]
    t[_T["n_t"]] = t[_T["n_Z0"]] + t[_T["n_Z1"]] + t[_T["n_err_Z"]]
    return t


def monte_carlo_observables(
    params: ProtocolParams,
    ch: ChannelModel,
    seed: int,
    *,
    threads: int = 1,
    batch_size: int = DEFAULT_BATCH,
    source: str = "poisson",
) -> tuple[ObservedCounts, GroundTruth]:
    """Simulate ``params.n_windows`` windows photon by photon.

    Windows are split into fixed-size batches, each with its own substream
    spawned from ``seed``; the integer tallies are summed, so the result does
    not depend on ``threads``. ``source="single"`` replaces the Poisson photon
    number of every emitted pulse (pair) by exactly one photon.
    """
    if source not in ("poisson", "single"):
        raise ValueError(f"unknown source model {source!r}")
    n_total = int(params.n_windows)
    n_batches = -(-n_total // batch_size)
    sizes = [batch_size] * (n_batches - 1) + [n_total - batch_size * (n_batches - 1)]
    children = np.random.SeedSequence(seed).spawn(n_batches)

    def run(i):
        return _simulate_batch(params, ch, children[i], sizes[i], source)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(n_batches)))
    else:
        parts = [run(i) for i in range(n_batches)]
    t = np.sum(parts, axis=0)

    v = {name: int(t[i]) for name, i in _T.items()}
    counts = ObservedCounts(
        N_X=v["N_X"], N_Z=v["N_C"], n_X0=v["n_X0"], n_X1=v["n_X1"], n_Z0=v["n_Z0"], n_Z1=v["n_Z1"],
        n_t=v["n_t"], n_err_Z=v["n_err_Z"], N_C=v["N_C"], N_00=v["N_00"],
        k_00_0=v["k_00_0"], k_00_1=v["k_00_1"],
    )
    truth = GroundTruth(
        M_X=v["gt_M_X"], n_plus0=v["gt_n_plus0"], n_plus1=v["gt_n_plus1"],
        M_Z=v["gt_M_Z"], n_Z0=v["gt_n_Z0"], n_Z1=v["gt_n_Z1"],
    )
    return counts, truth

