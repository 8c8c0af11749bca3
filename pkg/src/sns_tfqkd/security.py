"""Worst-case (decoy-free) estimation of untagged bits and phase-flip rate.

Only coherent states of one intensity and vacuum are used, so every
multi-photon pulse is conceded to the adversary as if it always produced the
most harmful click. The single-photon X-basis error rate of the set-C bits is
recovered from the X-window pairs with the 3-state-from-4-state argument: the
Z-basis single-photon mixture equals the balanced mixture of |x+> and |x->.

The scalar entry points mirror the individual estimation steps. ``analyze``
composes them and, like ``_analyze``, broadcasts over numpy arrays, which is
what the optimizer relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import GroundTruth, ObservedCounts
from .core import binary_entropy
from .protocol import ProtocolParams


class NoKeyError(ArithmeticError):
    """A bound collapsed to zero, so no secret key can be certified."""


@dataclass
class SecurityBounds:
    n_plus0_L: float
    n_plus1_U: float
    n_tilde_Z_L: float
    e1ph_U: float
    n1_L: float
    EZ: float
    N_f: float
    R: float
    N_X: float = 0.0
    N_Z: float = 0.0
    diagnostic: str | None = None


def _multi_photon(mu):
    """Probability of two or more photons for Poisson mean ``mu``."""
    return -np.expm1(-mu) - mu * np.exp(-mu)


def vacuum_yields(counts: ObservedCounts) -> tuple[float, float]:
    """Per-detector single-click yields of windows in which neither party sent."""
    if not counts.N_00 > 0:
        raise ValueError("no vacuum (neither-sent) windows observed")
    return counts.k_00_0 / counts.N_00, counts.k_00_1 / counts.N_00


def _subset_sizes(avail_X, avail_Z, mu):
    ratio = 4.0 * np.exp(-0.5 * np.asarray(mu, dtype=float))
    avail_X = np.floor(avail_X)
    avail_Z = np.floor(avail_Z)
    nz_if_x = np.round(avail_X * ratio)
    x_binds = nz_if_x <= avail_Z
    N_X = np.where(x_binds, avail_X, np.floor(avail_Z / ratio))
    N_Z = np.where(x_binds, nz_if_x, avail_Z)
    return N_X, N_Z


def subset_sizes(avail_X: float, avail_Z: float, mu: float) -> tuple[int, int]:
    """Largest pair (N_X, N_Z) obeying N_Z = 4 N_X exp(-mu/2) within the pools.

    The relation equates the single-photon content of c_Z with twice that of
    c_X. When the Z pool binds, all of it is used and N_X is rounded down.
    """
    if not mu > 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    if not (avail_X >= 1 and avail_Z >= 1):
        raise ValueError("both estimation pools must be non-empty")
    N_X, N_Z = _subset_sizes(avail_X, avail_Z, mu)
    return int(N_X), int(N_Z)


def bound_n_plus0(n_X0, N_X, Y00_0, mu):
    """Lower bound on correct (D0) single-photon clicks in c_X."""
    bound = n_X0 - Y00_0 * N_X * np.exp(-mu) - N_X * _multi_photon(mu)
    return np.maximum(0.0, bound)


def bound_n_plus1(n_X1, N_X, Y00_1, mu):
    """Upper bound on wrong (D1) single-photon clicks in c_X."""
    return np.maximum(0.0, n_X1 - Y00_1 * N_X * np.exp(-mu))


def bound_n_tilde_Z(n_Z0, n_Z1, N_Z, Y00, mu):
    """Lower bound on effective events from single-photon pulses in c_Z (mu is the pair intensity)."""
    half = 0.5 * np.asarray(mu, dtype=float)
    bound = (n_Z0 + n_Z1) - N_Z * _multi_photon(half) - Y00 * N_Z * np.exp(-half)
    return np.maximum(0.0, bound)


def bound_e1ph(n_X1, n_Z0, n_plus0_L, n_tilde_Z_L) -> float:
    """Upper bound on the single-photon phase-flip rate of the set-C bits."""
    if not n_tilde_Z_L > 0:
        raise NoKeyError("lower bound on single-photon Z counts is zero")
    return float(min(1.0, max(0.0, (n_X1 + n_Z0 - n_plus0_L) / n_tilde_Z_L)))


def single_photon_e1ph(gt: GroundTruth) -> float:
    """Phase-flip rate of single-photon set-C pulses, from tagged simulation tallies.

    The X-pool tallies are rescaled so that the Z single-photon set is exactly
    twice the X one, as the 3-state/4-state relation requires.
    """
    denom = gt.n_Z0 + gt.n_Z1
    if denom <= 0 or gt.M_X <= 0:
        raise ZeroDivisionError("no single-photon effective events")
    s = gt.matching_scale
    return (s * gt.n_plus1 + gt.n_Z0 - s * gt.n_plus0) / denom


def bound_n1(n_tilde_Z_L, N_Z, N_C):
    """Extrapolate the single-photon count of c_Z to all of set C."""
    if np.any(np.asarray(N_Z) <= 0):
        raise ZeroDivisionError("empty c_Z subset")
    return np.asarray(n_tilde_Z_L) / N_Z * N_C


def key_length(n1, e1ph, n_t, EZ, f):
    """Final key bits ``n1 (1 - H(e1ph)) - n_t f H(EZ)``, clamped at zero.

    ``e1ph`` is an upper bound, so the privacy-amplification term charges the
    largest entropy the bound allows: H(1/2) = 1 once the bound reaches 1/2.
    """
    e = np.minimum(np.asarray(e1ph, dtype=float), 0.5)
    nf = np.maximum(0.0, n1 * (1.0 - binary_entropy(e)) - n_t * f * binary_entropy(EZ))
    return float(nf) if np.ndim(nf) == 0 else nf


def _analyze(counts: ObservedCounts, mu, f, test_fraction, n_windows, fault: float = 0.0):
    """Array-valued analysis; returns a dict of SecurityBounds fields (no diagnostic).

    ``fault`` inflates the two lower bounds by that fraction. It exists only so
    the verification suite can show that it catches an unsound bound.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        Y00_0 = counts.k_00_0 / counts.N_00
        Y00_1 = counts.k_00_1 / counts.N_00
        N_X, N_Z = _subset_sizes(counts.N_X, counts.N_Z, mu)
        kx = N_X / counts.N_X
        kz = N_Z / counts.N_Z
        n_X0, n_X1 = counts.n_X0 * kx, counts.n_X1 * kx
        n_Z0, n_Z1 = counts.n_Z0 * kz, counts.n_Z1 * kz

        p0 = bound_n_plus0(n_X0, N_X, Y00_0, mu) * (1.0 + fault)
        p1 = bound_n_plus1(n_X1, N_X, Y00_1, mu)
        nz = bound_n_tilde_Z(n_Z0, n_Z1, N_Z, Y00_0 + Y00_1, mu) * (1.0 + fault)
        ok = (nz > 0) & (N_Z > 0) & (N_X > 0)
        e1 = np.where(ok, np.clip((n_X1 + n_Z0 - p0) / np.where(ok, nz, 1.0), 0.0, 1.0), 1.0)
        n1 = np.where(ok, nz / np.where(N_Z > 0, N_Z, 1.0) * counts.N_C, 0.0) * (1.0 - test_fraction)
        n_t = counts.n_t * (1.0 - test_fraction)
        EZ = np.where(counts.n_t > 0, counts.n_err_Z / np.where(counts.n_t > 0, counts.n_t, 1.0), 0.0)
        EZ = np.clip(EZ, 0.0, 1.0)
    nf = key_length(n1, e1, n_t, EZ, f)
    nf = np.where(ok, nf, 0.0)
    return dict(
        n_plus0_L=p0, n_plus1_U=p1, n_tilde_Z_L=nz, e1ph_U=e1, n1_L=n1, EZ=EZ,
        N_f=nf, R=nf / float(n_windows), N_X=N_X, N_Z=N_Z, ok=ok,
    )


def analyze(counts: ObservedCounts, params: ProtocolParams, *, fault: float = 0.0) -> SecurityBounds:
    """Run the full estimation chain on observed tallies.

    With ``params.mu_M`` set, every source-statistics term uses the upper
    bound ``mu_M`` instead of ``mu``. A collapsed bound gives ``R = 0`` and a
    diagnostic instead of an exception.
    """
    if not counts.N_00 > 0:
        raise ValueError("no vacuum (neither-sent) windows observed")
    if not (counts.N_X >= 1 and counts.N_Z >= 1):
        return SecurityBounds(0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0,
                              diagnostic="an estimation pool is empty")
    out = _analyze(counts, params.mu_analysis, params.f, params.test_fraction, params.n_windows, fault)
    ok = bool(out.pop("ok"))
    values = {k: float(v) for k, v in out.items()}
    diagnostic = None
    if not ok:
        diagnostic = "single-photon Z-count lower bound collapsed to zero"
    elif values["N_f"] == 0.0:
        diagnostic = "privacy amplification and error correction exceed the untagged bits"
    return SecurityBounds(**values, diagnostic=diagnostic)

