"""Scalar numerics shared by the simulator and the security analysis.

Everything here is a pure function. Functions that are used inside the
vectorized optimizer path (``binary_entropy``, ``channel_transmittance``)
accept numpy arrays as well as Python floats.
"""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import ArrayLike, NDArray

# Per-km exponent c in eta = 10**(-c L).
DEFAULT_LOSS_EXPONENT = 1.0 / 100.0
FIBER_LOSS_EXPONENT = 0.2 / 10.0

# Two-mode single-photon basis: index 0 is |01> (Bob's mode), index 1 is |10> (Alice's mode).
Z0 = np.array([1.0, 0.0], dtype=complex)
Z1 = np.array([0.0, 1.0], dtype=complex)

_PSD_TOL = 1e-12


def binary_entropy(x: ArrayLike) -> float | NDArray[np.float64]:
    """Binary entropy in bits, with H(0) = H(1) = 0.

    Raises:
        ValueError: if any element lies outside [0, 1].

    >>> binary_entropy(0.5)
    1.0
    """
    arr = np.asarray(x, dtype=float)
    if np.any(~((arr >= 0.0) & (arr <= 1.0))):
        raise ValueError(f"binary entropy needs 0 <= x <= 1, got {x!r}")
    inner = (arr > 0.0) & (arr < 1.0)
    safe = np.where(inner, arr, 0.5)
    h = np.where(inner, -safe * np.log2(safe) - (1.0 - safe) * np.log2(1.0 - safe), 0.0)
    return float(h) if h.ndim == 0 else h


def poisson_pmf(k: int, mu: float) -> float:
    """P(k photons) for a phase-randomized coherent state of mean ``mu``."""
    if mu < 0:
        raise ValueError(f"mean photon number must be >= 0, got {mu}")
    if k < 0:
        raise ValueError(f"photon number must be >= 0, got {k}")
    if mu == 0:
        return 1.0 if k == 0 else 0.0
    # log-space keeps large k finite
    return math.exp(-mu + k * math.log(mu) - math.lgamma(k + 1))


def channel_transmittance(L: ArrayLike, model=None) -> float | NDArray[np.float64]:
    """Fiber transmittance ``10**(-c*L)`` over ``L`` km.

    ``model`` is anything with a ``loss_exponent_per_km`` attribute (normally a
    :class:`~sns_tfqkd.channel.ChannelModel`); ``None`` selects the 0.1 dB/km
    default channel.
    """
    c = DEFAULT_LOSS_EXPONENT if model is None else model.loss_exponent_per_km
    arr = np.asarray(L, dtype=float)
    if np.any(arr < 0):
        raise ValueError(f"distance must be >= 0, got {L!r}")
    eta = np.power(10.0, -c * arr)
    return float(eta) if eta.ndim == 0 else eta


def projector(psi: ArrayLike) -> NDArray[np.complex128]:
    """|psi><psi| for a normalized two-mode single-photon state vector."""
    v = np.asarray(psi, dtype=complex)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def validate_density(rho: ArrayLike) -> NDArray[np.complex128]:
    """Return ``rho`` as a 2x2 complex array, checking the density-operator invariants."""
    m = np.asarray(rho, dtype=complex)
    if m.shape != (2, 2):
        raise ValueError(f"expected a 2x2 density operator, got shape {m.shape}")
    if not np.allclose(m, m.conj().T, atol=_PSD_TOL):
        raise ValueError("density operator is not Hermitian")
    if abs(np.trace(m) - 1.0) > 1e-10:
        raise ValueError(f"density operator trace is {np.trace(m).real}, not 1")
    if np.linalg.eigvalsh(m).min() < -_PSD_TOL:
        raise ValueError("density operator is not positive semidefinite")
    return m


def density_distance(a: ArrayLike, b: ArrayLike) -> float:
    """Trace distance 0.5 * ||a - b||_1 between two valid density operators."""
    diff = validate_density(a) - validate_density(b)
    eig = np.linalg.eigvalsh((diff + diff.conj().T) / 2)
    return float(0.5 * np.abs(eig).sum())
