"""Source-side protocol logic for the 3-state no-touch sending-or-not-sending scheme.

Each time window both parties independently pick an X- or Z-window. In an
X-window the party always emits its weak coherent pulse of intensity mu/2; in
a Z-window it emits with probability epsilon. X-window pairs are kept only if
the locally known reference-laser offsets pass the phase-slice test.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import Z0, Z1, density_distance, projector

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ProtocolParams:
    """Free protocol parameters.

    ``mu`` is the total mean photon number of an X-window pulse pair, so each
    side emits mu/2. ``lam`` is the phase-slice parameter lambda. ``mu_M``, when
    given, is an upper bound on the true ``mu`` used by the analysis instead of
    ``mu`` itself.
    """

    mu: float = 0.1
    epsilon: float = 0.05
    p_x: float = 0.2
    lam: float = 0.3
    f: float = 1.16
    n_windows: int = 10**12
    mu_M: float | None = None
    test_fraction: float = 0.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {self.epsilon}")
        if not 0.0 <= self.p_x <= 1.0:
            raise ValueError(f"p_x must be in [0, 1], got {self.p_x}")
        if not 0.0 < self.lam <= 2.0:
            raise ValueError(f"lambda must be in (0, 2], got {self.lam}")
        if not self.f >= 1.0:
            raise ValueError(f"error-correction factor f must be >= 1, got {self.f}")
        if not self.n_windows >= 1:
            raise ValueError(f"n_windows must be positive, got {self.n_windows}")
        if self.mu_M is not None and not self.mu_M >= self.mu:
            raise ValueError(f"mu_M ({self.mu_M}) must be >= mu ({self.mu})")
        if not 0.0 <= self.test_fraction < 1.0:
            raise ValueError(f"test_fraction must be in [0, 1), got {self.test_fraction}")

    @property
    def p_z(self) -> float:
        return 1.0 - self.p_x

    @property
    def mu_analysis(self) -> float:
        """Intensity assumed by the worst-case bounds."""
        return self.mu if self.mu_M is None else self.mu_M


class Basis(enum.Enum):
    X = "X"
    Z = "Z"


class Party(enum.Enum):
    ALICE = "Alice"
    BOB = "Bob"


class WindowClass(enum.IntEnum):
    XX_PAIR = 0
    SET_C_ALICE_SENT = 1
    SET_C_BOB_SENT = 2
    ZZ_BOTH_SENT = 3
    ZZ_NONE_SENT = 4
    MIXED_BASIS = 5


@dataclass(frozen=True)
class WindowOutcome:
    alice_basis: Basis
    bob_basis: Basis
    alice_sent: bool
    bob_sent: bool
    rho_A: float = 0.0
    rho_B: float = 0.0
    delta_A: float = 0.0
    delta_B: float = 0.0

    def __post_init__(self):
        if self.alice_basis is Basis.X and not self.alice_sent:
            raise ValueError("Alice always sends in an X-window")
        if self.bob_basis is Basis.X and not self.bob_sent:
            raise ValueError("Bob always sends in an X-window")


def sample_window(params: ProtocolParams, rng: np.random.Generator) -> WindowOutcome:
    """Draw one window: independent basis, send decision and phases per side."""
    u = rng.random(4)
    phases = rng.uniform(0.0, TWO_PI, 4)
    a_x = bool(u[0] < params.p_x)
    b_x = bool(u[1] < params.p_x)
    return WindowOutcome(
        alice_basis=Basis.X if a_x else Basis.Z,
        bob_basis=Basis.X if b_x else Basis.Z,
        alice_sent=a_x or bool(u[2] < params.epsilon),
        bob_sent=b_x or bool(u[3] < params.epsilon),
        rho_A=float(phases[0]),
        rho_B=float(phases[1]),
        delta_A=float(phases[2]),
        delta_B=float(phases[3]),
    )


def classify_window(w: WindowOutcome) -> WindowClass:
    if w.alice_basis is Basis.X and w.bob_basis is Basis.X:
        return WindowClass.XX_PAIR
    if w.alice_basis is not w.bob_basis:
        return WindowClass.MIXED_BASIS
    if w.alice_sent and w.bob_sent:
        return WindowClass.ZZ_BOTH_SENT
    if w.alice_sent:
        return WindowClass.SET_C_ALICE_SENT
    if w.bob_sent:
        return WindowClass.SET_C_BOB_SENT
    return WindowClass.ZZ_NONE_SENT


class WindowBatch(NamedTuple):
    """Struct-of-arrays form of many windows (phases are drawn by the consumer)."""

    alice_x: np.ndarray
    bob_x: np.ndarray
    alice_sent: np.ndarray
    bob_sent: np.ndarray


def sample_windows(params: ProtocolParams, rng: np.random.Generator, size: int) -> WindowBatch:
    """Vectorized :func:`sample_window` without the phase draws."""
    u = rng.random((4, size))
    alice_x = u[0] < params.p_x
    bob_x = u[1] < params.p_x
    return WindowBatch(
        alice_x=alice_x,
        bob_x=bob_x,
        alice_sent=alice_x | (u[2] < params.epsilon),
        bob_sent=bob_x | (u[3] < params.epsilon),
    )


def classify_windows(batch: WindowBatch) -> np.ndarray:
    """Vectorized :func:`classify_window`; returns ``WindowClass`` codes as int8."""
    tags = np.full(batch.alice_x.shape, WindowClass.MIXED_BASIS, dtype=np.int8)
    zz = ~batch.alice_x & ~batch.bob_x
    a, b = batch.alice_sent, batch.bob_sent
    tags[batch.alice_x & batch.bob_x] = WindowClass.XX_PAIR
    tags[zz & a & b] = WindowClass.ZZ_BOTH_SENT
    tags[zz & a & ~b] = WindowClass.SET_C_ALICE_SENT
    tags[zz & ~a & b] = WindowClass.SET_C_BOB_SENT
    tags[zz & ~a & ~b] = WindowClass.ZZ_NONE_SENT
    return tags


def phase_slice_accept(delta_A, delta_B, lam: float):
    """Post-selection test ``1 - cos(delta_A - delta_B) <= |lam|``; works elementwise."""
    return 1.0 - np.cos(np.subtract(delta_A, delta_B)) <= abs(lam)


def slice_half_width(lam) -> float:
    """Largest accepted |delta_A - delta_B| (mod 2 pi) for slice parameter ``lam``."""
    return np.arccos(1.0 - np.asarray(lam, dtype=float))


def slice_acceptance_probability(lam: float) -> float:
    """Fraction of uniformly distributed phase differences that pass the slice."""
    if not 0.0 < lam <= 2.0:
        raise ValueError(f"lambda must be in (0, 2], got {lam}")
    return float(math.acos(1.0 - lam) / math.pi)


def bit_value(w: WindowOutcome, party: Party) -> int:
    """Raw Z-basis key bit.

    Alice reads not-sent as 0 and sent as 1, Bob the opposite, so a window in
    which exactly one of them sent yields agreeing bits.
    """
    if w.alice_basis is not Basis.Z or w.bob_basis is not Basis.Z:
        raise ValueError("bit values are only defined for Z-Z windows")
    if party is Party.ALICE:
        return int(w.alice_sent)
    return int(not w.bob_sent)


class EquivalenceCheck(NamedTuple):
    distance: float
    mapping_error: float


def x_states(rho_A: float, rho_B: float, weight_z0: float = 0.5):
    """The pair (|x+>, |x->) with given global phases.

    ``weight_z0`` is |alpha|^2 of the |z0> amplitude; 0.5 gives the balanced
    states of the 3- and 4-state characteristic sets.
    """
    a = math.sqrt(weight_z0)
    b = math.sqrt(1.0 - weight_z0)
    ea, eb = np.exp(1j * rho_A), np.exp(1j * rho_B)
    plus = a * eb * Z0 + b * ea * Z1
    minus = a * eb * Z0 - b * ea * Z1
    return plus, minus


def check_source_equivalence(rho_A: float, rho_B: float, weight_z0: float = 0.5) -> EquivalenceCheck:
    """Compare the X-state mixture with the Z-state mixture on the single-photon subspace.

    ``distance`` is the trace distance between 1/2(|x+><x+| + |x-><x-|) and
    1/2(|z0><z0| + |z1><z1|). ``mapping_error`` measures how far the phase map
    |z_k> -> e^{i delta_k}|Z_k> (delta_0 = rho_B, delta_1 = rho_A) is from
    unitary and from sending the ideal |x+> to the phased one.
    """
    plus, minus = x_states(rho_A, rho_B, weight_z0)
    mix_x = 0.5 * (projector(plus) + projector(minus))
    mix_z = 0.5 * (projector(Z0) + projector(Z1))
    distance = density_distance(mix_x, mix_z)

    u = np.diag([np.exp(1j * rho_B), np.exp(1j * rho_A)])
    unitarity = np.abs(u.conj().T @ u - np.eye(2)).max()
    ideal_plus = (Z0 + Z1) / math.sqrt(2.0)
    balanced_plus, _ = x_states(rho_A, rho_B)
    image = np.abs(u @ ideal_plus - balanced_plus).max()
    return EquivalenceCheck(distance, float(max(unitarity, image)))
