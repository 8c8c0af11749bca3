"""Key-rate maximization over (mu, epsilon, lambda, p_x) and distance sweeps."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import minimize

from .channel import ChannelModel, _expected, expected_observables
from .protocol import ProtocolParams
from .security import SecurityBounds, _analyze, analyze

_AXES = ("mu", "epsilon", "lam", "p_x")
_LOG_AXES = {"mu", "epsilon"}
_OUTER = {"mu": (0.0, 1.5), "epsilon": (0.0, 0.5), "lam": (0.0, 2.0), "p_x": (0.0, 0.5)}


@dataclass(frozen=True)
class SearchSpace:
    """Closed search intervals; mu and epsilon are gridded in log space."""

    mu: tuple[float, float] = (1e-6, 1.5)
    epsilon: tuple[float, float] = (1e-4, 0.5)
    lam: tuple[float, float] = (0.02, 2.0)
    p_x: tuple[float, float] = (0.01, 0.5)
    grid_points: int = 20
    rel_tol: float = 1e-4

    def __post_init__(self):
        for name in _AXES:
            lo, hi = getattr(self, name)
            outer_lo, outer_hi = _OUTER[name]
            if not outer_lo < lo <= hi <= outer_hi:
                raise ValueError(f"{name} interval {lo, hi} outside ({outer_lo}, {outer_hi}]")
        if self.grid_points < 1:
            raise ValueError("grid_points must be >= 1")

    def grid(self, name: str) -> np.ndarray:
        lo, hi = getattr(self, name)
        if name in _LOG_AXES:
            return np.geomspace(lo, hi, self.grid_points)
        return np.linspace(lo, hi, self.grid_points)


class SweepRow(NamedTuple):
    L: float
    params: ProtocolParams
    R: float
    e1ph_U: float
    EZ: float
    n1_L: float


def _rate(mu, eps, lam, p_x, ch, f, n_windows, mu_M):
    counts = _expected(mu, eps, lam, p_x, n_windows, ch)
    mu_a = mu if mu_M is None else np.maximum(mu, mu_M)
    return _analyze(counts, mu_a, f, 0.0, n_windows)["R"]


def optimize(
    ch: ChannelModel,
    space: SearchSpace = SearchSpace(),
    *,
    f: float = 1.16,
    n_windows: int = 10**12,
    mu_M: float | None = None,
) -> tuple[ProtocolParams, SecurityBounds]:
    """Grid scan followed by bounded Nelder-Mead refinement.

    The refined point replaces the best grid point only if its rate is at
    least as high. With ``mu_M`` set, ``mu`` is searched only up to ``mu_M``.
    """
    if mu_M is not None and mu_M < space.mu[1]:
        space = replace(space, mu=(min(space.mu[0], mu_M), mu_M))
    axes = [space.grid(name) for name in _AXES]
    mesh = np.meshgrid(*axes, indexing="ij")
    R = _rate(*mesh, ch, f, n_windows, mu_M)
    best = int(np.argmax(R))  # first max in C order == lexicographically smallest tuple
    x_grid = np.array([m.flat[best] for m in mesh])
    R_grid = float(R.flat[best])

    x_best = x_grid
    if R_grid > 0:
        x_best = _refine(x_grid, R_grid, space, ch, f, n_windows, mu_M)

    p = ProtocolParams(
        mu=float(x_best[0]), epsilon=float(x_best[1]), lam=float(x_best[2]), p_x=float(x_best[3]),
        f=f, n_windows=n_windows, mu_M=None if mu_M is None else max(mu_M, float(x_best[0])),
    )
    return p, analyze(expected_observables(p, ch), p)


def _refine(x0, R0, space, ch, f, n_windows, mu_M):
    lo = np.array([getattr(space, n)[0] for n in _AXES])
    hi = np.array([getattr(space, n)[1] for n in _AXES])
    is_log = np.array([n in _LOG_AXES for n in _AXES])

    def to_u(x):
        return np.where(is_log, np.log(x), x)

    def from_u(u):
        return np.clip(np.where(is_log, np.exp(u), u), lo, hi)

    def objective(u):
        x = from_u(u)
        return -float(_rate(*x, ch, f, n_windows, mu_M)) / R0

    u_lo, u_hi = to_u(lo), to_u(hi)
    res = minimize(
        objective, to_u(x0), method="Nelder-Mead",
        bounds=list(zip(u_lo, u_hi)),
        options={"xatol": 1e-6, "fatol": space.rel_tol, "maxiter": 4000},
    )
    x = from_u(res.x)
    if -objective(to_u(x)) >= 1.0:
        return x
    return x0


def sweep(
    distances: Sequence[float],
    E_a: float,
    space: SearchSpace = SearchSpace(),
    *,
    channel: ChannelModel = ChannelModel(),
    f: float = 1.16,
    n_windows: int = 10**12,
    mu_M: float | None = None,
    threads: int = 1,
) -> list[SweepRow]:
    """Optimize independently at each distance; rows come back in input order."""
    if any(L < 0 for L in distances):
        raise ValueError("distances must be >= 0")
    base = replace(channel, E_a=E_a)

    def one(L):
        p, b = optimize(base.at(float(L)), space, f=f, n_windows=n_windows, mu_M=mu_M)
        return SweepRow(float(L), p, b.R, b.e1ph_U, b.EZ, b.n1_L)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, distances))
    return [one(L) for L in distances]


def log_rate_slope(rows: Sequence[SweepRow], L_min: float, L_max: float) -> float:
    """Least-squares slope of log10(R) against L over positive-rate rows in [L_min, L_max]."""
    pts = [(r.L, math.log10(r.R)) for r in rows if L_min <= r.L <= L_max and r.R > 0]
    if len(pts) < 2:
        raise ValueError("need at least two positive-rate rows to fit a slope")
    L, y = np.array(pts).T
    return float(np.polyfit(L, y, 1)[0])
