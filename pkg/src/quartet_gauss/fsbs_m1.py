"""Closed-form ground-state energy density of the permutation-symmetric M=1 model.

With ``L`` the particle number on ``N`` sites the energy density reduces to
``-t x + U rho^2 + mu rho`` with ``rho = L/N`` and ``x in {0, 1}``, so the
minimum is found by treating ``x`` and ``rho`` independently.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np


@dataclass(frozen=True)
class M1Params:
    t: float
    U: float
    mu: float

    def __post_init__(self):
        if not all(np.isfinite([self.t, self.U, self.mu])):
            raise ValueError("M1 couplings must be finite")


@dataclass(frozen=True)
class M1Solution:
    E0: float
    x_star: int
    rho_star: float


def energy(p: M1Params, x: float, rho: float) -> float:
    return -p.t * x + p.U * rho * rho + p.mu * rho


def _rho_star(U: float, mu: float) -> float:
    if U > 0:
        return min(max(-mu / (2 * U), 0.0), 1.0) + 0.0  # no negative zero
    # concave or linear in rho: one of the endpoints; ties go to rho = 0
    return 1.0 if U + mu < 0 else 0.0


def m1_energy_density(p: M1Params) -> M1Solution:
    """Exact minimizer; degenerate cases report the lexicographically smallest ``(x, rho)``."""
    x = 1 if p.t > 0 else 0
    rho = _rho_star(p.U, p.mu)
    return M1Solution(energy(p, x, rho), x, rho)


def m1_x(c, alpha):
    """``(sin a + c cos a)^2 / (1 + 2c sin a cos a + c^2 cos^2 a)``; the limit 1 at ``cos a = 0``.

    Broadcasts over array arguments.
    """
    s, co = np.sin(alpha), np.cos(alpha)
    num = (s + c * co) ** 2
    # the denominator equals num + cos^2, which avoids cancellation
    den = num + co * co
    x = np.where(co == 0.0, 1.0, num / np.where(den == 0.0, 1.0, den))
    return float(x) if np.ndim(x) == 0 else x


def m1_finite_n_energy(p: M1Params, N: int) -> float:
    """Exact ground energy density on ``N`` sites (``x = 1`` needs at least one particle)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    rho = np.arange(N + 1) / N
    base = p.U * rho**2 + p.mu * rho
    with_x = np.where(np.arange(N + 1) >= 1, base - p.t, np.inf)
    return float(min(base.min(), with_x.min()))


def grid_rows(ts: Iterable[float], Us: Iterable[float], mus: Iterable[float]) -> list[tuple]:
    rows = []
    for t, U, mu in itertools.product(ts, Us, mus):
        s = m1_energy_density(M1Params(t, U, mu))
        rows.append((t, U, mu, s.E0, s.x_star, s.rho_star))
    return rows


def write_grid_csv(path: str | Path, rows: list[tuple]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("t", "U", "mu", "E0", "x", "rho0"))
        for r in rows:
            w.writerow([repr(float(r[0])), repr(float(r[1])), repr(float(r[2])),
                        repr(float(r[3])), int(r[4]), repr(float(r[5]))])
