"""Spin correlations, magnetic structure factor and occupations.

Every observable is written as a fermionic polynomial, converted to Majorana
form and evaluated with the same engine as the energy, so it applies equally
to variational points and (through :mod:`.ed`) to exact state vectors.

Conventions: displacements wrap around the lattice, all quantities are
averaged over the reference site ``x`` (per-site normalization), and
``S(k) = sum_y exp(i k.y) C(y)`` on the grid ``k = 2 pi (nx/Lx, ny/Ly)``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ed
from .energy import VariationalPoint, expectation, particle_number
from .fermion import fermion_to_majorana, number
from .majorana import ModeLayout
from .models import DOWN, UP, FermionModel, HubbardParams, hubbard_layout

State = VariationalPoint | np.ndarray


@dataclass(frozen=True)
class CorrelationField:
    """Values indexed by displacement, ``values[yy, yx]``."""

    values: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def at(self, yx: int, yy: int = 0) -> float:
        Ly, Lx = self.values.shape
        return float(self.values[yy % Ly, yx % Lx])

    def rows(self):
        Ly, Lx = self.values.shape
        return [(yx, yy, float(self.values[yy, yx])) for yy in range(Ly) for yx in range(Lx)]


@dataclass(frozen=True)
class StructureFactor:
    """``values[ny, nx]`` at ``k = (2 pi nx / Lx, 2 pi ny / Ly)``."""

    values: np.ndarray
    imag_residual: float

    def momenta(self) -> tuple[np.ndarray, np.ndarray]:
        Ly, Lx = self.values.shape
        return 2 * np.pi * np.arange(Lx) / Lx, 2 * np.pi * np.arange(Ly) / Ly

    def argmax(self) -> tuple[float, float]:
        ny, nx = np.unravel_index(np.argmax(self.values), self.values.shape)
        kx, ky = self.momenta()
        return float(kx[nx]), float(ky[ny])

    def rows(self):
        kx, ky = self.momenta()
        Ly, Lx = self.values.shape
        return [(kx[i], ky[j], float(self.values[j, i])) for j in range(Ly) for i in range(Lx)]


def _model(terms, layout: ModeLayout) -> FermionModel:
    T, W, offset = fermion_to_majorana(terms, layout).to_hamiltonian(layout.d)
    return FermionModel(T, W, offset, layout)


def _shift(p: HubbardParams, x: int, y) -> int:
    yx, yy = (y, 0) if np.isscalar(y) else y
    return p.site(x % p.Lx + yx, x // p.Lx + yy)


def spin_spin_operator(p: HubbardParams, y) -> FermionModel:
    """``(1/N) sum_x (n_{x+y,up} - n_{x+y,dn}) (n_{x,up} - n_{x,dn})``."""
    w = 1.0 / p.n_sites
    terms = []
    for x in range(p.n_sites):
        z = _shift(p, x, y)
        for s1, sg1 in ((UP, 1.0), (DOWN, -1.0)):
            for s2, sg2 in ((UP, 1.0), (DOWN, -1.0)):
                terms.append((w * sg1 * sg2, number(2 * z + s1) + number(2 * x + s2)))
    return _model(terms, hubbard_layout(p))


def af_operator(p: HubbardParams, y) -> FermionModel:
    """``(1/N) sum_x n_{x,up} n_{x+y,dn}``."""
    w = 1.0 / p.n_sites
    terms = [
        (w, number(2 * x + UP) + number(2 * _shift(p, x, y) + DOWN)) for x in range(p.n_sites)
    ]
    return _model(terms, hubbard_layout(p))


def evaluate(model: FermionModel, state: State) -> float:
    """Expectation on a variational point, or on a normalized Fock-space vector."""
    if isinstance(state, VariationalPoint):
        return expectation(model.T, model.W, state, model.layout, model.offset)
    H = ed.hamiltonian_matrix(model.T, model.W, model.offset, model.layout)
    return float(ed.expectation(H, np.asarray(state)).real)


def spin_spin(state: State, p: HubbardParams, y) -> float:
    return evaluate(spin_spin_operator(p, y), state)


def af_order(state: State, p: HubbardParams, y) -> float:
    return evaluate(af_operator(p, y), state)


def _field(fn, state: State, p: HubbardParams) -> CorrelationField:
    vals = np.array([[fn(state, p, (yx, yy)) for yx in range(p.Lx)] for yy in range(p.Ly)])
    return CorrelationField(vals)


def spin_spin_field(state: State, p: HubbardParams) -> CorrelationField:
    return _field(spin_spin, state, p)


def af_order_field(state: State, p: HubbardParams) -> CorrelationField:
    return _field(af_order, state, p)


def structure_factor(C: CorrelationField) -> StructureFactor:
    vals = np.asarray(C.values, dtype=float)
    if vals.ndim != 2 or not np.all(np.isfinite(vals)):
        raise ValueError("correlation field must be complete and finite")
    # sum_y exp(+i k.y) C(y) is N times the inverse DFT
    S = vals.size * np.fft.ifft2(vals)
    return StructureFactor(S.real, float(np.abs(S.imag).max()))


def occupations(point: VariationalPoint, layout: ModeLayout) -> tuple[np.ndarray, np.ndarray, float]:
    """Per-site ``<n_up>``, ``<n_dn>`` and the total particle number."""
    if layout.modes_per_site != 2:
        raise ValueError("occupations need two (spin) modes per site")
    occ, ntot = particle_number(point, layout)
    return occ[UP::2], occ[DOWN::2], ntot


def _write(path: str | Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([v if isinstance(v, (int, np.integer)) else repr(float(v)) for v in r])


def write_correlation_csv(path: str | Path, C: CorrelationField) -> None:
    _write(path, ("yx", "yy", "value"), C.rows())


def write_structure_factor_csv(path: str | Path, S: StructureFactor) -> None:
    _write(path, ("kx", "ky", "value"), S.rows())


def write_occupations_csv(path: str | Path, n_up: np.ndarray, n_dn: np.ndarray) -> None:
    _write(path, ("site", "n_up", "n_down"), [(i, u, d) for i, (u, d) in enumerate(zip(n_up, n_dn))])
