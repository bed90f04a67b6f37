"""Hubbard, quartet-pairing (H4) and pairing-operator builders in Majorana form."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .fermion import fermion_to_majorana, number
from .majorana import ModeLayout, QuadraticTensor, QuarticTensor

UP, DOWN = 0, 1


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class FermionModel:
    """``H = i sum T c c + sum w cccc + offset`` on a given layout."""

    T: QuadraticTensor
    W: QuarticTensor
    offset: float
    layout: ModeLayout


@dataclass(frozen=True)
class HubbardParams:
    Lx: int
    Ly: int = 1
    t: float = 1.0
    U: float = 0.0
    mu: float = 0.0
    bc: str = "periodic"
    tiling: str | Sequence[Sequence[int]] = "h-domino"

    def __post_init__(self):
        if self.Lx < 1 or self.Ly < 1:
            raise ConfigurationError("lattice extents must be >= 1")
        if self.bc not in ("periodic", "open"):
            raise ConfigurationError(f"unknown boundary condition {self.bc!r}")

    @property
    def n_sites(self) -> int:
        return self.Lx * self.Ly

    def site(self, x: int, y: int) -> int:
        return (x % self.Lx) + self.Lx * (y % self.Ly)


def lattice_bonds(p: HubbardParams) -> list[tuple[int, int]]:
    """Unordered nearest-neighbour pairs, each listed once.

    With periodic boundaries and extent 2 the two bonds joining the same
    pair of sites collapse into one; extent 1 contributes no bond.
    """
    bonds: set[tuple[int, int]] = set()
    for y in range(p.Ly):
        for x in range(p.Lx):
            s = p.site(x, y)
            for dx, dy in ((1, 0), (0, 1)):
                nx, ny = x + dx, y + dy
                if p.bc == "open" and (nx >= p.Lx or ny >= p.Ly):
                    continue
                n = p.site(nx, ny)
                if n != s:
                    bonds.add((min(s, n), max(s, n)))
    return sorted(bonds)


def hopping_matrix(p: HubbardParams) -> np.ndarray:
    """Single-particle hopping matrix ``-t`` on every bond (one spin species)."""
    h = np.zeros((p.n_sites, p.n_sites))
    for a, b in lattice_bonds(p):
        h[a, b] = h[b, a] = -p.t
    return h


def domino_quartets(p: HubbardParams) -> tuple[tuple[int, int, int, int], ...]:
    tiling = p.tiling
    if tiling == "none":
        return ()
    if isinstance(tiling, str) and tiling.startswith("file:"):
        return read_quartet_file(tiling[5:])
    if not isinstance(tiling, str):
        return tuple(tuple(int(m) for m in q) for q in tiling)
    if tiling == "h-domino":
        if p.Lx % 2:
            raise ConfigurationError(f"h-domino quartets need even Lx, got Lx={p.Lx}")
        pairs = [(p.site(x, y), p.site(x + 1, y)) for y in range(p.Ly) for x in range(0, p.Lx, 2)]
    elif tiling == "v-domino":
        if p.Ly % 2:
            raise ConfigurationError(f"v-domino quartets need even Ly, got Ly={p.Ly}")
        pairs = [(p.site(x, y), p.site(x, y + 1)) for y in range(0, p.Ly, 2) for x in range(p.Lx)]
    else:
        raise ConfigurationError(f"unknown tiling {tiling!r}")
    return tuple((2 * a + UP, 2 * a + DOWN, 2 * b + UP, 2 * b + DOWN) for a, b in pairs)


def read_quartet_file(path: str | Path) -> tuple[tuple[int, int, int, int], ...]:
    """One quartet per line: four whitespace-separated mode indices."""
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#")[0].strip()
            if line:
                q = tuple(int(v) for v in line.split())
                if len(q) != 4:
                    raise ConfigurationError(f"quartet line {line!r} must have 4 modes")
                out.append(q)
    return tuple(out)


def hubbard_layout(p: HubbardParams) -> ModeLayout:
    try:
        return ModeLayout(n_sites=p.n_sites, modes_per_site=2, quartets=domino_quartets(p))
    except ValueError as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(str(exc)) from exc


def hubbard_terms(p: HubbardParams) -> list:
    terms = []
    for a, b in lattice_bonds(p):
        for s in (UP, DOWN):
            i, j = 2 * a + s, 2 * b + s
            terms.append((-p.t, ((i, True), (j, False))))
            terms.append((-p.t, ((j, True), (i, False))))
    for x in range(p.n_sites):
        u, dn = 2 * x + UP, 2 * x + DOWN
        # U (n_u - 1/2)(n_d - 1/2)
        terms.append((p.U, number(u) + number(dn)))
        terms.append((-0.5 * p.U, number(u)))
        terms.append((-0.5 * p.U, number(dn)))
        terms.append((0.25 * p.U, ()))
        terms.append((p.mu, number(u)))
        terms.append((p.mu, number(dn)))
    return terms


def build_hubbard(p: HubbardParams) -> FermionModel:
    layout = hubbard_layout(p)
    T, W, offset = fermion_to_majorana(hubbard_terms(p), layout).to_hamiltonian(layout.d)
    return FermionModel(T, W, offset, layout)


def build_h4(layout: ModeLayout, t_matrix: np.ndarray, U: float) -> FermionModel:
    """``-sum t_kl a+_k a_l + U sum_q (a+_{q0} a+_{q1} a+_{q2} a+_{q3} + h.c.)``."""
    if layout.n_quartets == 0:
        raise ConfigurationError("H4 needs a layout with quartets")
    t_matrix = np.asarray(t_matrix)
    m = layout.n_modes
    if t_matrix.shape != (m, m):
        raise ValueError(f"t_matrix must be {m}x{m}")
    if not np.allclose(t_matrix, t_matrix.conj().T):
        raise ValueError("t_matrix must be Hermitian")
    terms = []
    for k, l in zip(*np.nonzero(t_matrix)):
        terms.append((-t_matrix[k, l], ((int(k), True), (int(l), False))))
    for q in layout.quartets:
        terms.append((U, tuple((p, True) for p in q)))
        terms.append((U, tuple((p, False) for p in reversed(q))))
    T, W, offset = fermion_to_majorana(terms, layout).to_hamiltonian(layout.d)
    return FermionModel(T, W, offset, layout)


def pairing_terms(layout: ModeLayout) -> list:
    if layout.modes_per_site != 2:
        raise ConfigurationError("pairing operator needs two (spin) modes per site")
    terms = []
    n = layout.n_sites
    for x in range(n):
        for y in range(n):
            xu, xd = 2 * x + UP, 2 * x + DOWN
            yu, yd = 2 * y + UP, 2 * y + DOWN
            terms.append((-1.0, ((xu, True), (xd, True), (yd, False), (yu, False))))
    return terms


def build_pairing_operator(layout: ModeLayout) -> FermionModel:
    """``P = -sum_{x,y} a+_{x up} a+_{x dn} a_{y dn} a_{y up}``."""
    T, W, offset = fermion_to_majorana(pairing_terms(layout), layout).to_hamiltonian(layout.d)
    return FermionModel(T, W, offset, layout)


def free_fermion_energy(p: HubbardParams) -> float:
    """Grand-canonical ground energy at ``U = 0``: negative levels of ``h + mu`` filled, both spins."""
    eps = np.linalg.eigvalsh(hopping_matrix(p) + p.mu * np.eye(p.n_sites))
    return 2.0 * float(eps[eps < 0].sum())
