"""Pairing measure by descent of ``<P>`` over passive (number-conserving) rotations.

The pairing operator ``P = -sum_{x,y} a+_{x up} a+_{x dn} a_{y dn} a_{y up}``
is minimized over states ``U_p |phi>`` with ``U_p`` passive, using the energy
engine with ``P`` in place of the Hamiltonian and the generator restricted
to the passive subalgebra.  Then ``M = -min <P> / (N_tot / 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .energy import VariationalPoint, particle_number
from .majorana import ModeLayout
from .models import build_pairing_operator
from .optimize import OptimizerConfig, Trajectory, run_projected_flow


@dataclass(frozen=True)
class PassiveGenerator:
    """Majorana generator ``[[h_I, -h_R], [h_R, h_I]]`` in mode-major order.

    ``h_I`` is antisymmetric and ``h_R`` symmetric; mode-major order lists
    all x-type Majoranas first, then all p-type ones.
    """

    h_I: np.ndarray
    h_R: np.ndarray

    def mode_major(self) -> np.ndarray:
        return np.block([[self.h_I, -self.h_R], [self.h_R, self.h_I]])

    def assembled(self, layout: ModeLayout) -> np.ndarray:
        """The generator in the layout's Majorana order."""
        perm = layout.mode_major_permutation()
        out = np.zeros((layout.d, layout.d))
        out[np.ix_(perm, perm)] = self.mode_major()
        return out


def passive_project(Z: np.ndarray, layout: ModeLayout) -> PassiveGenerator:
    """Orthogonal (Frobenius) projection of an antisymmetric generator onto passive ones."""
    perm = layout.mode_major_permutation()
    m = layout.n_modes
    Zm = Z[np.ix_(perm, perm)]
    Z11, Z12, Z22 = Zm[:m, :m], Zm[:m, m:], Zm[m:, m:]
    h_I = 0.5 * (Z11 + Z22)
    h_R = -0.5 * (Z12 + Z12.T)
    return PassiveGenerator(0.5 * (h_I - h_I.T), 0.5 * (h_R + h_R.T))


def random_passive(layout: ModeLayout, rng: np.random.Generator, scale: float = np.pi) -> np.ndarray:
    a = rng.normal(scale=scale / np.sqrt(layout.d), size=(layout.d, layout.d))
    return expm(passive_project(a - a.T, layout).assembled(layout))


@dataclass
class PairingResult:
    M: float
    N_tot: float
    min_P: float
    O_best: np.ndarray  # passive rotation applied on top of the state's own O
    trajectory: Trajectory
    restarts: int
    restart_values: list[float]


DEFAULT_PAIRING_CONFIG = OptimizerConfig(max_iters=3000, tol_grad=1e-9, tol_energy=1e-14)


def pairing(
    point: VariationalPoint,
    layout: ModeLayout,
    config: OptimizerConfig = DEFAULT_PAIRING_CONFIG,
    restarts: int = 8,
    seed: int = 0,
) -> PairingResult:
    """Pairing measure of ``U_O |psi_beta>``; a lower bound on the true maximum."""
    P = build_pairing_operator(layout)
    _, ntot = particle_number(point, layout)
    if ntot < 1e-10:
        raise ValueError("pairing measure undefined: state has no particles")
    norm = ntot / 2
    project = lambda h: passive_project(h, layout).assembled(layout)  # noqa: E731
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(restarts)]
    best = None
    values = []
    for r, rng in enumerate(rngs):
        Op = np.eye(layout.d) if r == 0 else random_passive(layout, rng)
        start = point.with_O(Op @ point.O)
        res = run_projected_flow(P, start, config, project)
        values.append(res.energy)
        if best is None or res.energy < best.energy:
            best = res
    O_best = best.point.O @ point.O.T
    return PairingResult(
        M=-best.energy / norm,
        N_tot=ntot,
        min_P=best.energy,
        O_best=O_best,
        trajectory=best.trajectory,
        restarts=restarts,
        restart_values=values,
    )
