"""Local reference state ``prod_q (cos b_q + sin b_q a+a+a+a+)|0>``.

Its covariance matrix is block diagonal with factor ``cos 2b_q`` on every
quartet, and its four-point function is Wick's theorem applied to that
covariance plus a connected correction living inside single quartets.  The
correction is obtained once by brute force on the 16-dimensional Fock space
of one quartet and stored as constant coefficient tensors over a fixed set of
angular basis functions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .majorana import ModeLayout

# basis functions of the correction; products of two covariance entries
# carry cos^2(2b), hence harmonics up to 4b.
BASIS_NAMES = ("1", "cos2b", "sin2b", "cos4b", "sin4b")


def _basis(beta: np.ndarray) -> np.ndarray:
    b = np.asarray(beta, dtype=float)
    return np.stack([np.ones_like(b), np.cos(2 * b), np.sin(2 * b), np.cos(4 * b), np.sin(4 * b)])


def _basis_derivative(beta: np.ndarray) -> np.ndarray:
    b = np.asarray(beta, dtype=float)
    return np.stack(
        [np.zeros_like(b), -2 * np.sin(2 * b), 2 * np.cos(2 * b), -4 * np.sin(4 * b), 4 * np.cos(4 * b)]
    )


_SIGMA = np.block([[np.zeros((4, 4)), np.eye(4)], [-np.eye(4), np.zeros((4, 4))]])


def ref_covariance(beta: np.ndarray, layout: ModeLayout) -> np.ndarray:
    """Covariance of the reference state in the layout's Majorana order."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (layout.n_quartets,):
        raise ValueError(f"beta has shape {beta.shape}, layout has {layout.n_quartets} quartets")
    d = layout.d
    G = np.zeros((d, d))
    for q, b in enumerate(beta):
        s = slice(8 * q, 8 * q + 8)
        G[s, s] = np.cos(2 * b) * _SIGMA
    for j in range(8 * layout.n_quartets, d, 2):
        G[j, j + 1] = 1.0
        G[j + 1, j] = -1.0
    return G


def wick_fourpoint(G: np.ndarray) -> np.ndarray:
    """Dense ``-G_ij G_kl + G_ik G_jl - G_il G_jk`` with repeated-index entries zeroed."""
    K = (
        -np.einsum("ij,kl->ijkl", G, G)
        + np.einsum("ik,jl->ijkl", G, G)
        - np.einsum("il,jk->ijkl", G, G)
    )
    d = G.shape[0]
    i, j, k, l = np.indices((d,) * 4)
    K[(i == j) | (i == k) | (i == l) | (j == k) | (j == l) | (k == l)] = 0.0
    return K


@dataclass(frozen=True)
class LocalTensors:
    """Connected four-point correction of one quartet.

    ``subsets`` holds the increasing local index sets ``(a<b<c<d)`` within
    the quartet's 8 Majoranas on which the correction is nonzero; the value
    on subset ``s`` is ``coeffs[:, s] @ basis(beta)``.
    """

    subsets: np.ndarray  # (n_sub, 4) int
    coeffs: np.ndarray  # (n_basis, n_sub)

    def values(self, beta: np.ndarray) -> np.ndarray:
        """Correction values, shape ``(len(beta), n_sub)``."""
        return _basis(np.atleast_1d(beta)).T @ self.coeffs

    def derivatives(self, beta: np.ndarray) -> np.ndarray:
        return _basis_derivative(np.atleast_1d(beta)).T @ self.coeffs

    def dense(self, beta: float) -> np.ndarray:
        out = np.zeros((8,) * 4)
        vals = self.values(np.array([beta]))[0]
        for key, v in zip(self.subsets, vals):
            for perm in itertools.permutations(range(4)):
                out[tuple(key[list(perm)])] = _sign(perm) * v
        return out


def _sign(perm) -> int:
    s = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                s = -s
    return s


@lru_cache(maxsize=1)
def derive_local_tensors(tol: float = 1e-12) -> LocalTensors:
    """Fit the exact single-quartet correction over the angular basis.

    The four-point function of ``cos b |0> + sin b |1111>`` is evaluated in
    Fock space at ``len(BASIS_NAMES)`` angles, Wick's contribution is
    subtracted and the remainder is solved for exactly in the basis.
    """
    from . import ed

    layout = ModeLayout.single_quartet()
    nb = len(BASIS_NAMES)
    angles = np.linspace(0.1, 1.3, nb)
    subsets = list(itertools.combinations(range(8), 4))
    samples = np.zeros((nb, len(subsets)))
    for a, b in enumerate(angles):
        psi = ed.reference_state_vector([b], layout)
        K = ed.ed_fourpoint(psi, layout)
        dK = K - wick_fourpoint(ref_covariance(np.array([b]), layout))
        samples[a] = [dK[s] for s in subsets]
    coeffs = np.linalg.solve(_basis(angles).T, samples)
    # the exact coefficients are small dyadic rationals; snapping removes the
    # solve's round-off so that the correction vanishes exactly at beta = 0
    snapped = np.round(coeffs * 1024) / 1024
    close = np.abs(coeffs - snapped) < tol
    coeffs[close] = snapped[close]
    keep = np.any(coeffs != 0.0, axis=0)
    return LocalTensors(np.array(subsets, dtype=np.intp)[keep], coeffs[:, keep])


def correction_values(beta: np.ndarray) -> np.ndarray:
    """Per-quartet correction on the support subsets, shape ``(n_quartets, n_sub)``."""
    return derive_local_tensors().values(np.asarray(beta, dtype=float))


def ref_fourpoint(beta: np.ndarray, layout: ModeLayout) -> np.ndarray:
    """Dense reference four-point tensor, Wick plus local corrections (small systems only)."""
    K = wick_fourpoint(ref_covariance(beta, layout))
    lt = derive_local_tensors()
    for q, b in enumerate(np.asarray(beta, dtype=float)):
        s = slice(8 * q, 8 * q + 8)
        K[s, s, s, s] += lt.dense(b)
    return K


def ref_beta_derivatives(beta: np.ndarray, layout: ModeLayout) -> tuple[np.ndarray, np.ndarray]:
    """``(dG, dK)``: ``dG[q]`` is the derivative of quartet q's 8x8 covariance block,
    ``dK[q]`` that of its correction values on the support subsets."""
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (layout.n_quartets,):
        raise ValueError(f"beta has shape {beta.shape}, layout has {layout.n_quartets} quartets")
    dG = (-2 * np.sin(2 * beta))[:, None, None] * _SIGMA[None]
    dK = derive_local_tensors().derivatives(beta)
    return dG, dK
