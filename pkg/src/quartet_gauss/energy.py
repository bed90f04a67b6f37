r"""Expectation values and gradients on the states ``U_O |psi_beta>``.

For an observable ``i sum T_kl c_k c_l + sum_{i<j<k<l} w_ijkl c_i c_j c_k c_l``
the expectation is

.. math::

    \sum_{kl} T_{kl} G'_{kl} + \sum w_{ijkl} \big(\mathrm{Wick}(G')_{ijkl}
    + \sum_q \sum_S \Delta_q[S] \det O[(ijkl), S_q]\big),

where ``G' = O G0 O^T`` and the second term routes the rotated local
correction through 4x4 minors of ``O`` restricted to the quartet columns.
Nothing of size ``d^4`` is ever formed.

Gradients are the exact derivatives of this expression.  ``gamma_gradient``
returns the antisymmetric ``h`` with
``E(expm(eps X) O) = E(O) + eps <h, X>_F + O(eps^2)``, so ``-h`` is the
steepest descent generator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .majorana import ModeLayout, QuadraticTensor, QuarticTensor, orthogonality_defect
from .reference import derive_local_tensors, ref_beta_derivatives, ref_covariance

# number of quartic terms contracted at once; bounds the minor buffer size
_CHUNK = 64


@dataclass(frozen=True)
class VariationalPoint:
    beta: np.ndarray
    O: np.ndarray

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float).reshape(-1)
        O = np.array(self.O, dtype=float)
        if not np.all(np.isfinite(beta)) or not np.all(np.isfinite(O)):
            raise ValueError("non-finite variational parameters")
        beta.setflags(write=False)
        O.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "O", O)

    @classmethod
    def vacuum(cls, layout: ModeLayout) -> "VariationalPoint":
        return cls(np.zeros(layout.n_quartets), np.eye(layout.d))

    def with_beta(self, beta) -> "VariationalPoint":
        return VariationalPoint(beta, self.O)

    def with_O(self, O) -> "VariationalPoint":
        return VariationalPoint(self.beta, O)


def rotate_covariance(G0: np.ndarray, O: np.ndarray) -> np.ndarray:
    Gr = O @ G0 @ O.T
    return 0.5 * (Gr - Gr.T)


def _check(T: QuadraticTensor, W: QuarticTensor, point: VariationalPoint, layout: ModeLayout):
    d = layout.d
    if T.d != d or W.d != d or point.O.shape != (d, d):
        raise ValueError(
            f"dimension mismatch: layout d={d}, T d={T.d}, W d={W.d}, O {point.O.shape}"
        )
    if point.beta.shape != (layout.n_quartets,):
        raise ValueError("beta length differs from quartet count")


def _wick_terms(G: np.ndarray, W: QuarticTensor) -> np.ndarray:
    i, j, k, l = W.indices.T
    return -G[i, j] * G[k, l] + G[i, k] * G[j, l] - G[i, l] * G[j, k]


def _wick_dG(G: np.ndarray, W: QuarticTensor) -> np.ndarray:
    """Derivative of ``sum w Wick(G)`` with respect to each entry of ``G``."""
    F = np.zeros_like(G)
    if W.nnz == 0:
        return F
    i, j, k, l = W.indices.T
    v = W.values
    for (a, b, c, e), s in (((i, j, k, l), -1.0), ((i, k, j, l), 1.0), ((i, l, j, k), -1.0)):
        np.add.at(F, (a, b), s * v * G[c, e])
        np.add.at(F, (c, e), s * v * G[a, b])
    return F


def _det3(m: np.ndarray) -> np.ndarray:
    return (
        m[..., 0, 0] * (m[..., 1, 1] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 1])
        - m[..., 0, 1] * (m[..., 1, 0] * m[..., 2, 2] - m[..., 1, 2] * m[..., 2, 0])
        + m[..., 0, 2] * (m[..., 1, 0] * m[..., 2, 1] - m[..., 1, 1] * m[..., 2, 0])
    )


_KEEP = np.array([[j for j in range(4) if j != i] for i in range(4)])
_COF_SIGN = np.array([[(-1) ** (r + c) for c in range(4)] for r in range(4)], dtype=float)


def _det4_and_cofactors(A: np.ndarray, need_cof: bool):
    """Determinants of ``(..., 4, 4)`` and optionally the cofactor matrices."""
    if not need_cof:
        return np.linalg.det(A), None
    sub = A[..., _KEEP[:, None, :, None], _KEEP[None, :, None, :]]  # (..., 4, 4, 3, 3)
    minors = _det3(sub)
    cof = _COF_SIGN * minors
    det = np.einsum("...c,...c->...", A[..., 0, :], cof[..., 0, :])
    return det, cof


def _quartet_rows(O: np.ndarray, rows: np.ndarray, nq: int) -> np.ndarray:
    """``O[rows][:, quartet columns]`` reshaped to ``(n_terms, nq, 4, 8)``."""
    R = O[rows][:, :, : 8 * nq]  # (n, 4, 8nq)
    return R.reshape(len(rows), 4, nq, 8).transpose(0, 2, 1, 3)


def _correction(
    O: np.ndarray,
    W: QuarticTensor,
    delta: np.ndarray,
    nq: int,
    *,
    want_dets: bool = False,
    want_grad: bool = False,
):
    """Rotated local correction contracted with ``W``.

    Returns ``(energy, dets_weighted, Gx)`` where ``dets_weighted[q, s]`` is
    ``sum_w w * det`` (for beta derivatives) and ``Gx`` the Euclidean
    derivative with respect to a left generator (``dE = <Gx, X>``).
    """
    lt = derive_local_tensors()
    subsets = lt.subsets
    d = O.shape[0]
    energy = 0.0
    dets_w = np.zeros((nq, len(subsets))) if want_dets else None
    Gx = np.zeros((d, d)) if want_grad else None
    if W.nnz == 0 or nq == 0:
        return energy, dets_w, Gx
    Oq = O[:, : 8 * nq]
    for start in range(0, W.nnz, _CHUNK):
        idx = W.indices[start : start + _CHUNK]
        v = W.values[start : start + _CHUNK]
        R = _quartet_rows(O, idx, nq)  # (n, nq, 4, 8)
        A = R[:, :, :, subsets].transpose(0, 1, 3, 2, 4)  # (n, nq, ns, 4, 4)
        det, cof = _det4_and_cofactors(A, want_grad)
        energy += float(np.einsum("n,nqs,qs->", v, det, delta))
        if want_dets:
            dets_w += np.einsum("n,nqs->qs", v, det)
        if want_grad:
            # g[n, q, r, a]: derivative of sum_s delta det with respect to R[n, q, r, a]
            g = np.zeros(R.shape)
            weighted = cof * delta[None, :, :, None, None]  # (n, nq, ns, 4 rows, 4 cols)
            for col in range(4):
                cols = subsets[:, col]
                contrib = weighted[:, :, :, :, col]  # (n, nq, ns, 4)
                # scatter over quartet-local Majorana index
                for s_idx, a in enumerate(cols):
                    g[:, :, :, a] += contrib[:, :, s_idx, :]
            g = g * v[:, None, None, None]
            gflat = g.transpose(0, 2, 1, 3).reshape(len(idx) * 4, 8 * nq)
            rows_contrib = gflat @ Oq.T  # (n*4, d)
            np.add.at(Gx, idx.reshape(-1), rows_contrib)
    return energy, dets_w, Gx


def expectation(
    T: QuadraticTensor,
    W: QuarticTensor,
    point: VariationalPoint,
    layout: ModeLayout,
    offset: float = 0.0,
) -> float:
    _check(T, W, point, layout)
    G = rotate_covariance(ref_covariance(point.beta, layout), point.O)
    e = offset + float(np.sum(T.entries * G))
    if W.nnz:
        e += float(W.values @ _wick_terms(G, W))
        delta = derive_local_tensors().values(point.beta)
        e += _correction(point.O, W, delta, layout.n_quartets)[0]
    return e


def energy_and_gradients(
    T: QuadraticTensor,
    W: QuarticTensor,
    point: VariationalPoint,
    layout: ModeLayout,
    offset: float = 0.0,
    *,
    want_gamma: bool = True,
    want_beta: bool = True,
) -> tuple[float, np.ndarray | None, np.ndarray | None]:
    """Energy, antisymmetric O-generator gradient and beta gradient in one pass."""
    _check(T, W, point, layout)
    nq = layout.n_quartets
    O = point.O
    G = rotate_covariance(ref_covariance(point.beta, layout), O)
    e = offset + float(np.sum(T.entries * G))
    F = np.array(T.entries, dtype=float)
    delta = derive_local_tensors().values(point.beta) if nq else np.zeros((0, 0))
    if W.nnz:
        e += float(W.values @ _wick_terms(G, W))
        F += _wick_dG(G, W)
        ec, dets_w, Gx = _correction(O, W, delta, nq, want_dets=want_beta, want_grad=want_gamma)
        e += ec
    else:
        dets_w, Gx = None, None

    h = None
    if want_gamma:
        Fa = 0.5 * (F - F.T)
        h = G @ Fa - Fa @ G
        if Gx is not None:
            h = h + 0.5 * (Gx - Gx.T)
        h = 0.5 * (h - h.T)

    gb = None
    if want_beta:
        gb = np.zeros(nq)
        if nq:
            dG, dK = ref_beta_derivatives(point.beta, layout)
            Oq = O[:, : 8 * nq]
            Ft = Oq.T @ F @ Oq
            for q in range(nq):
                s = slice(8 * q, 8 * q + 8)
                gb[q] = np.sum(Ft[s, s] * dG[q])
            if dets_w is not None:
                gb += np.sum(dets_w * dK, axis=1)
    return e, h, gb


def gamma_gradient(T, W, point, layout) -> np.ndarray:
    return energy_and_gradients(T, W, point, layout, want_beta=False)[1]


def beta_gradient(T, W, point, layout) -> np.ndarray:
    return energy_and_gradients(T, W, point, layout, want_gamma=False)[2]


def covariance(point: VariationalPoint, layout: ModeLayout) -> np.ndarray:
    return rotate_covariance(ref_covariance(point.beta, layout), point.O)


def particle_number(point: VariationalPoint, layout: ModeLayout) -> tuple[np.ndarray, float]:
    """Per-mode occupations ``(1 - G'[x, p]) / 2`` and their sum."""
    G = covariance(point, layout)
    occ = 0.5 * (1.0 - G[layout.x_indices, layout.p_indices])
    return occ, float(occ.sum())


def point_is_valid(point: VariationalPoint, tol: float = 1e-10) -> bool:
    return orthogonality_defect(point.O) <= tol
