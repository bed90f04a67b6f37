"""Exact Fock-space evaluation on small systems.

Jordan-Wigner convention: basis state ``|n>`` is the integer whose bit ``p``
is the occupation of mode ``p``;
``a_p |n> = (-1)^{sum_{q<p} n_q} n_p |n - 2^p>``.  Modes follow the layout's
site-major, spin-minor numbering.
"""

from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh, expm
from scipy.sparse.linalg import eigsh, expm_multiply
from scipy.optimize import minimize

from .majorana import ModeLayout, QuadraticTensor, QuarticTensor, orthogonal_log

MAX_MODES = 14
DENSE_LIMIT = 1 << 10


class FockSpaceTooLarge(ValueError):
    pass


def _check_modes(m: int, limit: int = MAX_MODES) -> None:
    if m > limit:
        raise FockSpaceTooLarge(f"{m} modes exceed the limit of {limit} for dense Fock evaluation")


@lru_cache(maxsize=32)
def annihilators(m: int) -> tuple[sp.csr_matrix, ...]:
    """Sparse ``a_p`` for ``p < m`` on the ``2^m`` Fock space."""
    _check_modes(m)
    dim = 1 << m
    states = np.arange(dim)
    out = []
    for p in range(m):
        occ = (states >> p) & 1
        src = states[occ == 1]
        below = src & ((1 << p) - 1)
        parity = np.array([bin(x).count("1") & 1 for x in below], dtype=np.int64)
        data = np.where(parity, -1.0, 1.0)
        out.append(sp.csr_matrix((data, (src ^ (1 << p), src)), shape=(dim, dim)))
    return tuple(out)


def majorana_operators(layout: ModeLayout) -> list[sp.csr_matrix]:
    """Majorana matrices indexed by the layout's Majorana index."""
    m = layout.n_modes
    a = annihilators(m)
    c: list = [None] * layout.d
    for p in range(m):
        kx, kp = layout.majorana_pair(p)
        ad = a[p].T.tocsr()
        c[kx] = (ad + a[p]).tocsr()
        c[kp] = (-1j * (ad - a[p])).tocsr()
    return c


def hamiltonian_matrix(
    T: QuadraticTensor, W: QuarticTensor, offset: float, layout: ModeLayout
) -> sp.csr_matrix:
    c = majorana_operators(layout)
    dim = 1 << layout.n_modes
    H = offset * sp.identity(dim, dtype=complex, format="csr")
    t = T.entries
    for k, l in zip(*np.nonzero(t)):
        H = H + 1j * t[k, l] * (c[k] @ c[l])
    for (i, j, k, l), v in zip(W.indices, W.values):
        H = H + v * (c[i] @ c[j] @ c[k] @ c[l])
    return H.tocsr()


def number_operators(layout: ModeLayout) -> list[sp.csr_matrix]:
    a = annihilators(layout.n_modes)
    return [(x.T @ x).tocsr() for x in a]


def sector_basis(layout: ModeLayout, n_up: int, n_down: int) -> np.ndarray:
    """Fock basis indices with the given spin-resolved particle numbers (2 modes per site)."""
    if layout.modes_per_site != 2:
        raise ValueError("spin sectors require two modes per site")
    states = np.arange(1 << layout.n_modes)
    up = sum(((states >> (2 * s)) & 1) for s in range(layout.n_sites))
    dn = sum(((states >> (2 * s + 1)) & 1) for s in range(layout.n_sites))
    return states[(up == n_up) & (dn == n_down)]


def lowest_eigenpair(H: sp.spmatrix) -> tuple[float, np.ndarray]:
    dim = H.shape[0]
    if dim <= DENSE_LIMIT:
        w, v = eigh(H.toarray())
        return float(w[0]), v[:, 0]
    w, v = eigsh(H, k=1, which="SA", tol=1e-13, ncv=min(dim, 40))
    return float(w[0]), v[:, 0]


def ed_ground(
    T: QuadraticTensor,
    W: QuarticTensor,
    offset: float,
    layout: ModeLayout,
    sector: str | tuple[int, int] = "all",
) -> tuple[float, np.ndarray]:
    """Lowest eigenvalue and eigenvector, either over all of Fock space or one ``(N_up, N_down)`` sector.

    The returned vector always lives in the full ``2^m`` space.
    """
    _check_modes(layout.n_modes)
    H = hamiltonian_matrix(T, W, offset, layout)
    if sector == "all":
        return lowest_eigenpair(H)
    basis = sector_basis(layout, *sector)
    if len(basis) == 0:
        raise ValueError(f"empty sector {sector}")
    e, v = lowest_eigenpair(H[basis][:, basis])
    full = np.zeros(H.shape[0], dtype=complex)
    full[basis] = v
    return e, full


def sector_energies(T, W, offset, layout) -> list[tuple[tuple[int, int], float]]:
    rows = []
    for nu in range(layout.n_sites + 1):
        for nd in range(layout.n_sites + 1):
            rows.append(((nu, nd), ed_ground(T, W, offset, layout, (nu, nd))[0]))
    return rows


def reference_state_vector(beta: np.ndarray, layout: ModeLayout) -> np.ndarray:
    """``prod_q (cos b_q + sin b_q a+_{q0} a+_{q1} a+_{q2} a+_{q3}) |0>``."""
    _check_modes(layout.n_modes)
    a = annihilators(layout.n_modes)
    psi = np.zeros(1 << layout.n_modes, dtype=complex)
    psi[0] = 1.0
    for b, q in zip(np.asarray(beta, dtype=float), layout.quartets):
        create = a[q[0]].T @ a[q[1]].T @ a[q[2]].T @ a[q[3]].T
        psi = np.cos(b) * psi + np.sin(b) * (create @ psi)
    return psi


def gaussian_unitary_generator(O: np.ndarray, layout: ModeLayout) -> sp.csr_matrix:
    """Anti-Hermitian ``X`` such that ``U = exp(X)`` obeys ``U^dag c_k U = sum_l O_kl c_l``."""
    A = 0.25 * orthogonal_log(O)
    c = majorana_operators(layout)
    dim = 1 << layout.n_modes
    X = sp.csr_matrix((dim, dim), dtype=complex)
    for k, l in zip(*np.nonzero(np.abs(A) > 0)):
        X = X + A[k, l] * (c[k] @ c[l])
    return X.tocsr()


def ed_state_of_point(beta: np.ndarray, O: np.ndarray, layout: ModeLayout) -> np.ndarray:
    """Explicit ``U_O |psi_beta>`` in the full Fock space."""
    psi = reference_state_vector(beta, layout)
    X = gaussian_unitary_generator(O, layout)
    if X.shape[0] <= DENSE_LIMIT:
        phi = expm(X.toarray()) @ psi
    else:
        phi = expm_multiply(X, psi)
    return phi / np.linalg.norm(phi)


def expectation(op: sp.spmatrix, psi: np.ndarray) -> complex:
    return complex(np.vdot(psi, op @ psi))


def ed_covariance(psi: np.ndarray, layout: ModeLayout) -> np.ndarray:
    """``G_kl = (i/2) <[c_k, c_l]>``."""
    c = majorana_operators(layout)
    d = layout.d
    G = np.zeros((d, d))
    right = [x @ psi for x in c]
    for k in range(d):
        left = c[k].conj().T @ psi
        for l in range(k + 1, d):
            # for k != l, (i/2)[c_k, c_l] = i c_k c_l
            v = (1j * np.vdot(left, right[l])).real
            G[k, l] = v
            G[l, k] = -v
    return G


def ed_fourpoint(psi: np.ndarray, layout: ModeLayout) -> np.ndarray:
    """Dense fully antisymmetrized ``K_klmn = <[[c_k c_l c_m c_n]]> / 4!``."""
    _check_modes(layout.n_modes, 8)
    c = majorana_operators(layout)
    d = layout.d
    K = np.zeros((d,) * 4)
    right = [c[l] @ psi for l in range(d)]
    for key in itertools.combinations(range(d), 4):
        i, j, k, l = key
        v = np.vdot(psi, c[i] @ (c[j] @ (c[k] @ right[l])))
        v = v.real
        for perm in itertools.permutations(range(4)):
            K[tuple(key[p] for p in perm)] = _sign(perm) * v
    return K


def _sign(perm) -> int:
    s = 1
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                s = -s
    return s


def _unitary_from_params(x: np.ndarray, m: int) -> np.ndarray:
    h = np.zeros((m, m), dtype=complex)
    iu = np.triu_indices(m, 1)
    n_off = len(iu[0])
    h[iu] = x[:n_off] + 1j * x[n_off : 2 * n_off]
    h = h + h.conj().T
    h[np.diag_indices(m)] = x[2 * n_off :]
    return expm(1j * h)


def pair_correlations(psi: np.ndarray, m: int) -> np.ndarray:
    """``X[k, l] = <a+_{2k} a+_{2k+1} a_{2l+1} a_{2l}>`` in the computational basis."""
    a = annihilators(m)
    npair = m // 2
    bpsi = [a[2 * l + 1] @ (a[2 * l] @ psi) for l in range(npair)]
    return np.array([[np.vdot(bpsi[k], bpsi[l]) for l in range(npair)] for k in range(npair)])


def _rotated_pair_matrix(psi_ops, u: np.ndarray) -> np.ndarray:
    """Pair correlations in the basis ``b_k = sum_p u[p, k] a_p`` from precomputed two-point data."""
    # <b+_{2k} b+_{2k+1} b_{2l+1} b_{2l}> = sum conj(u_p,2k u_q,2k+1) u_r,2l u_s,2l+1 <a+_p a+_q a_s a_r>
    D = psi_ops  # D[p, q, r, s] = <a+_p a+_q a_s a_r>
    m = u.shape[0]
    npair = m // 2
    ev, od = u[:, 0 : 2 * npair : 2], u[:, 1 : 2 * npair : 2]
    left = np.einsum("pk,qk,pqrs->krs", ev.conj(), od.conj(), D)
    return np.einsum("krs,rl,sl->kl", left, ev, od)


def ed_pairing_bruteforce(
    psi: np.ndarray,
    layout: ModeLayout,
    samples: int = 200,
    refine: int = 8,
    seed: int = 0,
    absolute: bool = True,
) -> dict:
    """Maximize ``(1/N) sum_kl |<b+_{2k-1} b+_{2k} b_{2l} b_{2l-1}>|`` over mode bases ``b = u^T a``.

    Random unitaries are sampled, the best ``refine`` are polished with BFGS,
    and the identity basis is always included.  The result is a certified
    lower bound on the true maximum.  With ``absolute=False`` the signed sum
    ``sum_kl <...>`` (that is ``-<P>`` in the rotated basis) is maximized instead.
    """
    m = layout.n_modes
    _check_modes(m, 8)
    a = annihilators(m)
    ntot = sum(expectation(x.T @ x, psi).real for x in a)
    if ntot < 1e-10:
        raise ValueError("pairing measure undefined for a state without particles")
    norm = ntot / 2
    two = [[a[s] @ (a[r] @ psi) for s in range(m)] for r in range(m)]  # a_s a_r |psi>
    D = np.zeros((m, m, m, m), dtype=complex)
    for p in range(m):
        for q in range(m):
            for r in range(m):
                for s in range(m):
                    # <a+_p a+_q a_s a_r> = <(a_q a_p) psi | a_s a_r psi>
                    D[p, q, r, s] = np.vdot(two[p][q], two[r][s])

    def objective(x):
        u = _unitary_from_params(x, m)
        X = _rotated_pair_matrix(D, u)
        return -(np.abs(X).sum() if absolute else X.sum().real) / norm

    rng = np.random.default_rng(seed)
    npar = m * m
    starts = [np.zeros(npar)] + [rng.normal(scale=np.pi, size=npar) for _ in range(samples)]
    vals = np.array([objective(x) for x in starts])
    order = np.argsort(vals)[:refine]
    best = -vals.min()
    for i in order:
        res = minimize(objective, starts[i], method="BFGS", options={"gtol": 1e-10, "maxiter": 2000})
        best = max(best, -res.fun)
    return {
        "M": float(best),
        "N_tot": float(ntot),
        "samples": samples,
        "refined": int(refine),
        "absolute": absolute,
    }
