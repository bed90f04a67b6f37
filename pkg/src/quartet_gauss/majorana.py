r"""Majorana index conventions, antisymmetric coefficient tensors and orthogonal steps.

Conventions
-----------
Fermionic modes are numbered ``p = 0 .. n_modes-1`` site-major, spin-minor
(``p = modes_per_site * site + internal``).  Every mode carries two Majorana
operators

.. math::

    c_x = a^\dagger + a, \qquad c_p = -i (a^\dagger - a),

with :math:`\{c_k, c_l\} = 2\delta_{kl}`.  Majorana indices are laid out
*per quartet*: quartet ``q`` owns the contiguous range ``8q .. 8q+7``, the
first four being the x-type operators of its modes (in quartet order) and the
last four the p-type ones.  Modes outside every quartet follow after all
quartets as adjacent ``(x, p)`` pairs.

A Hamiltonian is stored as

.. math::

    H = i \sum_{kl} T_{kl} c_k c_l + \sum_{i<j<k<l} w_{ijkl}\, c_i c_j c_k c_l + E_\mathrm{offset},

with ``T`` real antisymmetric and the quartic part kept only on strictly
increasing index tuples.  The fully antisymmetric dense tensor is
``W[sigma(ijkl)] = sgn(sigma) * w_ijkl`` so that the quartic operator equals
``(1/24) * sum W_klmn c_k c_l c_m c_n``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm, schur

__all__ = [
    "ModeLayout",
    "QuadraticTensor",
    "QuarticTensor",
    "antisymmetrize_quartic",
    "orthogonal_step",
    "orthogonality_defect",
    "reorthonormalize",
    "orthogonal_log",
    "random_orthogonal",
    "write_quartic",
    "read_quartic",
    "write_matrix",
    "read_matrix",
    "DEFECT_TOL",
]

DEFECT_TOL = 1e-10


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModeLayout:
    """Site/spin to mode map plus the partition of modes into quartets."""

    n_sites: int
    modes_per_site: int
    quartets: tuple[tuple[int, int, int, int], ...] = ()
    _kx: np.ndarray = field(init=False, repr=False, compare=False)
    _kp: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_sites < 1 or self.modes_per_site < 1:
            raise ValueError("n_sites and modes_per_site must be positive")
        quartets = tuple(tuple(int(p) for p in q) for q in self.quartets)
        object.__setattr__(self, "quartets", quartets)
        m = self.n_modes
        seen: set[int] = set()
        for q in quartets:
            if len(q) != 4 or len(set(q)) != 4:
                raise ValueError(f"quartet {q} must contain 4 distinct modes")
            for p in q:
                if not 0 <= p < m:
                    raise ValueError(f"mode {p} in quartet {q} outside [0, {m})")
                if p in seen:
                    raise ValueError(f"mode {p} belongs to more than one quartet")
                seen.add(p)
        kx = np.empty(m, dtype=np.intp)
        kp = np.empty(m, dtype=np.intp)
        for n, q in enumerate(quartets):
            for r, p in enumerate(q):
                kx[p] = 8 * n + r
                kp[p] = 8 * n + 4 + r
        base = 8 * len(quartets)
        for j, p in enumerate(p for p in range(m) if p not in seen):
            kx[p] = base + 2 * j
            kp[p] = base + 2 * j + 1
        object.__setattr__(self, "_kx", _frozen(kx))
        object.__setattr__(self, "_kp", _frozen(kp))

    @property
    def n_modes(self) -> int:
        return self.n_sites * self.modes_per_site

    @property
    def d(self) -> int:
        """Number of Majorana operators, ``2 * n_modes``."""
        return 2 * self.n_modes

    @property
    def n_quartets(self) -> int:
        return len(self.quartets)

    def mode_index(self, site: int, internal: int) -> int:
        if not (0 <= site < self.n_sites and 0 <= internal < self.modes_per_site):
            raise IndexError(f"(site={site}, internal={internal}) out of range")
        return self.modes_per_site * site + internal

    def majorana_pair(self, p: int) -> tuple[int, int]:
        return int(self._kx[p]), int(self._kp[p])

    @property
    def x_indices(self) -> np.ndarray:
        """Majorana index of ``a^dag + a`` for every mode."""
        return self._kx

    @property
    def p_indices(self) -> np.ndarray:
        return self._kp

    def quartet_majoranas(self, q: int) -> np.ndarray:
        return np.arange(8 * q, 8 * q + 8)

    def mode_major_permutation(self) -> np.ndarray:
        """``perm`` with ``perm[j]`` the layout index of mode-major Majorana ``j``.

        Mode-major order is ``(c_x(0), ..., c_x(m-1), c_p(0), ..., c_p(m-1))``,
        i.e. the global-split ordering.  ``A_mm = A[np.ix_(perm, perm)]``.
        """
        return np.concatenate([self._kx, self._kp])

    @classmethod
    def single_quartet(cls) -> "ModeLayout":
        return cls(n_sites=1, modes_per_site=4, quartets=((0, 1, 2, 3),))


@dataclass(frozen=True)
class QuadraticTensor:
    """Real antisymmetric Majorana coefficient matrix ``T``."""

    entries: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.entries, dtype=float)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise ValueError("quadratic tensor must be square")
        object.__setattr__(self, "entries", _frozen(0.5 * (t - t.T)))

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def zeros(cls, d: int) -> "QuadraticTensor":
        return cls(np.zeros((d, d)))


_PERMS4 = np.array(list(itertools.permutations(range(4))))


def _perm_sign(perm: Sequence[int]) -> int:
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                sign = -sign
    return sign


_PERM_SIGNS = np.array([_perm_sign(p) for p in _PERMS4])


@dataclass(frozen=True)
class QuarticTensor:
    """Sparse quartic Majorana tensor on strictly increasing index tuples.

    ``indices`` has shape ``(n, 4)``, rows strictly increasing and sorted
    lexicographically without duplicates; ``values`` are the coefficients of
    the ordered operator products ``c_i c_j c_k c_l``.
    """

    d: int
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.intp).reshape(-1, 4)
        val = np.asarray(self.values, dtype=float).reshape(-1)
        if len(idx) != len(val):
            raise ValueError("indices and values differ in length")
        if len(idx):
            if np.any(np.diff(idx, axis=1) <= 0):
                raise ValueError("quartic indices must be strictly increasing")
            if idx.min() < 0 or idx.max() >= self.d:
                raise ValueError(f"quartic index outside [0, {self.d})")
            keys = [tuple(r) for r in idx]
            if len(set(keys)) != len(keys):
                raise ValueError("duplicate quartic index tuple")
            if keys != sorted(keys):
                raise ValueError("quartic entries must be in canonical order")
        object.__setattr__(self, "indices", _frozen(idx))
        object.__setattr__(self, "values", _frozen(val))

    @classmethod
    def empty(cls, d: int) -> "QuarticTensor":
        return cls(d, np.zeros((0, 4), dtype=np.intp), np.zeros(0))

    @property
    def nnz(self) -> int:
        return len(self.values)

    def terms(self) -> list[tuple[int, int, int, int, float]]:
        return [(*map(int, r), float(v)) for r, v in zip(self.indices, self.values)]

    def permutations(self) -> list[tuple[int, int, int, int, float]]:
        """All 24 orderings of every entry with value ``sgn * w`` (dense tensor entries)."""
        out = []
        for r, v in zip(self.indices, self.values):
            for perm, s in zip(_PERMS4, _PERM_SIGNS):
                out.append((*map(int, r[perm]), float(s * v)))
        return out

    def to_dense(self) -> np.ndarray:
        w = np.zeros((self.d,) * 4)
        for r, v in zip(self.indices, self.values):
            for perm, s in zip(_PERMS4, _PERM_SIGNS):
                w[tuple(r[perm])] = s * v
        return w

    @classmethod
    def from_dense(cls, w: np.ndarray, tol: float = 0.0) -> "QuarticTensor":
        """Read the strictly increasing entries of a fully antisymmetric dense tensor."""
        d = w.shape[0]
        idx, val = [], []
        for key in itertools.combinations(range(d), 4):
            v = w[key]
            if abs(v) > tol:
                idx.append(key)
                val.append(v)
        return cls(d, np.array(idx, dtype=np.intp).reshape(-1, 4), np.array(val))

    def scaled(self, s: float) -> "QuarticTensor":
        return QuarticTensor(self.d, self.indices, s * self.values)


def antisymmetrize_quartic(
    raw_terms: Iterable[tuple[int, int, int, int, float]], d: int | None = None, tol: float = 0.0
) -> QuarticTensor:
    """Collect operator terms ``value * c_i c_j c_k c_l`` into canonical form.

    Each tuple is reordered to increasing indices picking up the permutation
    sign, and equal tuples are summed.  Entries whose magnitude ends up
    ``<= tol`` are dropped.
    """
    acc: dict[tuple[int, ...], list[float]] = {}
    max_index = -1
    for term in raw_terms:
        *ks, value = term
        ks = [int(k) for k in ks]
        if len(ks) != 4:
            raise ValueError(f"quartic term needs 4 indices, got {term!r}")
        if len(set(ks)) != 4:
            raise ValueError(
                f"repeated Majorana index in {tuple(ks)}: reduce c_k c_k = 1 before antisymmetrizing"
            )
        order = np.argsort(ks)
        key = tuple(ks[o] for o in order)
        acc.setdefault(key, []).append(_perm_sign(order) * float(value))
        max_index = max(max_index, key[-1])
    if d is None:
        d = max_index + 1
    elif max_index >= d:
        raise ValueError(f"index {max_index} outside [0, {d})")
    idx, val = [], []
    for key in sorted(acc):
        v = math.fsum(acc[key])
        if abs(v) > tol:
            idx.append(key)
            val.append(v)
    return QuarticTensor(d, np.array(idx, dtype=np.intp).reshape(-1, 4), np.array(val, dtype=float))


def orthogonality_defect(O: np.ndarray) -> float:
    """Frobenius norm of ``O O^T - I``."""
    O = np.asarray(O)
    return float(np.linalg.norm(O @ O.T - np.eye(O.shape[0])))


def reorthonormalize(O: np.ndarray) -> np.ndarray:
    """Nearest orthogonal matrix (polar factor)."""
    u, _, vt = np.linalg.svd(O)
    return u @ vt


def _check_antisymmetric(h: np.ndarray, tol: float = 1e-12) -> None:
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("generator must be square")
    if np.max(np.abs(h + h.T), initial=0.0) > tol * max(1.0, np.max(np.abs(h), initial=0.0)):
        raise ValueError("generator is not antisymmetric")


def orthogonal_step(O: np.ndarray, h: np.ndarray, dt: float) -> np.ndarray:
    """Return ``expm(h * dt) @ O``, re-orthonormalized if drift exceeds ``DEFECT_TOL``."""
    _check_antisymmetric(h)
    out = expm(dt * np.asarray(h, dtype=float)) @ O
    if orthogonality_defect(out) > DEFECT_TOL:
        out = reorthonormalize(out)
    return out


def orthogonal_log(O: np.ndarray) -> np.ndarray:
    """Real antisymmetric ``X`` with ``expm(X) = O`` for ``O`` in SO(d).

    Uses the real Schur form, which is block diagonal for orthogonal input.
    Eigenvalues ``-1`` are paired into rotations by ``pi``.
    """
    O = np.asarray(O, dtype=float)
    if np.linalg.det(O) < 0:
        raise ValueError("orthogonal matrix has determinant -1; no real logarithm")
    s, z = schur(O, output="real")
    d = O.shape[0]
    gen = np.zeros((d, d))
    minus_one = []
    i = 0
    while i < d:
        if i + 1 < d and abs(s[i + 1, i]) > 1e-12:
            theta = np.arctan2(s[i, i + 1], s[i, i])
            gen[i, i + 1] = theta
            gen[i + 1, i] = -theta
            i += 2
        else:
            if s[i, i] < 0:
                minus_one.append(i)
            i += 1
    for a, b in zip(minus_one[::2], minus_one[1::2]):
        gen[a, b] = np.pi
        gen[b, a] = -np.pi
    x = z @ gen @ z.T
    return 0.5 * (x - x.T)


def random_orthogonal(d: int, rng: np.random.Generator, scale: float = np.pi) -> np.ndarray:
    """``expm`` of a random antisymmetric matrix with entries of size ``~scale``."""
    a = rng.normal(scale=scale / np.sqrt(d), size=(d, d))
    return expm(0.5 * (a - a.T))


def write_quartic(path: str | Path, w: QuarticTensor) -> None:
    with open(path, "w") as fh:
        for i, j, k, l, v in w.terms():
            fh.write(f"{i} {j} {k} {l} {v:.17g}\n")


def read_quartic(path: str | Path, d: int) -> QuarticTensor:
    terms = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            i, j, k, l, v = line.split()
            terms.append((int(i), int(j), int(k), int(l), float(v)))
    return antisymmetrize_quartic(terms, d=d)


def write_matrix(path: str | Path, a: np.ndarray) -> None:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    with open(path, "w") as fh:
        fh.write(f"{a.shape[0]}\n")
        for row in a:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_matrix(path: str | Path) -> np.ndarray:
    with open(path) as fh:
        d = int(fh.readline())
        rows = [list(map(float, line.split())) for line in fh if line.strip()]
    a = np.array(rows, dtype=float).reshape(d, -1)
    return a
