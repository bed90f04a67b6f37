"""Second-quantized operators and their exact rewriting in Majorana form.

A fermionic operator is a sum of products of ``a_p`` / ``a_p^dag``.  Each
ladder operator is replaced by ``(c_x +- i c_p) / 2`` and every Majorana word
is brought to increasing order using the anticommutation relations, so the
result is exact including all constants generated by normal ordering.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable

import numpy as np

from .majorana import ModeLayout, QuadraticTensor, QuarticTensor, antisymmetrize_quartic

# (mode, is_creation)
Ladder = tuple[int, bool]


def _normal_order(word: Iterable[int]) -> tuple[int, tuple[int, ...]]:
    """Sort a Majorana word, returning ``(sign, reduced_word)``; ``c_k c_k = 1``."""
    w = list(word)
    sign = 1
    # insertion sort tracking transpositions; cancel equal neighbours as they meet
    out: list[int] = []
    for k in w:
        out.append(k)
        i = len(out) - 1
        while i > 0 and out[i - 1] > out[i]:
            out[i - 1], out[i] = out[i], out[i - 1]
            sign = -sign
            i -= 1
        if i > 0 and out[i - 1] == out[i]:
            del out[i - 1 : i + 1]
    return sign, tuple(out)


class MajoranaPolynomial:
    """Sparse map from increasing Majorana words to complex coefficients."""

    def __init__(self, terms: dict[tuple[int, ...], complex] | None = None):
        self.terms: dict[tuple[int, ...], complex] = defaultdict(complex)
        if terms:
            for k, v in terms.items():
                self.terms[k] += v

    def __add__(self, other: "MajoranaPolynomial") -> "MajoranaPolynomial":
        out = MajoranaPolynomial(self.terms)
        for k, v in other.terms.items():
            out.terms[k] += v
        return out

    def __mul__(self, other):
        if isinstance(other, MajoranaPolynomial):
            out = MajoranaPolynomial()
            for ka, va in self.terms.items():
                for kb, vb in other.terms.items():
                    s, key = _normal_order(ka + kb)
                    out.terms[key] += s * va * vb
            return out
        return MajoranaPolynomial({k: v * other for k, v in self.terms.items()})

    __rmul__ = __mul__

    def adjoint(self) -> "MajoranaPolynomial":
        # (c_1 ... c_n)^dag = c_n ... c_1 = (-1)^{n(n-1)/2} c_1 ... c_n
        return MajoranaPolynomial(
            {k: np.conj(v) * (-1) ** (len(k) * (len(k) - 1) // 2) for k, v in self.terms.items()}
        )

    def to_hamiltonian(
        self, d: int, tol: float = 1e-13
    ) -> tuple[QuadraticTensor, QuarticTensor, float]:
        """Split into ``(T, W, offset)``; the operator must be Hermitian and even of order <= 4."""
        offset = 0.0
        T = np.zeros((d, d))
        quartic = []
        for key, v in self.terms.items():
            if abs(v) <= tol:
                continue
            n = len(key)
            if n == 0:
                if abs(v.imag) > tol:
                    raise ValueError("constant term is not real: operator not Hermitian")
                offset += v.real
            elif n == 2:
                # alpha c_k c_l == i (T_kl c_k c_l + T_lk c_l c_k) with T_kl = -i alpha / 2
                t = -0.5j * v
                if abs(t.imag) > tol:
                    raise ValueError(f"quadratic word {key} has non-Hermitian coefficient {v}")
                T[key[0], key[1]] += t.real
                T[key[1], key[0]] -= t.real
            elif n == 4:
                if abs(v.imag) > tol:
                    raise ValueError(f"quartic word {key} has non-Hermitian coefficient {v}")
                quartic.append((*key, v.real))
            else:
                raise ValueError(f"Majorana word of order {n} is not supported: {key}")
        return QuadraticTensor(T), antisymmetrize_quartic(quartic, d=d), offset


def ladder_to_majorana(op: Ladder, layout: ModeLayout) -> MajoranaPolynomial:
    p, dagger = op
    kx, kp = layout.majorana_pair(p)
    s = 1j if dagger else -1j
    return MajoranaPolynomial({(kx,): 0.5, (kp,): 0.5 * s})


def fermion_to_majorana(
    terms: Iterable[tuple[complex, tuple[Ladder, ...]]], layout: ModeLayout
) -> MajoranaPolynomial:
    """Rewrite ``sum coeff * prod(ladders)`` exactly as a Majorana polynomial."""
    total = MajoranaPolynomial()
    for coeff, ops in terms:
        prod = MajoranaPolynomial({(): complex(coeff)})
        for op in ops:
            prod = prod * ladder_to_majorana(op, layout)
        total = total + prod
    return total


def number(p: int) -> tuple[Ladder, ...]:
    return ((p, True), (p, False))
