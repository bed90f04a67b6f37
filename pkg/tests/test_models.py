import numpy as np
import pytest

from quartet_gauss import ed
from quartet_gauss.energy import VariationalPoint, expectation
from quartet_gauss.fermion import MajoranaPolynomial, fermion_to_majorana, number
from quartet_gauss.majorana import ModeLayout
from quartet_gauss.models import (
    ConfigurationError,
    HubbardParams,
    build_h4,
    build_hubbard,
    build_pairing_operator,
    domino_quartets,
    free_fermion_energy,
    hopping_matrix,
    hubbard_layout,
    hubbard_terms,
    lattice_bonds,
)


def fock_operator(terms, m):
    """Second-quantized operator built directly from ladder matrices."""
    a = ed.annihilators(m)
    dim = 1 << m
    H = np.zeros((dim, dim), dtype=complex)
    for coeff, ops in terms:
        M = np.eye(dim, dtype=complex)
        for p, dag in ops:
            M = M @ (a[p].T.toarray() if dag else a[p].toarray())
        H += coeff * M
    return H


class TestLattice:
    def test_ring_bonds(self):
        assert lattice_bonds(HubbardParams(4)) == [(0, 1), (0, 3), (1, 2), (2, 3)]

    def test_extent_two_collapses(self):
        assert lattice_bonds(HubbardParams(2, 2)) == [(0, 1), (0, 2), (1, 3), (2, 3)]

    def test_open(self):
        assert lattice_bonds(HubbardParams(3, bc="open")) == [(0, 1), (1, 2)]

    def test_single_site_has_no_bonds(self):
        assert lattice_bonds(HubbardParams(1)) == []

    def test_odd_lx_domino_error(self):
        with pytest.raises(ConfigurationError, match="even Lx"):
            build_hubbard(HubbardParams(3, 2))

    def test_v_domino(self):
        qs = domino_quartets(HubbardParams(3, 2, tiling="v-domino"))
        assert qs[0] == (0, 1, 6, 7)

    def test_quartet_file(self, tmp_path):
        f = tmp_path / "q.txt"
        f.write_text("# custom\n0 1 6 7\n2 3 4 5\n")
        lay = hubbard_layout(HubbardParams(2, 2, tiling=f"file:{f}"))
        assert lay.quartets == ((0, 1, 6, 7), (2, 3, 4, 5))

    def test_bad_quartet_file(self, tmp_path):
        f = tmp_path / "q.txt"
        f.write_text("0 1 2\n")
        with pytest.raises(ConfigurationError):
            hubbard_layout(HubbardParams(2, 1, tiling=f"file:{f}"))

    def test_overlapping_tiling_is_config_error(self):
        with pytest.raises(ConfigurationError):
            hubbard_layout(HubbardParams(2, 2, tiling=[(0, 1, 2, 3), (3, 4, 5, 6)]))


@pytest.mark.parametrize(
    "p",
    [HubbardParams(2, 1, t=0.7, U=3.0, mu=-0.4), HubbardParams(3, 1, U=2.0, mu=0.3, tiling="none")],
)
def test_hubbard_round_trip(p):
    model = build_hubbard(p)
    m = model.layout.n_modes
    H = ed.hamiltonian_matrix(model.T, model.W, model.offset, model.layout).toarray()
    direct = fock_operator(hubbard_terms(p), m)
    np.testing.assert_allclose(H, direct, atol=1e-12)
    np.testing.assert_allclose(H, H.conj().T, atol=1e-12)


def test_single_site_hubbard():
    model = build_hubbard(HubbardParams(1, 1, t=5.0, U=4.0, tiling="none"))
    H = ed.hamiltonian_matrix(model.T, model.W, model.offset, model.layout).toarray()
    # basis |0>, |up>, |dn>, |updn>
    np.testing.assert_allclose(np.diag(H).real, [1, -1, -1, 1], atol=1e-14)
    assert ed.ed_ground(model.T, model.W, model.offset, model.layout)[0] == pytest.approx(-1.0)


def test_u_zero_has_no_quartic():
    assert build_hubbard(HubbardParams(4, 2, U=0.0)).W.nnz == 0


def test_free_fermion_4x4():
    assert free_fermion_energy(HubbardParams(4, 4)) == pytest.approx(-24.0, abs=1e-12)


def test_hopping_part_spectrum_pairs():
    model = build_hubbard(HubbardParams(4, 2, U=0.0))
    ev = np.linalg.eigvals(model.T.entries)
    np.testing.assert_allclose(ev.real, 0, atol=1e-12)
    np.testing.assert_allclose(np.sort(ev.imag), -np.sort(ev.imag)[::-1], atol=1e-12)


def test_vacuum_and_full_energies():
    p = HubbardParams(4, 1, U=3.0, mu=-0.7)
    model = build_hubbard(p)
    vac = VariationalPoint.vacuum(model.layout)
    assert expectation(model.T, model.W, vac, model.layout, model.offset) == pytest.approx(
        p.n_sites * p.U / 4
    )
    full = VariationalPoint(np.full(model.layout.n_quartets, np.pi / 2), np.eye(model.layout.d))
    assert expectation(model.T, model.W, full, model.layout, model.offset) == pytest.approx(
        p.n_sites * p.U / 4 + 2 * p.mu * p.n_sites
    )


class TestH4:
    def test_single_quartet(self):
        lay = ModeLayout.single_quartet()
        for U in (1.5, -2.0):
            m = build_h4(lay, np.zeros((4, 4)), U)
            assert ed.ed_ground(m.T, m.W, m.offset, lay)[0] == pytest.approx(-abs(U), abs=1e-12)

    def test_two_quartets(self):
        lay = ModeLayout(4, 2, ((0, 1, 2, 3), (4, 5, 6, 7)))
        m = build_h4(lay, np.zeros((8, 8)), 0.8)
        assert ed.ed_ground(m.T, m.W, m.offset, lay)[0] == pytest.approx(-1.6, abs=1e-12)

    def test_u_zero_is_quadratic(self):
        lay = ModeLayout(2, 2, ((0, 1, 2, 3),))
        t = np.kron(-hopping_matrix(HubbardParams(2)), np.eye(2))
        assert build_h4(lay, t, 0.0).W.nnz == 0

    def test_requires_quartets(self):
        with pytest.raises(ConfigurationError):
            build_h4(ModeLayout(2, 2), np.zeros((4, 4)), 1.0)


class TestPairingOperator:
    def test_single_site(self):
        lay = ModeLayout(1, 2)
        P = build_pairing_operator(lay)
        H = ed.hamiltonian_matrix(P.T, P.W, P.offset, lay).toarray()
        direct = fock_operator([(-1.0, number(0) + number(1))], 2)
        np.testing.assert_allclose(H, direct, atol=1e-14)

    def test_vacuum_zero(self):
        lay = ModeLayout(2, 2, ((0, 1, 2, 3),))
        P = build_pairing_operator(lay)
        assert expectation(P.T, P.W, VariationalPoint.vacuum(lay), lay, P.offset) == pytest.approx(0.0)

    def test_two_site_pair_state(self):
        lay = ModeLayout(2, 2)
        P = build_pairing_operator(lay)
        psi = np.zeros(16, dtype=complex)
        psi[0b0011] = psi[0b1100] = 1 / np.sqrt(2)
        H = ed.hamiltonian_matrix(P.T, P.W, P.offset, lay)
        assert ed.expectation(H, psi).real == pytest.approx(-2.0, abs=1e-12)


def test_polynomial_rejects_non_hermitian():
    lay = ModeLayout(1, 2)
    poly = fermion_to_majorana([(1.0, ((0, True),) + ((1, False),))], lay)
    with pytest.raises(ValueError):
        poly.to_hamiltonian(lay.d)


def test_polynomial_algebra():
    # c_0 c_0 = 1 and c_0 c_1 = -c_1 c_0
    c0 = MajoranaPolynomial({(0,): 1.0})
    c1 = MajoranaPolynomial({(1,): 1.0})
    assert (c0 * c0).terms == {(): 1.0}
    s = c0 * c1 + c1 * c0
    assert all(abs(v) < 1e-15 for v in s.terms.values())
