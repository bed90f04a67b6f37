import itertools

import numpy as np
import pytest

from quartet_gauss import ed
from quartet_gauss.majorana import ModeLayout
from quartet_gauss.reference import (
    derive_local_tensors,
    ref_beta_derivatives,
    ref_covariance,
    ref_fourpoint,
    wick_fourpoint,
)

SIGMA = np.block([[np.zeros((4, 4)), np.eye(4)], [-np.eye(4), np.zeros((4, 4))]])
TWO_Q = ModeLayout(4, 2, ((0, 1, 2, 3), (4, 5, 6, 7)))


class TestCovariance:
    def test_beta_zero(self):
        G = ref_covariance(np.zeros(2), TWO_Q)
        np.testing.assert_array_equal(G[:8, :8], SIGMA)
        np.testing.assert_array_equal(G[8:, 8:], SIGMA)

    def test_quarter_pi_block_vanishes(self):
        G = ref_covariance(np.array([np.pi / 4, 0.0]), TWO_Q)
        np.testing.assert_allclose(G[:8, :8], 0, atol=1e-15)
        np.testing.assert_array_equal(G[8:, 8:], SIGMA)

    def test_half_pi_flips_sign(self):
        G = ref_covariance(np.array([np.pi / 2, 0.0]), TWO_Q)
        np.testing.assert_allclose(G[:8, :8], -SIGMA, atol=1e-15)

    def test_leftover_modes_in_vacuum(self):
        lay = ModeLayout(3, 2, ((1, 2, 4, 5),))
        G = ref_covariance(np.array([0.3]), lay)
        assert G[8, 9] == 1 and G[10, 11] == 1
        np.testing.assert_allclose(G, -G.T)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            ref_covariance(np.zeros(3), TWO_Q)

    def test_symmetry_about_half_pi(self, rng):
        b = rng.uniform(-3, 3, 2)
        np.testing.assert_allclose(
            ref_covariance(b, TWO_Q), ref_covariance(np.pi - b, TWO_Q), atol=1e-14
        )


class TestLocalTensors:
    def test_vanishes_at_zero(self):
        assert np.all(derive_local_tensors().values(np.array([0.0])) == 0)

    def test_support_inside_one_quartet(self):
        K = ref_fourpoint(np.array([0.4, 1.1]), TWO_Q)
        W = wick_fourpoint(ref_covariance(np.array([0.4, 1.1]), TWO_Q))
        diff = np.abs(K - W)
        for idx in zip(*np.nonzero(diff > 1e-15)):
            blocks = {i // 8 for i in idx}
            assert len(blocks) == 1

    @pytest.mark.parametrize("beta", [np.pi / 3, -0.8, 2.5])
    def test_matches_fock_space(self, beta):
        lay = ModeLayout.single_quartet()
        psi = ed.reference_state_vector([beta], lay)
        np.testing.assert_allclose(ref_fourpoint(np.array([beta]), lay), ed.ed_fourpoint(psi, lay), atol=1e-12)

    def test_fully_antisymmetric(self):
        K = derive_local_tensors().dense(0.9)
        for perm in itertools.permutations(range(4)):
            sign = np.linalg.det(np.eye(4)[list(perm)])
            np.testing.assert_allclose(K.transpose(perm), sign * K, atol=1e-15)


class TestDerivatives:
    def test_zero_at_beta_zero(self):
        dG, _ = ref_beta_derivatives(np.zeros(2), TWO_Q)
        assert np.all(dG == 0)

    def test_finite_differences(self, rng):
        beta = rng.uniform(-1.5, 1.5, 2)
        dG, dK = ref_beta_derivatives(beta, TWO_Q)
        lt = derive_local_tensors()
        h = 1e-5
        for q in range(2):
            e = np.zeros(2)
            e[q] = h
            s = slice(8 * q, 8 * q + 8)
            fd_G = (ref_covariance(beta + e, TWO_Q) - ref_covariance(beta - e, TWO_Q)) / (2 * h)
            assert np.max(np.abs(fd_G[s, s] - dG[q])) <= 1e-7
            # only quartet q's block moves
            other = slice(8 * (1 - q), 8 * (1 - q) + 8)
            assert np.all(fd_G[other, other] == 0)
            fd_K = (lt.values(beta + e)[q] - lt.values(beta - e)[q]) / (2 * h)
            assert np.max(np.abs(fd_K - dK[q])) <= 1e-7
