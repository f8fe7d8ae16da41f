"""
Tests for the dyadic partition and the Besov/Sobolev norms.
"""
from unittest.mock import patch

import numpy as np
from django.test import SimpleTestCase

from verification.services import littlewood_paley
from verification.services.errors import SingularityError
from verification.services.grid import (
    FOUR_PI_SQ, Field, GridSpec, bessel_potential, lp_norm, riesz_potential,
)
from verification.services.littlewood_paley import (
    besov_norm, block_norms, build_partition, bump_quotient, get_profile, partition_defect,
    project_block, project_low, sobolev_norm,
)
from verification.services.recipes import random_decay_field


class ProfileTests(SimpleTestCase):
    """Tests for the radial cutoff profile."""

    def test_bump_quotient_values(self):
        """Test chi = 1 on [0, 1] and 0 on [2, inf)."""
        r = np.array([0.0, 0.5, 1.0, 2.0, 3.0])
        np.testing.assert_array_equal(bump_quotient(r), [1.0, 1.0, 1.0, 0.0, 0.0])

    def test_bump_quotient_monotone(self):
        """Test that chi decreases on (1, 2)."""
        values = bump_quotient(np.linspace(1.0, 2.0, 101))
        self.assertTrue(np.all(np.diff(values) <= 0))

    def test_unknown_profile(self):
        """Test that an unknown profile name is rejected."""
        with self.assertRaises(ValueError):
            get_profile('box')


class PartitionTests(SimpleTestCase):
    """Tests for the partition of unity on a grid."""

    def setUp(self):
        self.grid = GridSpec(1, 256, 1.0)

    def test_resolved_range(self):
        """Test j_min and j_max on the unit torus with 256 points."""
        partition = build_partition(self.grid)
        self.assertEqual((partition.j_min, partition.j_max), (0, 8))

    def test_partition_of_unity(self):
        """Test that the blocks sum to one on the lattice."""
        partition = build_partition(self.grid)
        self.assertLessEqual(partition_defect(partition, homogeneous=False), 1e-12)
        self.assertLessEqual(partition_defect(partition, homogeneous=True), 1e-12)

    def test_partition_of_unity_two_dimensional(self):
        """Test the partition of unity on a 2-d grid with a non-unit period."""
        partition = build_partition(GridSpec(2, 64, 2.0))
        self.assertLessEqual(partition_defect(partition), 1e-12)
        self.assertLessEqual(partition_defect(partition, homogeneous=True), 1e-12)

    def test_partition_is_cached(self):
        """Test that a built partition is stored in the cache."""
        with patch.object(littlewood_paley, 'cache') as mock_cache:
            mock_cache.get.return_value = None
            partition = build_partition(self.grid)
            mock_cache.set.assert_called_once()
            self.assertIs(mock_cache.set.call_args[0][1], partition)

    def test_partition_from_cache(self):
        """Test that a cached partition is returned without rebuilding."""
        sentinel = object()
        with patch.object(littlewood_paley, 'cache') as mock_cache:
            mock_cache.get.return_value = sentinel
            self.assertIs(build_partition(self.grid), sentinel)
            mock_cache.set.assert_not_called()


class ProjectionTests(SimpleTestCase):
    """Tests for block and low-frequency projections."""

    def setUp(self):
        self.grid = GridSpec(1, 256, 1.0)

    def test_single_mode_lives_in_one_block(self):
        """Test that |xi| = 2^j0 is carried by block j0 only."""
        f = Field.plane_wave(self.grid, 16)
        np.testing.assert_allclose(project_block(f, 4).values, f.values, atol=1e-15)
        self.assertEqual(np.abs(project_block(f, 3).values).max(), 0.0)
        self.assertEqual(np.abs(project_block(f, 5).values).max(), 0.0)

    def test_block_index_out_of_range(self):
        """Test that unresolved block indices are rejected."""
        f = Field.plane_wave(self.grid, 16)
        for j in (-1, 9):
            with self.assertRaises(ValueError):
                project_block(f, j)

    def test_blocks_reassemble_field(self):
        """Test that the low block plus all blocks gives back f."""
        rng = np.random.default_rng(0)
        f = Field.physical(self.grid, rng.standard_normal(256))
        total = project_low(f).values + sum(project_block(f, j).values for j in range(1, 9))
        np.testing.assert_allclose(total, f.values, atol=1e-12)

    def test_low_projection(self):
        """Test that psi keeps constants and |xi| = 1, and removes |xi| >= 2."""
        constant = Field.physical(self.grid, np.ones(256))
        np.testing.assert_allclose(project_low(constant).values, constant.values, atol=1e-14)
        one = Field.plane_wave(self.grid, 1)
        np.testing.assert_allclose(project_low(one).values, one.values, atol=1e-15)
        self.assertEqual(np.abs(project_low(Field.plane_wave(self.grid, 2)).values).max(), 0.0)


class NormTests(SimpleTestCase):
    """Tests for Besov and Sobolev norms."""

    def setUp(self):
        self.grid = GridSpec(1, 256, 1.0)

    def mean_zero_field(self, seed):
        return random_decay_field(self.grid, 1.0, np.random.default_rng(seed))

    def test_zero_field(self):
        """Test that the zero field has zero norms."""
        zero = Field.zeros(self.grid)
        self.assertEqual(besov_norm(zero, 1.0, 2), 0.0)
        self.assertEqual(besov_norm(zero, -1.0, 2, homogeneous=True), 0.0)
        self.assertEqual(sobolev_norm(zero, 1.0, 2), 0.0)

    def test_single_mode_besov(self):
        """Test ||e_xi||_{B^k_p} = 2^{k j0} for |xi| = 2^j0."""
        j0 = 4
        f = Field.plane_wave(self.grid, 2 ** j0)
        for k in (-1.0, 0.5, 2.0):
            for p in (1, 2, 4):
                expected = 2.0 ** (k * j0)
                self.assertAlmostEqual(besov_norm(f, k, p) / expected, 1.0, places=12)
                self.assertAlmostEqual(besov_norm(f, k, p, homogeneous=True) / expected, 1.0, places=12)

    def test_homogeneous_requires_mean_zero(self):
        """Test that homogeneous Besov norms reject fields with a mean."""
        constant = Field.physical(self.grid, np.ones(256))
        with self.assertRaises(SingularityError):
            besov_norm(constant, 0.0, 2, homogeneous=True)
        with self.assertRaises(SingularityError):
            sobolev_norm(constant, -1.0, 2, homogeneous=True)

    def test_besov_l2_equivalence(self):
        """Test 1/sqrt(2) <= ||f||_{Bdot^0_2} / ||f||_2 <= 1 on mean-zero fields."""
        for seed in range(10):
            f = self.mean_zero_field(seed)
            ratio = besov_norm(f, 0.0, 2, homogeneous=True) / lp_norm(f, 2)
            self.assertGreaterEqual(ratio, 1.0 / np.sqrt(2.0) - 1e-12)
            self.assertLessEqual(ratio, 1.0 + 1e-12)

    def test_besov_sobolev_equivalence(self):
        """Test that B^0_{2,2} and H^0_2 stay within fixed factors."""
        for seed in range(100):
            f = self.mean_zero_field(seed)
            ratio = besov_norm(f, 0.0, 2) / sobolev_norm(f, 0.0, 2)
            self.assertGreater(ratio, 0.3)
            self.assertLess(ratio, 3.0)

    def test_besov_monotone_in_k(self):
        """Test that B^k norms grow with k for a mode with |xi| > 1."""
        f = Field.plane_wave(self.grid, 40)
        values = [besov_norm(f, k, 2) for k in (-1.0, 0.0, 1.0, 2.0)]
        self.assertEqual(values, sorted(values))

    def test_sobolev_zero_order(self):
        """Test that H^0_p is the L^p norm."""
        f = self.mean_zero_field(1)
        for p in (1.5, 2, 4):
            self.assertAlmostEqual(sobolev_norm(f, 0.0, p) / lp_norm(f, p), 1.0, places=12)

    def test_sobolev_single_mode(self):
        """Test ||e_xi||_{H^k_p} = (1 + 4 pi^2 |xi|^2)^(k/2)."""
        f = Field.plane_wave(self.grid, 3)
        for k in (-2.0, 1.0):
            expected = (1 + FOUR_PI_SQ * 9) ** (k / 2)
            self.assertAlmostEqual(sobolev_norm(f, k, 3) / expected, 1.0, places=12)

    def test_sobolev_plancherel(self):
        """Test H^k_2 against the weighted coefficient sum."""
        f = self.mean_zero_field(2)
        k = 1.5
        weights = (1 + FOUR_PI_SQ * self.grid.radii ** 2) ** k
        expected = np.sqrt(self.grid.volume * np.sum(weights * np.abs(f.coefficients()) ** 2))
        self.assertAlmostEqual(sobolev_norm(f, k, 2) / expected, 1.0, places=12)

    def test_bessel_isomorphism(self):
        """Test ||J^s f||_{H^{k-s}_p} = ||f||_{H^k_p}."""
        f = self.mean_zero_field(3)
        for k in (-1.0, 0.0, 1.0):
            for s in (-2.0, 1.0, 2.0):
                for p in (1.5, 2, 4):
                    lifted = sobolev_norm(bessel_potential(f, s), k - s, p)
                    self.assertAlmostEqual(lifted / sobolev_norm(f, k, p), 1.0, places=10)

    def test_riesz_isomorphism(self):
        """Test the homogeneous counterpart on mean-zero fields."""
        f = self.mean_zero_field(4)
        for k, s in ((-1.0, 1.0), (0.5, -1.0)):
            lifted = sobolev_norm(riesz_potential(f, s), k - s, 2, homogeneous=True)
            self.assertAlmostEqual(lifted / sobolev_norm(f, k, 2, homogeneous=True), 1.0, places=10)

    def test_block_norms(self):
        """Test that block_norms lists every nonhomogeneous block."""
        f = Field.plane_wave(self.grid, 16)
        norms = block_norms(f, 2)
        self.assertEqual([j for j, _ in norms], list(range(1, 9)))
        self.assertAlmostEqual(dict(norms)[4], 1.0, places=12)
