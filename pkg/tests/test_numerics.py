import logging
import math
from unittest import TestCase

import numpy as np

import tests.suppress as suppress
from rkhs_confidence import numerics
from rkhs_confidence.numerics import NumericFailureError, DegenerateCovarianceError
from rkhs_confidence.utils import ContractViolationError


class TestPseudoinverse(TestCase):
    def assertPenroseAxioms(self, m: np.ndarray):
        p = numerics.pinv(m)
        scale = max(1.0, float(np.linalg.norm(m)))
        self.assertTrue(np.allclose(m @ p @ m, m, atol=1e-10 * scale))
        self.assertTrue(np.allclose(p @ m @ p, p, atol=1e-10 * max(1.0, float(np.linalg.norm(p)))))
        self.assertTrue(np.allclose((m @ p).T, m @ p, atol=1e-10))
        self.assertTrue(np.allclose((p @ m).T, p @ m, atol=1e-10))

    def test_penrose_axioms(self):
        rng = np.random.default_rng(7)
        self.assertPenroseAxioms(rng.normal(size=(5, 3)))
        self.assertPenroseAxioms(rng.normal(size=(3, 6)))
        # rank 2 in a 4x4 matrix
        u = rng.normal(size=(4, 2))
        self.assertPenroseAxioms(u @ u.T)

    def test_invertible_matches_inverse(self):
        m = np.array([[2.0, 1.0], [1.0, 3.0]])
        self.assertTrue(np.allclose(numerics.pinv(m), np.linalg.inv(m), atol=1e-14))

    def test_zero_matrix(self):
        self.assertTrue(np.array_equal(np.zeros((3, 2)), numerics.pinv(np.zeros((2, 3)))))

    def test_relative_cutoff(self):
        m = np.diag([1.0, 1e-8])
        self.assertAlmostEqual(1e8, numerics.pinv(m)[1, 1], delta=1.0)
        # with rtol 1e-6 the small singular value counts as zero
        self.assertEqual(0.0, numerics.pinv(m, rtol=1e-6)[1, 1])
        self.assertEqual(1, numerics.matrix_rank(m, rtol=1e-6))
        self.assertEqual(2, numerics.matrix_rank(m))

    def test_rejects_bad_input(self):
        self.assertRaises(ContractViolationError, numerics.pinv, [[1.0, np.nan]])
        self.assertRaises(ContractViolationError, numerics.pinv, np.zeros((0, 3)))
        self.assertRaises(ContractViolationError, numerics.pinv, np.eye(2), -1.0)


class TestSymmetricEigen(TestCase):
    def test_descending_order(self):
        decomposition = numerics.sym_eig(np.diag([1.0, 3.0, 2.0]))
        self.assertListEqual([3.0, 2.0, 1.0], list(decomposition.eigenvalues))
        v = decomposition.eigenvectors
        self.assertTrue(np.allclose(v.T @ v, np.eye(3)))

    def test_reconstruction(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=(4, 4))
        m = a @ a.T
        decomposition = numerics.sym_eig(m)
        v = decomposition.eigenvectors
        self.assertTrue(np.allclose(v @ np.diag(decomposition.eigenvalues) @ v.T, m))

    def test_asymmetric_is_rejected(self):
        self.assertRaises(ContractViolationError, numerics.sym_eig, [[1.0, 2.0], [0.0, 1.0]])
        self.assertRaises(ContractViolationError, numerics.sym_eig, np.ones((2, 3)))


class TestPivotedCholesky(TestCase):
    def test_low_rank_gram(self):
        rng = np.random.default_rng(3)
        xs = rng.normal(size=(8, 3))
        g = xs @ xs.T
        pivots, rank, factor = numerics.pivoted_cholesky(g)
        self.assertEqual(3, rank)
        self.assertEqual(3, len(set(pivots)))
        self.assertEqual((8, 3), factor.shape)
        self.assertTrue(np.allclose(factor @ factor.T, g, atol=1e-10))

    def test_full_rank(self):
        g = np.array([[4.0, 2.0], [2.0, 3.0]])
        pivots, rank, factor = numerics.pivoted_cholesky(g)
        self.assertListEqual([0, 1], pivots)
        self.assertEqual(2, rank)
        self.assertTrue(np.allclose(factor @ factor.T, g))

    def test_lazy_columns(self):
        g = np.array([[1.0, 0.5, 0.0], [0.5, 1.0, 0.0], [0.0, 0.0, 0.0]])
        requested = []

        def column(j):
            requested.append(j)
            return g[:, j]

        pivots, rank, _ = numerics.incomplete_cholesky(np.diag(g), column, 1e-12)
        self.assertEqual(2, rank)
        # the zero column is never asked for
        self.assertListEqual(sorted(pivots), sorted(requested))
        self.assertNotIn(2, requested)

    def test_max_rank(self):
        pivots, rank, factor = numerics.incomplete_cholesky(np.ones(4) * 2.0, lambda j: 2.0 * np.eye(4)[:, j], 0.0, 2)
        self.assertEqual(2, rank)
        self.assertEqual((4, 2), factor.shape)

    def test_negative_diagonal(self):
        self.assertRaises(ContractViolationError, numerics.incomplete_cholesky, np.array([1.0, -1.0]),
                          lambda j: np.eye(2)[:, j], 1e-12)

    def test_rank_agrees_with_svd(self):
        rng = np.random.default_rng(100)
        for instance in range(100):
            n = int(rng.integers(2, 30))
            rank = int(rng.integers(0, n + 1))
            q = np.linalg.qr(rng.normal(size=(n, n)))[0]
            eigenvalues = np.zeros(n)
            eigenvalues[:rank] = 10.0 ** rng.uniform(-2, 2, size=rank)
            g = (q * eigenvalues) @ q.T
            g = 0.5 * (g + g.T)
            tol = 1e-9 * max(float(np.max(np.diag(g))), 0.0)
            _, reported, factor = numerics.pivoted_cholesky(g, tol)
            # the SVD rank at the same absolute threshold, relative to the largest singular value
            largest = float(np.linalg.norm(g, 2))
            expected = numerics.matrix_rank(g, tol / largest) if largest > 0 else 0
            self.assertEqual(expected, reported, msg=f"instance {instance}: n={n}, rank={rank}")
            self.assertTrue(np.allclose(factor @ factor.T, g, atol=1e-8 * max(1.0, largest)))

    def test_factor_grows_past_the_first_block(self):
        rng = np.random.default_rng(8)
        a = rng.normal(size=(150, 150))
        g = a @ a.T + 150.0 * np.eye(150)
        _, rank, factor = numerics.pivoted_cholesky(g)
        self.assertEqual(150, rank)
        self.assertEqual((150, 150), factor.shape)
        self.assertTrue(np.allclose(factor @ factor.T, g))

    def test_memory_follows_rank(self):
        """A rank-3 Gram matrix of 100000 points, far too large to hold as an n x n factor."""
        rng = np.random.default_rng(9)
        xs = rng.normal(size=(100_000, 3))
        _, rank, factor = numerics.incomplete_cholesky(np.einsum("ij,ij->i", xs, xs), lambda j: xs @ xs[j], 1e-9)
        self.assertEqual(3, rank)
        self.assertEqual((100_000, 3), factor.shape)
        rows = rng.integers(0, 100_000, size=50)
        self.assertTrue(np.allclose(factor[rows] @ factor[rows].T, xs[rows] @ xs[rows].T, atol=1e-8))


class TestInverseSquareRoot(TestCase):
    def test_whitening(self):
        m = np.array([[4.0, 1.0], [1.0, 2.0]])
        r = numerics.spd_inv_sqrt(m)
        self.assertTrue(np.allclose(r @ m @ r, np.eye(2)))
        self.assertTrue(np.allclose(r, r.T))

    def test_singular(self):
        self.assertRaises(DegenerateCovarianceError, numerics.spd_inv_sqrt, [[1.0, 1.0], [1.0, 1.0]], 1e-12)
        self.assertRaises(DegenerateCovarianceError, numerics.spd_inv_sqrt, [[-1.0, 0.0], [0.0, 1.0]])
        self.assertRaises(DegenerateCovarianceError, numerics.spd_inv_sqrt, [[1.0, 0.0], [0.0, 1e-3]], 1e-2)


class TestChiSquared(TestCase):
    def test_incomplete_gamma(self):
        # P(1, x) = 1 - exp(-x)
        for x in (0.1, 1.0, 2.5, 10.0):
            self.assertAlmostEqual(1.0 - math.exp(-x), numerics.regularized_gamma_p(1.0, x), places=13)
            self.assertAlmostEqual(math.exp(-x), numerics.regularized_gamma_q(1.0, x), places=13)
        self.assertEqual(0.0, numerics.regularized_gamma_p(2.0, 0.0))

    def test_closed_form_two_degrees(self):
        # the chi-squared distribution with 2 degrees of freedom is exponential with mean 2
        for alpha in (0.5, 0.1, 0.05, 0.01, 1e-6):
            self.assertAlmostEqual(-2.0 * math.log(alpha), numerics.chi2_quantile(2, alpha), delta=1e-9)

    def test_table_values(self):
        self.assertAlmostEqual(3.841458820694124, numerics.chi2_quantile(1, 0.05), delta=1e-6)
        self.assertAlmostEqual(9.487729036781154, numerics.chi2_quantile(4, 0.05), delta=1e-6)
        self.assertAlmostEqual(14.067140449340169, numerics.chi2_quantile(7, 0.05), delta=1e-6)
        self.assertAlmostEqual(67.50480702, numerics.chi2_quantile(50, 0.05), delta=1e-4)
        self.assertAlmostEqual(0.454936423119572, numerics.chi2_quantile(1, 0.5), delta=1e-6)

    def test_cdf_inverts_quantile(self):
        for m in (1, 3, 10):
            for alpha in (0.9, 0.05, 0.001):
                q = numerics.chi2_quantile(m, alpha)
                self.assertAlmostEqual(1.0 - alpha, numerics.chi2_cdf(q, m), delta=1e-10)

    def test_monotone_in_alpha(self):
        quantiles = [numerics.chi2_quantile(3, alpha) for alpha in (0.5, 0.2, 0.1, 0.05, 0.01)]
        self.assertListEqual(sorted(quantiles), quantiles)

    def test_normal_quantile(self):
        self.assertAlmostEqual(1.959964, numerics.normal_quantile(0.975), delta=3e-3)
        self.assertAlmostEqual(-1.644854, numerics.normal_quantile(0.05), delta=3e-3)
        self.assertRaises(ContractViolationError, numerics.normal_quantile, 1.0)

    def test_contract(self):
        self.assertRaises(ContractViolationError, numerics.chi2_quantile, 0, 0.05)
        self.assertRaises(ContractViolationError, numerics.chi2_quantile, 2, 0.0)
        self.assertRaises(ContractViolationError, numerics.chi2_quantile, 2, 1.0)
        self.assertRaises(ContractViolationError, numerics.chi2_quantile, 1.5, 0.05)

    @suppress.out
    def test_no_convergence(self):
        with self.assertRaises(NumericFailureError) as cm:
            numerics.chi2_quantile(3, 0.05, max_iteration=1)
        self.assertEqual(1, cm.exception.iterations)
        self.assertEqual("chi-squared quantile", cm.exception.operation)

    def test_no_convergence_is_logged(self):
        with self.assertLogs(logging.getLogger("rkhs_confidence.numerics"), logging.ERROR):
            self.assertRaises(NumericFailureError, numerics.chi2_quantile, 3, 0.05, 1)


class TestErrors(TestCase):
    def test_messages(self):
        self.assertIn("an unreported number of", str(NumericFailureError("SVD", None)))
        self.assertIn("12", NumericFailureError("SVD", 12).__doc__)
        self.assertIsInstance(DegenerateCovarianceError(-1.0), ArithmeticError)
        self.assertEqual(-1.0, DegenerateCovarianceError(-1.0).smallest_eigenvalue)
