import logging
import math
from unittest import TestCase

import numpy as np

from rkhs_confidence import functionals, kernels, losses, solver
from rkhs_confidence.functionals import (Box, DomainWarningError, GradientAt, InnerProducts, IntegralOver, Pointwise,
                                         SquaredHNorm, SquaredL2Norm)
from rkhs_confidence.kernels import KernelSpec
from rkhs_confidence.losses import LossSpec
from rkhs_confidence.solver import Dataset, KernelExpansion
from rkhs_confidence.utils import ContractViolationError

RBF = KernelSpec(kernels.GAUSSIAN_RBF, 1, gamma=0.5)
RBF2 = KernelSpec(kernels.GAUSSIAN_RBF, 2, gamma=0.8)

F = KernelExpansion(RBF, [0.5, 1.5, 2.5], [1.0, -0.5, 0.8])
H = KernelExpansion(RBF, [1.0, 3.0], [0.3, 0.7])


def all_functionals():
    region = Box((0.0,), (3.0,))
    return [
        Pointwise([1.0, 2.0, 4.0]),
        InnerProducts([KernelExpansion(RBF, [0.0], [1.0]), KernelExpansion(RBF, [1.0, 2.0], [0.5, -1.0])]),
        GradientAt([2.0]),
        IntegralOver(region, functionals.LEBESGUE),
        IntegralOver(region, functionals.EMPIRICAL, sample=[0.2, 1.1, 2.9, 3.5]),
        SquaredHNorm(),
        SquaredL2Norm(region),
    ]


class TestDerivatives(TestCase):
    def test_directional_derivative(self):
        """d/dt psi(f + t h) at t = 0 equals <psi'(f), h>_H = sum_i b_i psi'(z_i) for h = sum_i b_i k(z_i, .)."""
        step = 1e-4
        for fun in all_functionals():
            plus = fun.value(F.combine(H, 1.0, step))
            minus = fun.value(F.combine(H, 1.0, -step))
            numeric = (plus - minus) / (2.0 * step)
            analytic = H.coeffs @ fun.prime(F, H.centers)
            self.assertTrue(np.allclose(numeric, analytic, rtol=1e-6, atol=1e-8), msg=str(fun))

    def test_gradient_in_two_dimensions(self):
        f = KernelExpansion(RBF2, [[0.0, 0.0], [1.0, -0.5]], [1.0, 2.0])
        h = KernelExpansion(RBF2, [[0.5, 0.5]], [1.0])
        fun = GradientAt([0.3, 0.2])
        self.assertEqual(2, fun.m)
        step = 1e-5
        numeric = (fun.value(f.combine(h, 1.0, step)) - fun.value(f.combine(h, 1.0, -step))) / (2.0 * step)
        self.assertTrue(np.allclose(h.gradient([0.3, 0.2]), numeric, atol=1e-8))
        self.assertTrue(np.allclose(numeric, h.coeffs @ fun.prime(f, h.centers), atol=1e-8))

    def test_prime_shapes(self):
        for fun in all_functionals():
            self.assertEqual((5, fun.m), fun.prime(F, np.linspace(0.0, 4.0, 5)).shape, msg=str(fun))
            self.assertEqual((fun.m,), functionals.psi_prime_eval(fun, F, 1.5).shape, msg=str(fun))

    def test_psi_matrix(self):
        data = Dataset(np.linspace(0.0, 4.0, 6), np.zeros(6))
        fun = Pointwise([1.0, 2.0])
        psi = functionals.psi_matrix(fun, F, data)
        self.assertEqual((2, 6), psi.shape)
        self.assertTrue(np.allclose(kernels.cross_gram(RBF, [1.0, 2.0], data.xs), psi))


class TestKinds(TestCase):
    def test_pointwise(self):
        fun = Pointwise([1.0, 2.0])
        self.assertTrue(np.array_equal(F.evaluate([1.0, 2.0]), fun.value(F)))
        self.assertEqual("pointwise(m=2)", str(fun))
        self.assertEqual((2, 1), fun.points.shape)

    def test_inner_products(self):
        fun = InnerProducts([H])
        self.assertAlmostEqual(F.inner(H), functionals.psi_value(fun, F)[0], delta=1e-14)
        self.assertRaises(ContractViolationError, InnerProducts, [])

    def test_gradient_domain(self):
        domain = Box((0.0,), (5.0,))
        self.assertEqual([2.5], GradientAt([2.5], domain).x0.tolist())
        self.assertRaises(DomainWarningError, GradientAt, [5.0], domain)
        self.assertRaises(DomainWarningError, GradientAt, [-1.0], domain)
        self.assertRaises(ContractViolationError, GradientAt, [1.0, 1.0], domain)

    def test_lebesgue_integral(self):
        # int_{-3}^{3} exp(-gamma t^2) dt for a single center at 0
        bump = KernelExpansion(RBF, [0.0], [1.0])
        fun = IntegralOver(Box((-3.0,), (3.0,)), functionals.LEBESGUE, nodes=401)
        exact = math.sqrt(math.pi / 0.5) * math.erf(3.0 * math.sqrt(0.5))
        self.assertAlmostEqual(exact, fun.value(bump)[0], delta=1e-5)

    def test_empirical_integral(self):
        fun = IntegralOver(Box((0.0,), (1.0,)), functionals.EMPIRICAL, sample=[0.5, 2.0])
        self.assertAlmostEqual(F(0.5) / 2.0, fun.value(F)[0], delta=1e-14)
        # covariates outside the box contribute nothing
        self.assertEqual(0.0, fun.prime(F, [40.0])[0, 0])

    def test_empirical_integral_uses_training_covariates(self):
        data = Dataset([0.2, 0.8, 1.6, 2.4], [1.0, 0.0, -1.0, 0.5], weights=[1.0, 1.0, 1.0, 3.0])
        model = solver.fit(data, RBF, LossSpec(losses.LS_REGRESSION), 0.1)
        fun = IntegralOver(Box((0.0,), (2.0,)))
        expected = model.fitted_values[:3] @ data.weights[:3]
        self.assertAlmostEqual(expected, fun.value(model)[0], delta=1e-8)
        self.assertRaises(ContractViolationError, fun.value, F)

    def test_squared_norms(self):
        self.assertAlmostEqual(F.h_norm_sq(), SquaredHNorm().value(F)[0], delta=1e-14)
        self.assertTrue(np.allclose(2.0 * F.evaluate([0.0, 1.0]), SquaredHNorm().prime(F, [0.0, 1.0]).ravel()))
        bump = KernelExpansion(RBF, [0.0], [1.0])
        exact = math.sqrt(math.pi / 1.0) * math.erf(3.0 * math.sqrt(1.0))
        self.assertAlmostEqual(exact, SquaredL2Norm(Box((-3.0,), (3.0,)), nodes=401).value(bump)[0], delta=1e-5)

    def test_invalid(self):
        self.assertRaises(ContractViolationError, IntegralOver, Box((0.0,), (1.0,)), "counting")
        self.assertRaises(ContractViolationError, SquaredL2Norm, Box((0.0,), (1.0,)), 0)
        self.assertRaises(ContractViolationError, Box, (1.0,), (0.0,))
        self.assertRaises(ContractViolationError, Box, (0.0, 0.0), (1.0,))


class TestBox(TestCase):
    def test_geometry(self):
        box = Box((0.0, -1.0), (5.0, 1.0))
        self.assertEqual(2, box.dim)
        self.assertEqual(10.0, box.volume)
        self.assertEqual("0.0:5.0, -1.0:1.0", str(box))
        self.assertListEqual([True, True, False], box.contains(np.array([[0.0, 1.0], [2.0, 0.0], [5.5, 0.0]])).tolist())
        self.assertFalse(box.interior(np.array([0.0, 0.0])))
        self.assertTrue(box.interior(np.array([0.1, 0.0])))

    def test_midpoint_grid(self):
        points, weights = Box((0.0,), (1.0,)).midpoint_grid(4)
        self.assertListEqual([0.125, 0.375, 0.625, 0.875], points.ravel().tolist())
        self.assertAlmostEqual(1.0, weights.sum(), delta=1e-15)
        points, weights = Box((0.0, 0.0), (2.0, 1.0)).midpoint_grid(3)
        self.assertEqual((9, 2), points.shape)
        self.assertAlmostEqual(2.0, weights.sum(), delta=1e-14)


class TestRankTest(TestCase):
    def test_full_rank(self):
        result = functionals.rank_test(np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]))
        self.assertTrue(result.full_rank)
        self.assertEqual(2, result.numerical_rank)

    def test_rank_deficient(self):
        with self.assertLogs(logging.getLogger("rkhs_confidence.functionals"), logging.WARNING) as logs:
            result = functionals.rank_test(np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]]))
        self.assertFalse(result.full_rank)
        self.assertEqual(1, result.numerical_rank)
        self.assertIn("rank 1 < m = 2", logs.output[0])

    def test_fewer_points_than_m(self):
        with self.assertLogs(logging.getLogger("rkhs_confidence.functionals"), logging.WARNING) as logs:
            result = functionals.rank_test(np.eye(3)[:, :2])
        self.assertFalse(result.full_rank)
        self.assertEqual(2, len(logs.output))

    def test_far_point_vanishes(self):
        data = Dataset(np.linspace(0.0, 5.0, 20), np.zeros(20))
        with self.assertLogs(logging.getLogger("rkhs_confidence.functionals"), logging.WARNING):
            result = functionals.rank_test(functionals.psi_matrix(Pointwise([2.0, 100.0]), F, data))
        self.assertEqual(1, result.numerical_rank)


class TestParsing(TestCase):
    def test_vectors_and_points(self):
        self.assertListEqual([3.0, 0.0], functionals.parse_vector("3, 0").tolist())
        self.assertEqual((2, 2), functionals.parse_points("3, 0; 2, 1", 2).shape)
        self.assertEqual((3, 1), functionals.parse_points("1; 2; 3", 1).shape)
        self.assertRaises(ContractViolationError, functionals.parse_vector, "")
        self.assertRaises(ContractViolationError, functionals.parse_vector, "1, nan")
        self.assertRaises(ContractViolationError, functionals.parse_vector, "1, x")
        self.assertRaises(ContractViolationError, functionals.parse_points, "1, 2; 3", 2)

    def test_box(self):
        self.assertEqual(Box((0.0, -1.0), (5.0, 1.0)), functionals.parse_box("0:5, -1:1"))
        for text in ("", "0:5:6", "0-5", "a:b"):
            self.assertRaises(ContractViolationError, functionals.parse_box, text)

    def test_every_kind(self):
        self.assertIsInstance(functionals.parse_functional({"kind": "pointwise", "points": "1; 2"}, RBF), Pointwise)
        fun = functionals.parse_functional({"kind": "inner-products", "h1_points": "0; 1", "h1_coeffs": "1, -1",
                                            "h3_points": "2", "h3_coeffs": "0.5"}, RBF)
        self.assertEqual(2, fun.m)
        fun = functionals.parse_functional({"kind": "gradient", "x0": "3, 0", "domain": "0:5, -1:1"}, RBF2)
        self.assertListEqual([3.0, 0.0], fun.x0.tolist())
        fun = functionals.parse_functional({"kind": "integral", "region": "0:1", "measure": "lebesgue",
                                            "nodes": "11"}, RBF)
        self.assertEqual({"kind": "integral", "region": "0.0:1.0", "measure": "lebesgue", "nodes": "11"},
                         fun.as_section())
        self.assertIsInstance(functionals.parse_functional({"kind": "squared-h-norm"}, RBF), SquaredHNorm)
        self.assertIsInstance(functionals.parse_functional({"kind": "squared-l2-norm", "region": "0:1"}, RBF),
                              SquaredL2Norm)

    def test_rejects(self):
        for section in ({"kind": "median"}, {"kind": "pointwise"}, {"kind": "pointwise", "points": "1, 2"},
                        {"kind": "inner-products"}, {"kind": "inner-products", "h1_points": "1"},
                        {"kind": "gradient", "x0": "1, 2"}, {"kind": "integral", "region": "0:1, 0:1"},
                        {"kind": "squared-l2-norm"}):
            self.assertRaises(ContractViolationError, functionals.parse_functional, section, RBF)
        self.assertRaises(DomainWarningError, functionals.parse_functional,
                          {"kind": "gradient", "x0": "5", "domain": "0:5"}, RBF)

    def test_section_reads_back(self):
        for fun in all_functionals():
            if isinstance(fun, IntegralOver) and fun.as_section()["measure"] == functionals.EMPIRICAL:
                # an explicit sample has no config form
                continue
            again = functionals.parse_functional(fun.as_section(), RBF)
            self.assertEqual(str(fun), str(again))
            self.assertTrue(np.array_equal(fun.value(F), again.value(F)), msg=str(fun))
