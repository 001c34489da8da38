import unittest
import sys
import os

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from models.knockout_problem import KnockoutProblem
from models.network_spec import NetworkSpec
from models.rng import Rng
from services.init_service import InitService
from services.knockout_service import KnockoutService


class TestKnockoutService(unittest.TestCase):

    def setUp(self):
        self.init_service = InitService()
        self.service = KnockoutService(self.init_service)
        self.net = self.init_service.init_network(NetworkSpec.halving_architecture(14, 2), Rng(0))

    def test_problem_shapes(self):
        """Prueba que el problema conserva las matrices libres y sustituye la cola."""
        problem = self.service.problem_from_network(self.net, free_layers=2, probe_size=64)
        self.assertEqual(problem.widths, [14, 7, 7, 2])
        self.assertEqual(len(problem.free_weights), 2)
        self.assertEqual(problem.probe.shape, (64, 14))
        np.testing.assert_array_equal(problem.free_weights[0], self.net.weighted[0].weights)
        self.assertFalse(np.array_equal(problem.tail_weights[0], self.net.weighted[2].weights))

    def test_optimization_reduces_objective(self):
        """Prueba una reducción de al menos el 50 % con las normas conservadas."""
        problem = self.service.problem_from_network(self.net, iterations=200, seed=1)
        result = self.service.optimize_knockout(problem)
        self.assertGreater(result.initial_objective, 0.0)
        self.assertGreaterEqual(result.reduction, 0.5)
        for error in result.norm_errors():
            self.assertLess(error, 1e-6)

    def test_trace_is_monotone(self):
        """Prueba que solo se aceptan pasos que mejoran el objetivo."""
        problem = self.service.problem_from_network(self.net, iterations=50, seed=2)
        trace = self.service.optimize_knockout(problem).objective_trace
        self.assertTrue(all(b < a for a, b in zip(trace, trace[1:])))

    def test_softmax_objective_is_constant(self):
        """Prueba que con softmax el objetivo vale el tamaño del sondeo y no hay progreso."""
        problem = self.service.problem_from_network(self.net, probe_size=32, objective='softmax')
        result = self.service.optimize_knockout(problem)
        self.assertAlmostEqual(result.initial_objective, 32.0, places=9)
        self.assertEqual(result.reduction, 0.0)

    def test_zero_iterations(self):
        """Prueba que sin iteraciones las matrices no cambian."""
        problem = self.service.problem_from_network(self.net, iterations=0)
        result = self.service.optimize_knockout(problem)
        np.testing.assert_array_equal(result.weights[0], problem.free_weights[0])
        self.assertEqual(len(result.objective_trace), 1)

    def test_zero_norm_matrix(self):
        """Prueba que una matriz libre nula falla."""
        problem = KnockoutProblem([np.zeros((3, 4))], [np.ones((2, 3))], np.ones((5, 4)))
        with self.assertRaises(ValueError):
            self.service.optimize_knockout(problem)

    def test_invalid_problems(self):
        """Prueba redes convolucionales, free_layers fuera de rango y formas incompatibles."""
        conv = self.init_service.init_network(NetworkSpec.small_conv_net(4, 4, 1, 2, filters=(2,)), Rng(1))
        with self.assertRaises(ValueError):
            self.service.problem_from_network(conv)
        with self.assertRaises(ValueError):
            self.service.problem_from_network(self.net, free_layers=4)
        with self.assertRaises(ValueError):
            KnockoutProblem([np.ones((3, 5))], [], np.ones((2, 4)))

    def test_apply_returns_copy(self):
        """Prueba que apply sustituye las matrices libres en una copia."""
        problem = self.service.problem_from_network(self.net, iterations=5)
        result = self.service.optimize_knockout(problem)
        attacked = self.service.apply(self.net, result)
        np.testing.assert_array_equal(attacked.weighted[0].weights, result.weights[0])
        np.testing.assert_array_equal(attacked.weighted[2].weights, self.net.weighted[2].weights)
        np.testing.assert_array_equal(self.net.weighted[0].weights, problem.free_weights[0])


if __name__ == '__main__':
    unittest.main()
