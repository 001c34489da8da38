import unittest
import sys
import os

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from models.initializer_spec import InitializerSpec
from models.network_spec import NetworkSpec
from models.rng import Rng
from models.weight_tensor import WeightTensor
from services.init_service import InitService
from services.tensor_service import TensorService


class TestTensorService(unittest.TestCase):

    def setUp(self):
        self.service = TensorService()

    def test_normal_sample_moments(self):
        """Prueba la media y la desviación de una muestra grande."""
        sample = self.service.normal_sample(Rng(0), 1.0, 2.0, 100000)
        self.assertEqual(sample.size, 100000)
        self.assertAlmostEqual(float(np.mean(sample)), 1.0, delta=0.05)
        self.assertAlmostEqual(float(np.std(sample)), 2.0, delta=0.05)

    def test_normal_sample_reproducible(self):
        """Prueba que la misma semilla da la misma muestra."""
        a = self.service.normal_sample(Rng(7), 0.0, 1.0, 50)
        b = self.service.normal_sample(Rng(7), 0.0, 1.0, 50)
        np.testing.assert_array_equal(a, b)

    def test_normal_sample_invalid(self):
        """Prueba desviación no positiva y recuento vacío."""
        with self.assertRaises(ValueError):
            self.service.normal_sample(Rng(0), 0.0, 0.0, 10)
        with self.assertRaises(ValueError):
            self.service.normal_sample(Rng(0), 0.0, 1.0, 0)

    def test_permute_components(self):
        """Prueba que salida[i] = entrada[permutation[i]]."""
        w = WeightTensor.from_array(np.array([[1.0, 2.0], [3.0, 4.0]]))
        permuted = self.service.permute_components(w, [3, 2, 1, 0])
        np.testing.assert_array_equal(permuted.to_array(), [[4.0, 3.0], [2.0, 1.0]])
        self.assertEqual(permuted.shape, w.shape)
        self.assertTrue(permuted.same_multiset(w))

    def test_permute_rejects_non_bijection(self):
        """Prueba índices repetidos y longitudes incorrectas."""
        w = WeightTensor.from_array(np.arange(4.0).reshape(2, 2))
        for permutation in ([0, 0, 1, 2], [0, 1, 2], [0, 1, 2, 4]):
            with self.assertRaises(ValueError):
                self.service.permute_components(w, permutation)

    def test_shuffle_keeps_values(self):
        """Prueba que el barajado conserva el multiconjunto."""
        w = WeightTensor.from_array(np.arange(12.0).reshape(3, 4))
        self.assertTrue(self.service.shuffle(w, Rng(3)).same_multiset(w))


class TestInitService(unittest.TestCase):

    def setUp(self):
        self.service = InitService()

    def test_init_logs_services(self):
        """Prueba que al crearse se registra cada servicio a nivel INFO."""
        with self.assertLogs('services', level='INFO') as logs:
            InitService()
        self.assertIn("INFO:services.tensor_service:✅ TensorService inicializado", logs.output)
        self.assertIn("INFO:services.init_service:✅ InitService inicializado", logs.output)

    def test_fans(self):
        """Prueba fan_in y fan_out para capas densas y convolucionales."""
        self.assertEqual(InitService.fans((50, 20)), (20, 50))
        self.assertEqual(InitService.fans((3, 3, 2, 8)), (18, 72))
        with self.assertRaises(ValueError):
            InitService.fans((4, 4, 4))

    def test_he_variance(self):
        """Prueba la varianza 2/fan_in del inicializador He."""
        w, bias = self.service.init_layer(InitializerSpec('he'), (400, 100), Rng(0))
        self.assertEqual(w.shape, (400, 100))
        self.assertAlmostEqual(float(np.var(w.data)), 2.0 / 100, delta=0.001)
        np.testing.assert_array_equal(bias, np.zeros(400))

    def test_glorot_variance(self):
        """Prueba la varianza 2/(fan_in + fan_out) del inicializador Glorot."""
        w, _ = self.service.init_layer(InitializerSpec('glorot'), (300, 100), Rng(1))
        self.assertAlmostEqual(float(np.var(w.data)), 2.0 / 400, delta=0.0005)

    def test_constant_bias(self):
        """Prueba la convención de sesgo 0.1 para redes densas."""
        _, bias = self.service.init_layer(InitializerSpec.dense_default(), (5, 3), Rng(0))
        np.testing.assert_array_equal(bias, np.full(5, 0.1))
        _, conv_bias = self.service.init_layer(InitializerSpec.dense_default(), (3, 3, 1, 4), Rng(0))
        self.assertEqual(conv_bias.shape, (4,))

    def test_variance_swap(self):
        """Prueba que el ataque alternativo usa 2/fan_out."""
        w, _ = self.service.variance_swap_init(InitializerSpec('he'), (100, 400), Rng(2))
        self.assertAlmostEqual(float(np.var(w.data)), 2.0 / 100, delta=0.001)

    def test_empty_shape(self):
        """Prueba que una forma vacía se rechaza."""
        with self.assertRaises(ValueError):
            self.service.init_layer(InitializerSpec('he'), (), Rng(0))

    def test_init_network_reproducible(self):
        """Prueba que la misma semilla da la misma red."""
        spec = NetworkSpec.dense_net(6, [5], 3)
        first = self.service.init_network(spec, Rng(4)).weight_tensors()
        second = self.service.init_network(spec, Rng(4)).weight_tensors()
        self.assertEqual(len(first), 2)
        for wa, wb in zip(first, second):
            np.testing.assert_array_equal(wa.data, wb.data)


if __name__ == '__main__':
    unittest.main()
