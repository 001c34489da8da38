import unittest
import sys
import os

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from models.weight_tensor import WeightTensor
from models.rng import Rng
from models.initializer_spec import InitializerSpec
from models.attack_config import AttackConfig, AttackStream
from models.mc_config import McConfig
from models.network_spec import LayerSpec, NetworkSpec, TrainConfig
from models.dataset import Dataset
from models.experiment import TrainingTrace, ExperimentRecord, ExperimentConfig
from models.detection_report import DetectionReport
from models.split_stats import LayerStatsInput


class TestWeightTensor(unittest.TestCase):

    def test_shape_must_match_data(self):
        """Prueba que el producto de la forma debe coincidir con los datos."""
        with self.assertRaises(ValueError):
            WeightTensor(shape=(2, 3), data=np.zeros(5))

    def test_rejects_non_finite(self):
        """Prueba que NaN o Inf no se aceptan."""
        with self.assertRaises(ValueError):
            WeightTensor(shape=(2,), data=[1.0, float('nan')])

    def test_data_is_read_only(self):
        """Prueba que los datos del tensor no se pueden modificar."""
        w = WeightTensor.from_array(np.arange(6.0).reshape(2, 3))
        with self.assertRaises(ValueError):
            w.data[0] = 10.0

    def test_default_layouts(self):
        """Prueba la disposición por defecto según el rango."""
        self.assertEqual(WeightTensor.from_array(np.zeros((2, 3))).layout, 'fc')
        self.assertEqual(WeightTensor.from_array(np.zeros((3, 3, 2, 4))).layout, 'conv')
        self.assertEqual(WeightTensor.from_array(np.zeros(4)).layout, 'bias')

    def test_fans_and_matrix_view(self):
        """Prueba fan_in/fan_out y la vista por filtros de un tensor conv."""
        conv = WeightTensor.from_array(np.arange(72.0).reshape(3, 3, 2, 4))
        self.assertEqual(conv.fan_in(), 18)
        self.assertEqual(conv.fan_out(), 36)
        matrix = conv.as_matrix()
        self.assertEqual(matrix.shape, (4, 18))
        np.testing.assert_array_equal(matrix[1], conv.to_array()[:, :, :, 1].reshape(-1))

        fc = WeightTensor.from_array(np.zeros((5, 7)))
        self.assertEqual((fc.fan_in(), fc.fan_out()), (7, 5))

    def test_dict_conversion(self):
        """Prueba to_dict/from_dict conservando metadatos."""
        w = WeightTensor.from_array(np.arange(4.0).reshape(2, 2), layer_index=3, name="capa")
        restored = WeightTensor.from_dict(w.to_dict())
        self.assertEqual(restored, w)
        self.assertEqual(restored.layer_index, 3)
        self.assertEqual(restored.name, "capa")

    def test_same_multiset(self):
        """Prueba la comparación de multiconjuntos."""
        a = WeightTensor.from_array(np.array([[1.0, 2.0], [3.0, 4.0]]))
        b = a.with_data(np.array([4.0, 3.0, 2.0, 1.0]))
        c = a.with_data(np.array([4.0, 3.0, 2.0, 2.0]))
        self.assertTrue(a.same_multiset(b))
        self.assertFalse(a.same_multiset(c))
        self.assertNotEqual(a, b)


class TestRng(unittest.TestCase):

    def test_same_seed_same_stream(self):
        """Prueba la reproducibilidad con la misma semilla."""
        np.testing.assert_array_equal(Rng(7).normal(0, 1, 10), Rng(7).normal(0, 1, 10))

    def test_child_is_stable(self):
        """Prueba que el hijo i de una semilla no depende del estado consumido."""
        first = Rng.child(11, 3).permutation(20)
        Rng(11).normal(0, 1, 100)
        np.testing.assert_array_equal(first, Rng.child(11, 3).permutation(20))

    def test_spawn_children_differ(self):
        """Prueba que los hijos generados son distintos entre sí."""
        a, b = Rng(5).spawn(2)
        self.assertFalse(np.array_equal(a.normal(0, 1, 10), b.normal(0, 1, 10)))

    def test_invalid_seed(self):
        """Prueba que una semilla negativa se rechaza."""
        with self.assertRaises(ValueError):
            Rng(-1)


class TestInitializerSpec(unittest.TestCase):

    def test_variances(self):
        """Prueba las varianzas de He y Glorot."""
        self.assertAlmostEqual(InitializerSpec('he').variance(100, 50), 0.02)
        self.assertAlmostEqual(InitializerSpec('glorot').variance(100, 50), 2.0 / 150)

    def test_invalid_kind(self):
        """Prueba que un inicializador desconocido falla."""
        with self.assertRaises(ValueError):
            InitializerSpec('lecun')

    def test_dense_default_bias(self):
        """Prueba la convención de sesgo constante 0.1."""
        spec = InitializerSpec.dense_default()
        self.assertEqual(spec.bias_policy, 'constant')
        self.assertAlmostEqual(spec.bias_value, 0.1)


class TestAttackConfig(unittest.TestCase):

    def test_aliases(self):
        """Prueba los alias de nombres de ataque."""
        self.assertEqual(AttackConfig(kind='SoftKnockout').kind, 'soft_knockout')
        self.assertEqual(AttackConfig(kind='conv-shift').kind, 'conv_shift')

    def test_validation(self):
        """Prueba los rangos de r, s y la semilla de colocación."""
        with self.assertRaises(ValueError):
            AttackConfig(r=1.5)
        with self.assertRaises(ValueError):
            AttackConfig(kind='shift', s=-1)
        with self.assertRaises(ValueError):
            AttackConfig(placement='shuffled')
        with self.assertRaises(ValueError):
            AttackConfig(kind='unknown')

    def test_dict_round_trip(self):
        """Prueba to_dict/from_dict."""
        cfg = AttackConfig(kind='shift', s=4, placement='shuffled', placement_seed=9)
        restored = AttackConfig.from_dict(cfg.to_dict())
        self.assertEqual(restored.to_dict(), cfg.to_dict())

    def test_stream_alternates_parity(self):
        """Prueba que el flujo alterna la paridad una vez por tensor."""
        stream = AttackStream(AttackConfig())
        self.assertFalse(stream.cross)
        stream.advance()
        self.assertTrue(stream.cross)
        stream.advance()
        self.assertFalse(stream.cross)
        self.assertEqual(stream.processed, 2)


class TestMcConfig(unittest.TestCase):

    def test_chunks_cover_trials(self):
        """Prueba que los trozos suman el número de ensayos."""
        cfg = McConfig(trials=2500)
        chunks = list(cfg.chunks())
        self.assertEqual([size for _, size in chunks], [1000, 1000, 500])
        self.assertEqual([index for index, _ in chunks], [0, 1, 2])

    def test_for_sharpness(self):
        """Prueba que la entrada normal tiene σ²/μ² igual a la nitidez."""
        cfg = McConfig.for_sharpness(0.25, trials=10, mean=2.0)
        self.assertEqual(cfg.input_distribution, 'normal')
        self.assertAlmostEqual((cfg.std / cfg.mean) ** 2, 0.25)

    def test_invalid_trials(self):
        """Prueba que se necesita al menos un ensayo."""
        with self.assertRaises(ValueError):
            McConfig(trials=0)


class TestNetworkSpec(unittest.TestCase):

    def test_halving_architecture(self):
        """Prueba la arquitectura de referencia n/2."""
        mnist = NetworkSpec.halving_architecture(784, 10, second_hidden=49)
        self.assertEqual(mnist.weight_shapes(), [(392, 784), (49, 392), (10, 49)])
        credit = NetworkSpec.halving_architecture(14, 2)
        self.assertEqual(credit.weight_shapes(), [(7, 14), (7, 7), (2, 7)])

    def test_conv_shapes(self):
        """Prueba las formas de una red convolucional pequeña."""
        spec = NetworkSpec.small_conv_net(8, 8, 1, classes=3, filters=(4, 6))
        self.assertEqual(spec.weight_shapes(), [(3, 3, 1, 4), (3, 3, 4, 6), (3, 96)])
        self.assertTrue(spec.is_conv)

    def test_last_layer_must_be_dense(self):
        """Prueba que la última capa debe ser densa."""
        with self.assertRaises(ValueError):
            NetworkSpec((4, 4, 1), [LayerSpec.conv(2)])

    def test_dict_round_trip(self):
        """Prueba to_dict/from_dict de la arquitectura."""
        spec = NetworkSpec.dense_net(20, [64, 64], 4, dropout_rate=0.2)
        restored = NetworkSpec.from_dict(spec.to_dict())
        self.assertEqual(restored.to_dict(), spec.to_dict())

    def test_train_config(self):
        """Prueba la validación y las sustituciones de TrainConfig."""
        cfg = TrainConfig(optimizer='sgd', learning_rate=0.1, epochs=3)
        self.assertEqual(cfg.with_overrides(seed=5).seed, 5)
        self.assertEqual(cfg.with_overrides(seed=5).learning_rate, 0.1)
        with self.assertRaises(ValueError):
            TrainConfig(optimizer='rmsprop')
        with self.assertRaises(ValueError):
            TrainConfig(batch_size=0)


class TestDataset(unittest.TestCase):

    def _features(self):
        return np.linspace(0.0, 1.0, 20).reshape(10, 2)

    def test_valid_dataset(self):
        """Prueba un dataset válido y sus particiones."""
        data = Dataset(self._features(), [0, 1] * 5, range(8), [8, 9])
        self.assertEqual(data.classes, 2)
        self.assertEqual(data.train_x.shape, (8, 2))
        self.assertAlmostEqual(data.random_guess_accuracy, 0.5)

    def test_rejects_unnormalized(self):
        """Prueba que las características fuera de [0, 1] se rechazan."""
        with self.assertRaises(ValueError):
            Dataset(self._features() * 2.0, [0, 1] * 5, range(8), [8, 9])

    def test_rejects_overlapping_splits(self):
        """Prueba que las particiones no pueden solaparse."""
        with self.assertRaises(ValueError):
            Dataset(self._features(), [0, 1] * 5, range(9), [8, 9])


class TestExperimentModels(unittest.TestCase):

    def _trace(self):
        trace = TrainingTrace()
        for loss, acc in [(1.0, 0.5), (0.8, 0.9), (0.6, 0.95), (0.5, 0.95)]:
            trace.add_epoch(loss, loss, acc)
        return trace

    def test_best_epoch_is_first_maximum(self):
        """Prueba que la mejor época es la primera con la máxima precisión."""
        trace = self._trace()
        self.assertEqual(trace.best_epoch, 2)
        self.assertAlmostEqual(trace.best_accuracy, 0.95)
        self.assertEqual(trace.epochs_to_fraction(0.95), 2)
        self.assertEqual(trace.epochs_to_fraction(0.9), 1)

    def test_record_from_trace_and_csv(self):
        """Prueba el registro por semilla y su fila CSV."""
        record = ExperimentRecord.from_trace(3, self._trace())
        self.assertEqual(record.csv_row()[:3], ['3', '0.950000', '2'])
        restored = ExperimentRecord.from_dict(record.to_dict())
        self.assertTrue(restored.same_result(record))

    def test_config_validation(self):
        """Prueba que las semillas no pueden repetirse ni faltar."""
        with self.assertRaises(ValueError):
            ExperimentConfig(dataset={'kind': 'blobs'}, seeds=[1, 1])
        with self.assertRaises(ValueError):
            ExperimentConfig(dataset={'kind': 'blobs'}, seeds=[])
        with self.assertRaises(ValueError):
            ExperimentConfig(dataset={'kind': 'parquet'})

    def test_config_defaults_and_variant(self):
        """Prueba 50 semillas por defecto y el nombre de la variante."""
        cfg = ExperimentConfig(dataset={'kind': 'blobs'})
        self.assertEqual(cfg.seeds, list(range(50)))
        self.assertTrue(cfg.is_baseline)
        attacked = cfg.with_changes(attack=AttackConfig(kind='shift', s=4))
        self.assertEqual(attacked.variant, 'shift')
        restored = ExperimentConfig.from_dict(attacked.to_dict())
        self.assertEqual(restored.to_dict(), attacked.to_dict())


class TestDetectionReport(unittest.TestCase):

    def test_verdicts(self):
        """Prueba el veredicto global a partir de los p-valores por capa."""
        report = DetectionReport(alpha=0.01)
        report.add_layer('w0', [8, 8], 0.5)
        self.assertEqual(report.verdict, 'clean')
        report.add_layer('w1', [8, 8], 1e-9)
        self.assertEqual(report.verdict, 'suspicious')
        self.assertEqual(report.to_dict()['layers'][1]['verdict'], 'suspicious')

    def test_invalid_p_value(self):
        """Prueba que un p-valor fuera de [0, 1] falla."""
        with self.assertRaises(ValueError):
            DetectionReport().add_layer('w0', [4, 4], 1.5)


class TestLayerStatsInput(unittest.TestCase):

    def test_validation(self):
        """Prueba los rangos de los parámetros adimensionales."""
        with self.assertRaises(ValueError):
            LayerStatsInput(n=0)
        with self.assertRaises(ValueError):
            LayerStatsInput(n=10, r=1.0)


if __name__ == '__main__':
    unittest.main()
