import unittest
import sys
import os
import io
import csv
import json
import tempfile
from contextlib import redirect_stdout, redirect_stderr

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from cli.main import MalInitApp, EXIT_OK, EXIT_USAGE, EXIT_RUNTIME
from models.weight_tensor import WeightTensor
from storage.tensor_store import MANIFEST_NAME


class TestCli(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def path(self, *parts):
        return os.path.join(self.tmp.name, *parts)

    def run_cli(self, *argv):
        stdout, stderr = io.StringIO(), io.StringIO()
        with redirect_stdout(stdout), redirect_stderr(stderr):
            code = MalInitApp().run(list(argv))
        return code, stdout.getvalue(), stderr.getvalue()

    def write_tensor(self, name="w.bin", shape=(32, 32), seed=0):
        data = np.random.default_rng(seed).normal(0.0, np.sqrt(2.0 / shape[1]), size=shape)
        path = self.path(name)
        MalInitApp().store.save_tensor(WeightTensor.from_array(data, name="w0"), path)
        return path

    # ========== ERRORES DE USO ==========

    def test_no_arguments(self):
        """Prueba que sin subcomando se devuelve el código de uso."""
        code, _, err = self.run_cli()
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("error:", err)

    def test_unknown_flag(self):
        """Prueba que un flag desconocido es un error de uso."""
        code, _, _ = self.run_cli('analyze', '--colour', 'red')
        self.assertEqual(code, EXIT_USAGE)

    def test_missing_required_input(self):
        """Prueba que attack sin --in es un error de uso."""
        code, _, err = self.run_cli('attack', '--out', self.path("x.bin"))
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("--in", err)

    def test_output_equals_input(self):
        """Prueba que la entrada nunca se sobrescribe."""
        source = self.write_tensor()
        code, _, _ = self.run_cli('attack', '--in', source, '--out', source)
        self.assertEqual(code, EXIT_USAGE)

    def test_knockout_refuses_input_as_output(self):
        """Prueba que knockout rechaza escribir sobre su entrada antes de optimizar."""
        ckpt = self.path("trained")
        self.run_cli('train', '--classes', '2', '--features', '4', '--per-class', '20',
                     '--hidden', '8', '--epochs', '1', '--seed', '0', '--out', ckpt)
        code, _, _ = self.run_cli('knockout', '--in', ckpt, '--out', ckpt, '--iterations', '5')
        self.assertEqual(code, EXIT_USAGE)
        with open(os.path.join(ckpt, MANIFEST_NAME)) as handle:
            self.assertNotIn('knockout', json.load(handle))

    def test_runtime_error(self):
        """Prueba que un fichero inexistente es un error de ejecución."""
        code, _, err = self.run_cli('detect', '--in', self.path("missing.bin"), '--out', self.path("r"))
        self.assertEqual(code, EXIT_RUNTIME)
        self.assertIn("error:", err)

    # ========== CONFIGURACIÓN ==========

    def test_unknown_config_key(self):
        """Prueba que una clave desconocida en --config es un error de uso."""
        config = self.path("config.json")
        with open(config, "w") as handle:
            json.dump({'r': [0.5], 'colour': 'red'}, handle)
        code, _, err = self.run_cli('analyze', '--config', config)
        self.assertEqual(code, EXIT_USAGE)
        self.assertIn("colour", err)

    def test_flags_override_config(self):
        """Prueba que los flags explícitos tienen prioridad sobre --config."""
        config = self.path("config.json")
        out = self.path("analysis.csv")
        with open(config, "w") as handle:
            json.dump({'n': [100], 'bias-ratio': [0.0], 'out': out}, handle)
        code, _, _ = self.run_cli('analyze', '--config', config, '--n', '50')
        self.assertEqual(code, EXIT_OK)
        with open(out, newline="") as handle:
            rows = list(csv.DictReader(handle))
        self.assertEqual([row['n'] for row in rows], ['50'])

    # ========== SUBCOMANDOS ==========

    def test_analyze_to_stdout(self):
        """Prueba la fila analítica con r=0.5, n=100 y sin sesgo."""
        code, out, _ = self.run_cli('analyze', '--r', '0.5', '--n', '100', '--bias-ratio', '0',
                                    '--sharpness', '0.3333')
        self.assertEqual(code, EXIT_OK)
        rows = list(csv.DictReader(io.StringIO(out)))
        self.assertEqual(len(rows), 1)
        self.assertGreater(float(rows[0]['p_zero_small_block']), 0.999)
        self.assertLess(float(rows[0]['p_zero_large_block']), 0.001)

    def test_attack_then_detect_then_undo(self):
        """Prueba que el tensor atacado se detecta y que el rebarajado lo limpia."""
        source = self.write_tensor()
        attacked = self.path("attacked.bin")
        code, _, _ = self.run_cli('attack', '--in', source, '--out', attacked, '--r', '0.5')
        self.assertEqual(code, EXIT_OK)

        store = MalInitApp().store
        self.assertTrue(store.load_tensor(attacked).same_multiset(store.load_tensor(source)))

        report_dir = self.path("report")
        code, _, _ = self.run_cli('detect', '--in', attacked, '--out', report_dir)
        self.assertEqual(code, EXIT_OK)
        with open(os.path.join(report_dir, "report.json")) as handle:
            self.assertEqual(json.load(handle)['verdict'], 'suspicious')

        repaired = self.path("repaired.bin")
        code, _, _ = self.run_cli('undo', '--in', attacked, '--out', repaired, '--seed', '1')
        self.assertEqual(code, EXIT_OK)
        clean_dir = self.path("clean")
        self.run_cli('detect', '--in', repaired, '--out', clean_dir)
        with open(os.path.join(clean_dir, "report.json")) as handle:
            self.assertGreater(json.load(handle)['layers'][0]['p_value'], 1e-6)

    def test_montecarlo_active_neurons(self):
        """Prueba el recuento de neuronas activas tras el ataque shift."""
        out = self.path("active.csv")
        code, _, _ = self.run_cli('montecarlo', '--active-widths', '20', '100', '100', '10',
                                  '--kind', 'shift', '--s', '4', '--trials', '1000', '--out', out)
        self.assertEqual(code, EXIT_OK)
        with open(out, newline="") as handle:
            rows = list(csv.DictReader(handle))
        self.assertEqual(rows[1]['active'], '4')

    def test_train_and_knockout(self):
        """Prueba train con checkpoint y knockout sobre una red nueva."""
        ckpt = self.path("trained")
        code, _, _ = self.run_cli('train', '--classes', '2', '--features', '4', '--per-class', '20',
                                  '--hidden', '8', '--epochs', '2', '--seed', '0', '--out', ckpt)
        self.assertEqual(code, EXIT_OK)
        self.assertTrue(os.path.exists(os.path.join(ckpt, MANIFEST_NAME)))

        knocked = self.path("knocked")
        code, _, _ = self.run_cli('knockout', '--iterations', '5', '--out', knocked)
        self.assertEqual(code, EXIT_OK)
        with open(os.path.join(knocked, MANIFEST_NAME)) as handle:
            self.assertIn('knockout', json.load(handle))

    def test_experiment(self):
        """Prueba un experimento mínimo con dos semillas."""
        out = self.path("exp")
        code, _, _ = self.run_cli('experiment', '--classes', '2', '--features', '4', '--per-class', '20',
                                  '--hidden', '8', '--epochs', '2', '--seed-list', '0', '1',
                                  '--output', out)
        self.assertEqual(code, EXIT_OK)
        with open(os.path.join(out, "records.csv"), newline="") as handle:
            self.assertEqual(len(list(csv.DictReader(handle))), 2)


if __name__ == '__main__':
    unittest.main()
