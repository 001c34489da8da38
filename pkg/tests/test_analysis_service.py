import unittest
import sys
import os
import math

import numpy as np
from scipy.special import gammaln
from scipy.stats import norm

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from models.split_stats import LayerStatsInput
from services.analysis_service import AnalysisService


class TestAnalysisService(unittest.TestCase):

    def setUp(self):
        self.service = AnalysisService()

    # ========== FUNCIONES BÁSICAS ==========

    def test_g_of_half(self):
        """Prueba g(0.5) = √π."""
        self.assertAlmostEqual(self.service.g_of_r(0.5), math.sqrt(math.pi), places=12)

    def test_g_is_symmetric(self):
        """Prueba g(r) = g(1 − r)."""
        self.assertAlmostEqual(self.service.g_of_r(0.2), self.service.g_of_r(0.8), places=10)

    def test_g_extreme_values_are_finite(self):
        """Prueba que g se evalúa sin desbordamiento cerca de los extremos."""
        self.assertTrue(math.isfinite(self.service.log_g_of_r(1e-12)))
        self.assertTrue(math.isfinite(self.service.g_of_r(1e-6)))

    def test_ratio_out_of_range(self):
        """Prueba que r fuera de (0, 1) falla."""
        for r in (0.0, 1.0, -0.1, float('nan')):
            with self.assertRaises(ValueError):
                self.service.g_of_r(r)

    def test_worked_values_at_one_sigma(self):
        """Prueba r = Φ(1): c = σ, g = √π·e^½ ≈ 2.9223 y μ_L = σ·φ(1)/(1 − Φ(1))."""
        r = norm.cdf(1.0)
        self.assertAlmostEqual(self.service.cutoff(r, 1.0), 1.0, places=9)
        self.assertAlmostEqual(self.service.cutoff(r, 0.3), 0.3, places=9)
        self.assertAlmostEqual(self.service.g_of_r(r), 2.9223, delta=1e-3)
        stats = self.service.split_stats(r, 1.0)
        self.assertAlmostEqual(stats.c, 1.0, places=9)
        self.assertAlmostEqual(stats.mu_l, norm.pdf(1.0) / norm.sf(1.0), places=9)
        self.assertAlmostEqual(stats.mu_s, -norm.pdf(1.0) / norm.cdf(1.0), places=9)

    def test_cutoff_quantile(self):
        """Prueba que el corte deja una fracción r de la masa por debajo."""
        c = self.service.cutoff(0.3, 2.0)
        self.assertAlmostEqual(0.5 * math.erfc(-c / (2.0 * math.sqrt(2.0))), 0.3, places=10)

    # ========== ESTADÍSTICAS DE BLOQUES ==========

    def test_split_stats_mass_balance(self):
        """Prueba r·μ_S + (1−r)·μ_L = 0."""
        for r in (0.1, 0.5, 0.9):
            stats = self.service.split_stats(r, 0.05)
            self.assertAlmostEqual(stats.mass_balance(), 0.0, places=12)
            self.assertLess(stats.mu_s, 0.0)
            self.assertGreater(stats.mu_l, 0.0)

    def test_split_stats_half_normal(self):
        """Prueba r=0.5: medias ±σ√(2/π) y varianza σ²(1 − 2/π)."""
        sigma = 1.5
        stats = self.service.split_stats(0.5, sigma)
        self.assertAlmostEqual(stats.mu_l, sigma * math.sqrt(2.0 / math.pi), places=10)
        self.assertAlmostEqual(stats.var_s, sigma ** 2 * (1.0 - 2.0 / math.pi), places=10)

    def test_split_stats_against_samples(self):
        """Prueba las medias de los bloques frente a una muestra grande."""
        values = np.sort(np.random.default_rng(0).normal(0.0, 1.0, 400000))
        k = int(0.3 * values.size)
        stats = self.service.split_stats(0.3, 1.0)
        self.assertAlmostEqual(values[:k].mean(), stats.mu_s, delta=0.01)
        self.assertAlmostEqual(values[k:].mean(), stats.mu_l, delta=0.01)
        self.assertAlmostEqual(values[:k].var(), stats.var_s, delta=0.01)

    # ========== PRIMERA CAPA ==========

    def test_knockout_probability_near_one(self):
        """Prueba P[h ≤ 0] ≈ 1 en el bloque pequeño con r=0.5, n=100 y sin sesgo."""
        rows = self.service.p_zero_curve([0.5], [100], [0.0], [0.3333])
        self.assertEqual(len(rows), 1)
        self.assertGreater(rows[0]['p_zero_small_block'], 0.999)
        self.assertLess(rows[0]['p_zero_large_block'], 0.001)

    def test_dimensionless_matches_composed_moments(self):
        """Prueba que la forma adimensional coincide con los momentos compuestos."""
        for r, n, bias_ratio, sharpness in [(0.3, 50, 1.0, 0.1), (0.5, 100, 5.0, 1.0 / 3.0), (0.8, 784, 0.0, 1.0)]:
            params = LayerStatsInput(n=n, bias_ratio=bias_ratio, sharpness=sharpness, r=r)
            sigma_a = math.sqrt(2.0 / n)
            composed = self.service.first_layer_stats(params, sigma_a, mu_x=0.7)
            ratio_s, ratio_l = self.service.dimensionless_ratios(params)
            self.assertAlmostEqual(ratio_s, composed.ratio_s, places=9)
            self.assertAlmostEqual(ratio_l, composed.ratio_l, places=9)

    def test_wide_coefficient_differs_only_with_bias(self):
        """Prueba que el coeficiente √(2/n) solo cambia el resultado con sesgo."""
        no_bias = LayerStatsInput(n=100, bias_ratio=0.0)
        self.assertEqual(self.service.dimensionless_ratios(no_bias),
                         self.service.dimensionless_ratios(no_bias, wide_bias_coefficient=True))
        biased = LayerStatsInput(n=100, bias_ratio=5.0)
        self.assertNotEqual(self.service.dimensionless_ratios(biased),
                            self.service.dimensionless_ratios(biased, wide_bias_coefficient=True))

    def test_bias_raises_small_block_activity(self):
        """Prueba que un sesgo positivo reduce la probabilidad de desactivación."""
        rows = self.service.p_zero_curve([0.5], [50], [0.0, 5.0], [1.0 / 3.0])
        self.assertGreater(rows[0]['p_zero_small_block'], rows[1]['p_zero_small_block'])

    def test_curve_grid_size(self):
        """Prueba que la curva recorre la rejilla completa."""
        rows = self.service.p_zero_curve([0.1, 0.5, 0.9], [50, 100], [0.0, 1.0, 5.0], [0.1, 1.0])
        self.assertEqual(len(rows), 36)
        for row in rows:
            self.assertTrue(0.0 <= row['p_zero_small_block'] <= 1.0)

    # ========== PERMUTACIÓN ==========

    def test_permutation_chance_two_by_two(self):
        """Prueba log₁₀(1/6) para m=n=2 y r=0.5."""
        self.assertAlmostEqual(self.service.permutation_chance_log10(2, 2, 0.5),
                               math.log10(1.0 / 6.0), places=12)

    def test_permutation_chance_large(self):
        """Prueba la fórmula frente a log-gamma para mn grande."""
        m, n, r = 1000, 1000, 0.5
        k = 500000
        expected = (gammaln(k + 1) + gammaln(m * n - k + 1) - gammaln(m * n + 1)) / math.log(10.0)
        value = self.service.permutation_chance_log10(m, n, r)
        self.assertLess(abs(value - expected), 1e-9 * abs(expected))
        self.assertLess(value, -300000)

    def test_permutation_chance_first_layer(self):
        """Prueba el valor de una capa 784×392 con r=0.5: log₁₀ ≈ −9.251·10⁴."""
        value = self.service.permutation_chance_log10(784, 392, 0.5)
        self.assertAlmostEqual(value, -9.251e4, delta=10.0)

    def test_permutation_chance_trivial(self):
        """Prueba que r=0 da probabilidad 1."""
        self.assertEqual(self.service.permutation_chance_log10(3, 4, 0.0), 0.0)
        with self.assertRaises(ValueError):
            self.service.permutation_chance_log10(0, 4, 0.5)


if __name__ == '__main__':
    unittest.main()
