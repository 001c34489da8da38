import math
import logging
from typing import Dict, Iterable, List, Optional

import numpy as np
from scipy.special import erfc, gammaln, ndtri

from models.split_stats import SplitStats, LayerStatsInput, FirstLayerStats

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
LOG_SQRT_PI = 0.5 * math.log(math.pi)


class AnalysisService:
    """Estadísticas en forma cerrada de una matriz atacada y de su primera capa.

    Se usa z = erf⁻¹(2r − 1) = Φ⁻¹(r)/√2 (ndtri), que conserva la precisión
    en las colas, y g(r) = √π·exp(z²) se evalúa en espacio logarítmico.
    """

    def __init__(self):
        logger.info("✅ AnalysisService inicializado")

    # ========== FUNCIONES BÁSICAS ==========

    @staticmethod
    def _check_ratio(r: float):
        if not (0.0 < r < 1.0) or math.isnan(r):
            raise ValueError(f"r debe estar en (0, 1), no {r}")

    def erfinv_2r_minus_1(self, r: float) -> float:
        self._check_ratio(r)
        return float(ndtri(r)) / SQRT2

    def log_g_of_r(self, r: float) -> float:
        z = self.erfinv_2r_minus_1(r)
        return LOG_SQRT_PI + z * z

    def g_of_r(self, r: float) -> float:
        """g(r) = √π·exp((erf⁻¹(2r−1))²)."""
        return math.exp(self.log_g_of_r(r))

    def cutoff(self, r: float, sigma_a: float) -> float:
        """Umbral c con fracción r de la masa de N(0, σ_A²) por debajo."""
        if sigma_a <= 0:
            raise ValueError("sigma_a debe ser positivo")
        return SQRT2 * sigma_a * self.erfinv_2r_minus_1(r)

    def split_stats(self, r: float, sigma_a: float) -> SplitStats:
        """Medias y varianzas de los bloques S (r más pequeñas) y L."""
        c = self.cutoff(r, sigma_a)
        log_g = self.log_g_of_r(r)

        # μ_S = −σ/(√2·r·g), μ_L = σ/(√2·(1−r)·g)
        mu_s = -sigma_a * math.exp(-math.log(SQRT2) - math.log(r) - log_g)
        mu_l = sigma_a * math.exp(-math.log(SQRT2) - math.log1p(-r) - log_g)

        var_s = max(sigma_a ** 2 + c * mu_s - mu_s ** 2, 0.0)
        var_l = max(sigma_a ** 2 + c * mu_l - mu_l ** 2, 0.0)

        return SplitStats(r=r, sigma_a=sigma_a, c=c, g=math.exp(log_g),
                          mu_s=mu_s, mu_l=mu_l, var_s=var_s, var_l=var_l)

    # ========== PRIMERA CAPA ==========

    def first_layer_stats(self, params: LayerStatsInput, sigma_a: float, mu_x: float,
                          keep_bias: bool = True) -> FirstLayerStats:
        """Momentos de h = A x + a por bloque y P[h ≤ 0].

        a = bias_ratio·σ_A·μ_x y σ_x² = sharpness·μ_x². Con keep_bias=False se
        omite a en la media (aproximación sin sesgo).
        """
        if mu_x <= 0:
            raise ValueError("mu_x debe ser positivo (entradas positivas)")

        split = self.split_stats(params.r, sigma_a)
        n = params.n
        bias = params.bias_ratio * sigma_a * mu_x if keep_bias else 0.0
        var_x = params.sharpness * mu_x ** 2

        def block(mu_a: float, var_a: float):
            mu_h = n * mu_x * mu_a + bias
            var_h = n * (mu_a ** 2 * var_x + var_a * var_x + var_a * mu_x ** 2)
            sigma_h = math.sqrt(var_h)
            ratio = mu_h / (sigma_h * SQRT2)
            return mu_h, sigma_h, ratio

        mu_h_s, sigma_h_s, ratio_s = block(split.mu_s, split.var_s)
        mu_h_l, sigma_h_l, ratio_l = block(split.mu_l, split.var_l)

        stats = FirstLayerStats(
            mu_h_s=mu_h_s, mu_h_l=mu_h_l, sigma_h_s=sigma_h_s, sigma_h_l=sigma_h_l,
            p_zero_s=self.p_zero_from_ratio(ratio_s), p_zero_l=self.p_zero_from_ratio(ratio_l),
            ratio_s=ratio_s, ratio_l=ratio_l,
        )
        logger.debug(f"first_layer_stats {params}: {stats}")
        return stats

    @staticmethod
    def p_zero_from_ratio(ratio: float) -> float:
        """½ − ½·erf(ratio), evaluado como ½·erfc(ratio)."""
        return float(min(1.0, max(0.0, 0.5 * erfc(ratio))))

    def dimensionless_ratios(self, params: LayerStatsInput,
                             wide_bias_coefficient: bool = False):
        """μ_h/(σ_h√2) de ambos bloques a partir de los tres parámetros adimensionales.

        Con wide_bias_coefficient=True el término del sesgo usa √(2/n) en
        lugar de √(1/(2n)); solo la segunda forma coincide con la composición.
        """
        r, n = params.r, params.n
        z = self.erfinv_2r_minus_1(r)
        g = self.g_of_r(r)
        sharp = params.sharpness + 1.0
        coef = math.sqrt(2.0 / n) if wide_bias_coefficient else math.sqrt(1.0 / (2.0 * n))
        half_root_n = math.sqrt(n / 4.0)

        rg_s = r * g
        rg_l = (1.0 - r) * g
        den_s = math.sqrt((rg_s ** 2 - z * rg_s) * sharp - 0.5)
        den_l = math.sqrt((rg_l ** 2 + z * rg_l) * sharp - 0.5)

        ratio_s = (coef * params.bias_ratio * rg_s - half_root_n) / den_s
        ratio_l = (coef * params.bias_ratio * rg_l + half_root_n) / den_l
        return ratio_s, ratio_l

    def p_zero_curve(self, rs: Iterable[float], ns: Iterable[int],
                     bias_ratios: Iterable[float], sharpnesses: Iterable[float],
                     wide_bias_coefficient: bool = False) -> List[Dict[str, float]]:
        """Probabilidad de desactivación sobre una rejilla completa de parámetros."""
        rows = []
        for r in rs:
            for n in ns:
                for bias_ratio in bias_ratios:
                    for sharpness in sharpnesses:
                        params = LayerStatsInput(n=n, bias_ratio=bias_ratio, sharpness=sharpness, r=r)
                        ratio_s, ratio_l = self.dimensionless_ratios(params, wide_bias_coefficient)
                        rows.append({
                            'r': float(r), 'n': int(n), 'bias_ratio': float(bias_ratio),
                            'sharpness': float(sharpness),
                            'p_zero_small_block': self.p_zero_from_ratio(ratio_s),
                            'p_zero_large_block': self.p_zero_from_ratio(ratio_l),
                        })
        logger.info(f"Curva de desactivación con {len(rows)} puntos")
        return rows

    # ========== PROBABILIDAD DE LA PERMUTACIÓN ==========

    def permutation_chance_log10(self, m: int, n: int, r: float) -> float:
        """log₁₀ de (r·mn)!((1−r)mn)!/(mn)!, vía log-gamma."""
        if m < 1 or n < 1:
            raise ValueError("m y n deben ser al menos 1")
        if not (0.0 <= r <= 1.0) or math.isnan(r):
            raise ValueError(f"r debe estar en [0, 1], no {r}")

        total = m * n
        small = int(math.floor(r * total + 0.5))
        log_chance = gammaln(small + 1) + gammaln(total - small + 1) - gammaln(total + 1)
        return float(log_chance / math.log(10.0))

    def describe(self, r: float, sigma_a: float, params: Optional[LayerStatsInput] = None,
                 mu_x: float = 0.5) -> Dict[str, float]:
        """Resumen plano para la CLI."""
        summary = self.split_stats(r, sigma_a).to_dict()
        if params is not None:
            summary.update(self.first_layer_stats(params, sigma_a, mu_x).to_dict())
        return {key: float(np.float64(value)) for key, value in summary.items()}
