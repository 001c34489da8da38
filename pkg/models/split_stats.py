import math
from typing import Dict, Any


class SplitStats:
    """Estadísticas analíticas de una matriz partida en bloques pequeño/grande."""

    def __init__(self, r: float, sigma_a: float, c: float, g: float,
                 mu_s: float, mu_l: float, var_s: float, var_l: float):
        self.r = r
        self.sigma_a = sigma_a
        self.c = c
        self.g = g
        self.mu_s = mu_s
        self.mu_l = mu_l
        self.var_s = var_s
        self.var_l = var_l

        self._validate()

    def _validate(self):
        if not 0.0 < self.r < 1.0:
            raise ValueError("r debe estar en (0, 1)")
        if self.sigma_a <= 0:
            raise ValueError("sigma_a debe ser positivo")
        if not (self.mu_s < 0.0 < self.mu_l):
            raise ValueError("La media del bloque pequeño debe ser negativa y la del grande positiva")

    def mass_balance(self) -> float:
        """r·μ_S + (1−r)·μ_L, cero salvo redondeo."""
        return self.r * self.mu_s + (1.0 - self.r) * self.mu_l

    def to_dict(self) -> Dict[str, Any]:
        return {
            'r': self.r, 'sigma_a': self.sigma_a, 'c': self.c, 'g': self.g,
            'mu_s': self.mu_s, 'mu_l': self.mu_l, 'var_s': self.var_s, 'var_l': self.var_l,
        }

    def __repr__(self) -> str:
        return (f"SplitStats(r={self.r}, c={self.c:.4g}, mu_s={self.mu_s:.4g}, "
                f"mu_l={self.mu_l:.4g}, var_s={self.var_s:.4g}, var_l={self.var_l:.4g})")


class LayerStatsInput:
    """Los tres parámetros adimensionales de la primera capa, más r."""

    def __init__(self, n: int, bias_ratio: float = 0.0, sharpness: float = 1.0 / 3.0, r: float = 0.5):
        self.n = int(n)
        self.bias_ratio = float(bias_ratio)
        self.sharpness = float(sharpness)
        self.r = float(r)

        self._validate()

    def _validate(self):
        if self.n < 1:
            raise ValueError("La dimensión de entrada n debe ser al menos 1")
        if self.sharpness < 0 or not math.isfinite(self.sharpness):
            raise ValueError("sharpness debe ser no negativo")
        if not 0.0 < self.r < 1.0:
            raise ValueError("r debe estar en (0, 1)")
        if math.isnan(self.bias_ratio):
            raise ValueError("bias_ratio no puede ser NaN")

    def to_dict(self) -> Dict[str, Any]:
        return {'n': self.n, 'bias_ratio': self.bias_ratio, 'sharpness': self.sharpness, 'r': self.r}

    def __repr__(self) -> str:
        return (f"LayerStatsInput(n={self.n}, bias_ratio={self.bias_ratio}, "
                f"sharpness={self.sharpness:.4g}, r={self.r})")


class FirstLayerStats:
    """Momentos de h = A x + a por bloque y probabilidad de desactivación."""

    def __init__(self, mu_h_s: float, mu_h_l: float, sigma_h_s: float, sigma_h_l: float,
                 p_zero_s: float, p_zero_l: float, ratio_s: float = 0.0, ratio_l: float = 0.0):
        self.mu_h_s = mu_h_s
        self.mu_h_l = mu_h_l
        self.sigma_h_s = sigma_h_s
        self.sigma_h_l = sigma_h_l
        self.p_zero_s = p_zero_s
        self.p_zero_l = p_zero_l
        # μ_h / (σ_h √2) de cada bloque
        self.ratio_s = ratio_s
        self.ratio_l = ratio_l

        self._validate()

    def _validate(self):
        for name in ('p_zero_s', 'p_zero_l'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} debe ser una probabilidad, no {value}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            'mu_h_s': self.mu_h_s, 'mu_h_l': self.mu_h_l,
            'sigma_h_s': self.sigma_h_s, 'sigma_h_l': self.sigma_h_l,
            'p_zero_s': self.p_zero_s, 'p_zero_l': self.p_zero_l,
            'ratio_s': self.ratio_s, 'ratio_l': self.ratio_l,
        }

    def __repr__(self) -> str:
        return f"FirstLayerStats(p_zero_s={self.p_zero_s:.6g}, p_zero_l={self.p_zero_l:.6g})"
