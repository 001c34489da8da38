from typing import Dict, Any

import numpy as np
from scipy.stats import norm

from models.rng import Rng


class McConfig:
    """Configuración de una estimación de Monte Carlo."""

    DISTRIBUTIONS = ['uniform01', 'normal']

    # Ensayos por trozo: cada trozo usa su propio hijo de la semilla
    CHUNK = 1000

    def __init__(
        self,
        trials: int = 10000,
        input_distribution: str = "uniform01",
        mean: float = 0.5,
        std: float = 0.5,
        truncate_at_zero: bool = False,
        seed: int = 0,
        jobs: int = 1
    ):
        self.trials = int(trials)
        self.input_distribution = (input_distribution or "").lower()
        self.mean = float(mean)
        self.std = float(std)
        self.truncate_at_zero = bool(truncate_at_zero)
        self.seed = int(seed)
        self.jobs = int(jobs)

        self._validate()

    def _validate(self):
        if self.trials < 1:
            raise ValueError("El número de ensayos debe ser al menos 1")
        if self.input_distribution not in self.DISTRIBUTIONS:
            raise ValueError(f"Distribución inválida. Debe ser: {', '.join(self.DISTRIBUTIONS)}")
        if self.input_distribution == 'normal' and self.std <= 0:
            raise ValueError("La desviación típica de la entrada debe ser positiva")
        if self.jobs < 1:
            raise ValueError("jobs debe ser al menos 1")

    @classmethod
    def for_sharpness(cls, sharpness: float, trials: int, seed: int = 0, mean: float = 1.0,
                      jobs: int = 1) -> 'McConfig':
        """Entrada normal con σ²/μ² = sharpness (sin truncar, para conservar los momentos)."""
        if sharpness <= 0:
            raise ValueError("sharpness debe ser positivo para una entrada normal")
        return cls(trials=trials, input_distribution='normal', mean=mean,
                   std=mean * float(np.sqrt(sharpness)), seed=seed, jobs=jobs)

    def chunks(self):
        """Pares (índice, tamaño) que reparten los ensayos en trozos fijos."""
        index, remaining = 0, self.trials
        while remaining > 0:
            size = min(self.CHUNK, remaining)
            yield index, size
            index += 1
            remaining -= size

    def sample_inputs(self, rng: Rng, count: int, shape) -> np.ndarray:
        """Muestra `count` entradas con la forma dada."""
        full_shape = (count,) + tuple(shape)
        if self.input_distribution == 'uniform01':
            return rng.uniform(0.0, 1.0, full_shape)

        values = rng.normal(self.mean, self.std, full_shape)
        if self.truncate_at_zero:
            values = np.maximum(values, 0.0)
        return values

    def input_moments(self):
        """(μ_x, σ²_x) de la distribución de entrada."""
        if self.input_distribution == 'uniform01':
            return 0.5, 1.0 / 12.0
        if not self.truncate_at_zero:
            return self.mean, self.std ** 2
        # Momentos de max(X, 0) con X normal
        alpha = self.mean / self.std
        first = self.mean * norm.cdf(alpha) + self.std * norm.pdf(alpha)
        second = (self.mean ** 2 + self.std ** 2) * norm.cdf(alpha) + self.mean * self.std * norm.pdf(alpha)
        return first, second - first ** 2

    def to_dict(self) -> Dict[str, Any]:
        return {
            'trials': self.trials, 'input_distribution': self.input_distribution,
            'mean': self.mean, 'std': self.std, 'truncate_at_zero': self.truncate_at_zero,
            'seed': self.seed, 'jobs': self.jobs,
        }

    def __repr__(self) -> str:
        return f"McConfig(trials={self.trials}, dist='{self.input_distribution}', seed={self.seed})"
