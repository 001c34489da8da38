import logging
from typing import Sequence

import numpy as np

from models.rng import Rng
from models.weight_tensor import WeightTensor

logger = logging.getLogger(__name__)


class TensorService:
    """Operaciones básicas sobre tensores: muestreo normal y permutaciones."""

    def __init__(self):
        logger.info("✅ TensorService inicializado")

    def normal_sample(self, rng: Rng, mean: float, std: float, count: int) -> np.ndarray:
        """`count` muestras i.i.d. de N(mean, std²)."""
        if std <= 0:
            raise ValueError("La desviación típica debe ser positiva")
        if count < 1:
            raise ValueError("Se necesita al menos una muestra")
        return rng.normal(mean, std, int(count))

    def permute_components(self, w: WeightTensor, permutation: Sequence[int]) -> WeightTensor:
        """Reordena las componentes: salida[i] = entrada[permutation[i]]."""
        permutation = np.asarray(permutation)
        if not self.is_bijection(permutation, w.size):
            raise ValueError(f"La permutación no es una biyección sobre [0, {w.size})")
        return w.with_data(w.data[permutation])

    @staticmethod
    def is_bijection(permutation: np.ndarray, size: int) -> bool:
        if permutation.ndim != 1 or permutation.size != size:
            return False
        if not np.issubdtype(permutation.dtype, np.integer):
            return False
        return bool(np.array_equal(np.sort(permutation), np.arange(size)))

    def shuffle(self, w: WeightTensor, rng: Rng) -> WeightTensor:
        """Permutación uniforme de todas las componentes."""
        return self.permute_components(w, rng.permutation(w.size))
