"""
BlockStructureValidator - Prueba estadística de estructura por bloques en matrices de pesos.
"""
import logging
from typing import Dict, Any

import numpy as np
from scipy.stats import hypergeom

from models.weight_tensor import WeightTensor

logger = logging.getLogger(__name__)


class BlockStructureValidator:
    """Detecta filas o columnas que concentran componentes pequeñas o grandes.

    Se marca cada componente estrictamente por debajo de la mediana. Si la
    colocación es intercambiable, el número de marcas de una fila sigue una
    hipergeométrica (N componentes, K marcadas, n extracciones). El p-valor de
    un eje es el mínimo de las colas bilaterales corregido por Bonferroni sobre
    las filas (o columnas); los dos ejes se combinan con otro factor 2.
    """

    MIN_SIDE = 4

    def __init__(self, alpha: float = 0.01):
        if not 0.0 < alpha < 1.0:
            raise ValueError("alpha debe estar en (0, 1)")
        self.alpha = alpha
        logger.info(f"BlockStructureValidator inicializado (alpha={alpha})")

    @staticmethod
    def _matrix(w: WeightTensor) -> np.ndarray:
        if w.layout == 'bias':
            raise ValueError("La prueba de bloques no se aplica a sesgos")
        matrix = w.as_matrix()
        rows, cols = matrix.shape
        if rows < BlockStructureValidator.MIN_SIDE or cols < BlockStructureValidator.MIN_SIDE:
            raise ValueError(f"La matriz {matrix.shape} es demasiado pequeña (mínimo 4×4)")
        return matrix

    @staticmethod
    def _axis_p_value(counts: np.ndarray, total: int, marked: int, draws: int) -> float:
        distribution = hypergeom(total, marked, draws)
        lower = distribution.cdf(counts)
        upper = distribution.sf(counts - 1)
        two_sided = np.minimum(1.0, 2.0 * np.minimum(lower, upper))
        return float(min(1.0, counts.size * two_sided.min()))

    def analyze(self, w: WeightTensor) -> Dict[str, Any]:
        """p-valores por filas, por columnas y combinado."""
        matrix = self._matrix(w)
        rows, cols = matrix.shape
        below = matrix < np.median(matrix)
        marked = int(below.sum())

        if marked == 0:
            # Sin orden (todas iguales): no hay información
            return {'p_value': 1.0, 'p_rows': 1.0, 'p_cols': 1.0, 'marked': 0, 'shape': [rows, cols]}

        total = rows * cols
        p_rows = self._axis_p_value(below.sum(axis=1), total, marked, cols)
        p_cols = self._axis_p_value(below.sum(axis=0), total, marked, rows)
        p_value = min(1.0, 2.0 * min(p_rows, p_cols))

        logger.debug(f"{w.name}: p_filas={p_rows:.3g} p_columnas={p_cols:.3g}")
        return {'p_value': p_value, 'p_rows': p_rows, 'p_cols': p_cols,
                'marked': marked, 'shape': [rows, cols]}

    def block_structure_test(self, w: WeightTensor) -> float:
        return self.analyze(w)['p_value']

    def is_suspicious(self, w: WeightTensor) -> bool:
        return self.block_structure_test(w) < self.alpha
