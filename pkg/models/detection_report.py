from typing import Dict, Any, List, Optional


class DetectionReport:
    """Veredicto por capa de la prueba de estructura por bloques."""

    VERDICTS = ['clean', 'suspicious']

    STATISTIC = ("recuento por fila y por columna de componentes bajo la mediana; "
                 "cola hipergeométrica bilateral con corrección de Bonferroni")

    def __init__(self, alpha: float = 0.01):
        self.alpha = float(alpha)
        self.layers: List[Dict[str, Any]] = []

        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha debe estar en (0, 1)")

    def add_layer(self, name: str, shape: List[int], p_value: float,
                  details: Optional[Dict[str, Any]] = None):
        if not 0.0 <= p_value <= 1.0:
            raise ValueError(f"p-valor fuera de [0, 1]: {p_value}")
        entry = {
            'name': name,
            'shape': list(shape),
            'p_value': float(p_value),
            'verdict': 'suspicious' if p_value < self.alpha else 'clean',
        }
        entry.update(details or {})
        self.layers.append(entry)

    @property
    def suspicious(self) -> bool:
        return any(layer['verdict'] == 'suspicious' for layer in self.layers)

    @property
    def verdict(self) -> str:
        return 'suspicious' if self.suspicious else 'clean'

    def to_dict(self) -> Dict[str, Any]:
        return {
            'verdict': self.verdict,
            'alpha': self.alpha,
            'statistic': self.STATISTIC,
            'layers': self.layers,
        }

    def __repr__(self) -> str:
        flagged = sum(layer['verdict'] == 'suspicious' for layer in self.layers)
        return f"DetectionReport({flagged}/{len(self.layers)} capas sospechosas)"
