from typing import Dict, Any, List, Optional

import numpy as np


class KnockoutProblem:
    """Knockout por optimización: matrices libres, cola sustituta fija y lote de sondeo.

    Las matrices son fc [salida, entrada]. Las normas de Frobenius objetivo se
    registran al construir el problema.
    """

    OBJECTIVES = ['relu', 'softmax']

    def __init__(
        self,
        free_weights: List[np.ndarray],
        tail_weights: List[np.ndarray],
        probe: np.ndarray,
        free_biases: Optional[List[np.ndarray]] = None,
        iterations: int = 200,
        step_size: float = 0.05,
        objective: str = "relu",
        seed: int = 0
    ):
        self.free_weights = [np.array(w, dtype=np.float64) for w in free_weights]
        self.tail_weights = [np.array(w, dtype=np.float64) for w in tail_weights]
        self.probe = np.asarray(probe, dtype=np.float64)
        if free_biases is None:
            free_biases = [np.zeros(w.shape[0]) for w in self.free_weights]
        self.free_biases = [np.asarray(b, dtype=np.float64).reshape(-1) for b in free_biases]
        self.iterations = int(iterations)
        self.step_size = float(step_size)
        self.objective = objective.lower() if objective else ""
        self.seed = int(seed)

        self._validate()
        self.target_norms = [float(np.linalg.norm(w)) for w in self.free_weights]

    def _validate(self):
        if not self.free_weights:
            raise ValueError("Se necesita al menos una matriz libre")

        if self.probe.ndim != 2 or self.probe.shape[0] == 0:
            raise ValueError("El lote de sondeo no puede estar vacío")

        if self.iterations < 0:
            raise ValueError("El número de iteraciones no puede ser negativo")

        if self.step_size <= 0:
            raise ValueError("El tamaño de paso debe ser positivo")

        if self.objective not in self.OBJECTIVES:
            raise ValueError(f"Objetivo inválido. Debe ser: {', '.join(self.OBJECTIVES)}")

        width = self.probe.shape[1]
        for w in self.free_weights + self.tail_weights:
            if w.ndim != 2 or w.shape[1] != width:
                raise ValueError(f"La matriz {w.shape} no encaja con una entrada de ancho {width}")
            width = w.shape[0]

        for w, b in zip(self.free_weights, self.free_biases):
            if b.size != w.shape[0]:
                raise ValueError("Cada sesgo libre debe tener una componente por neurona")

    @property
    def widths(self) -> List[int]:
        return [self.probe.shape[1]] + [w.shape[0] for w in self.free_weights + self.tail_weights]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'widths': self.widths,
            'free': len(self.free_weights),
            'probe_size': int(self.probe.shape[0]),
            'iterations': self.iterations,
            'step_size': self.step_size,
            'objective': self.objective,
            'seed': self.seed,
            'target_norms': self.target_norms,
        }

    def __repr__(self) -> str:
        return (f"KnockoutProblem(widths={self.widths}, free={len(self.free_weights)}, "
                f"iterations={self.iterations})")


class KnockoutResult:
    """Matrices modificadas y traza del objetivo (solo pasos aceptados)."""

    def __init__(self, weights: List[np.ndarray], objective_trace: List[float],
                 iterations_run: int, target_norms: List[float]):
        self.weights = weights
        self.objective_trace = objective_trace
        self.iterations_run = iterations_run
        self.target_norms = target_norms

    @property
    def initial_objective(self) -> float:
        return self.objective_trace[0]

    @property
    def final_objective(self) -> float:
        return self.objective_trace[-1]

    @property
    def reduction(self) -> float:
        """Reducción relativa del objetivo (0 si el inicial ya era 0)."""
        if self.initial_objective <= 0:
            return 0.0
        return 1.0 - self.final_objective / self.initial_objective

    def norm_errors(self) -> List[float]:
        return [abs(float(np.linalg.norm(w)) - target) / target
                for w, target in zip(self.weights, self.target_norms)]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'objective_trace': self.objective_trace,
            'iterations_run': self.iterations_run,
            'reduction': self.reduction,
            'norm_errors': self.norm_errors(),
        }

    def __repr__(self) -> str:
        return (f"KnockoutResult(J {self.initial_objective:.4g} -> {self.final_objective:.4g}, "
                f"iterations={self.iterations_run})")
