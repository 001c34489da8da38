import logging
from typing import List, Optional, Tuple

import numpy as np

from models.initializer_spec import InitializerSpec
from models.knockout_problem import KnockoutProblem, KnockoutResult
from models.network import Network
from models.network_spec import NetworkSpec
from models.rng import Rng
from services.init_service import InitService

logger = logging.getLogger(__name__)


class KnockoutService:
    """Knockout por descenso de gradiente proyectado con normas de Frobenius fijas.

    Paso: W ← W − η·‖W⁰‖·∇/‖∇‖ por matriz, seguido de reescalado a ‖W⁰‖.
    Un paso que no mejora el objetivo se descarta y η se reduce a la mitad.
    """

    PATIENCE = 20
    MIN_IMPROVEMENT = 1e-6
    MIN_STEP = 1e-12

    def __init__(self, init_service: Optional[InitService] = None):
        self.init_service = init_service or InitService()
        logger.info("✅ KnockoutService inicializado")

    # ========== CONSTRUCCIÓN DEL PROBLEMA ==========

    def problem_from_network(self, net: Network, free_layers: int = 2, probe_size: int = 256,
                             seed: int = 0, iterations: int = 200, step_size: float = 0.05,
                             objective: str = "relu") -> KnockoutProblem:
        """Primeras `free_layers` matrices libres; el resto se sustituye por matrices nuevas."""
        if net.spec.is_conv:
            raise ValueError("El knockout por optimización solo admite redes totalmente conectadas")
        if not 1 <= free_layers <= net.depth:
            raise ValueError(f"free_layers debe estar en [1, {net.depth}]")

        probe_rng, tail_rng = Rng(seed).spawn(2)
        features = net.spec.input_shape[0]
        probe = probe_rng.uniform(0.0, 1.0, (probe_size, features))

        free = [layer.weights.copy() for layer in net.weighted[:free_layers]]
        biases = [layer.bias.copy() for layer in net.weighted[:free_layers]]
        tail = []
        for index, layer in enumerate(net.weighted[free_layers:], start=free_layers):
            fresh, _ = self.init_service.init_layer(net.spec.initializer, layer.weights.shape,
                                                    tail_rng, layer_index=index)
            tail.append(fresh.to_array())

        return KnockoutProblem(free, tail, probe, free_biases=biases, iterations=iterations,
                               step_size=step_size, objective=objective, seed=seed)

    def _surrogate(self, problem: KnockoutProblem, free: List[np.ndarray]) -> Network:
        widths = problem.widths
        spec = NetworkSpec.dense_net(widths[0], widths[1:-1], widths[-1],
                                     initializer=InitializerSpec())
        biases = list(problem.free_biases) + [np.zeros(w.shape[0]) for w in problem.tail_weights]
        return Network(spec, list(free) + problem.tail_weights, biases)

    # ========== OBJETIVO ==========

    def objective(self, problem: KnockoutProblem, free: List[np.ndarray]) -> Tuple[float, List[np.ndarray]]:
        """J = Σ_j Σ_c F_c(X_j) y su gradiente respecto a las matrices libres.

        'relu': F = ReLU(salida final), no negativo. 'softmax': F = softmax,
        cuya suma por muestra es 1 y por tanto constante.
        """
        net = self._surrogate(problem, free)
        logits = net.logits(problem.probe)

        if problem.objective == 'softmax':
            value = float(net.forward(problem.probe).sum())
            return value, [np.zeros_like(w) for w in free]

        value = float(np.maximum(logits, 0.0).sum())
        grads = net.backward_from_output((logits > 0).astype(np.float64))
        return value, [grads[2 * i] for i in range(len(free))]

    # ========== OPTIMIZACIÓN ==========

    @staticmethod
    def _project(weights: List[np.ndarray], norms: List[float]) -> List[np.ndarray]:
        return [w * (target / np.linalg.norm(w)) for w, target in zip(weights, norms)]

    def optimize_knockout(self, problem: KnockoutProblem) -> KnockoutResult:
        norms = problem.target_norms
        if any(norm == 0.0 for norm in norms):
            logger.error("❌ Matriz libre de norma cero: la proyección no está definida")
            raise ValueError("Una matriz libre tiene norma de Frobenius cero")

        current = [w.copy() for w in problem.free_weights]
        value, grads = self.objective(problem, current)
        trace = [value]
        step = problem.step_size
        iteration = 0

        logger.info(f"Knockout {problem!r}: J0={value:.6g}")

        while iteration < problem.iterations:
            iteration += 1
            grad_norms = [float(np.linalg.norm(g)) for g in grads]
            if all(n == 0.0 for n in grad_norms):
                break

            candidate = [
                w - step * target * g / n if n > 0 else w
                for w, g, n, target in zip(current, grads, grad_norms, norms)
            ]
            candidate = self._project(candidate, norms)
            candidate_value, candidate_grads = self.objective(problem, candidate)

            if candidate_value < value:
                current, value, grads = candidate, candidate_value, candidate_grads
                trace.append(value)
                if self._stalled(trace):
                    break
            else:
                step /= 2.0
                if step < self.MIN_STEP:
                    break

        result = KnockoutResult(current, trace, iteration, norms)
        logger.info(f"✅ {result!r}")
        return result

    def _stalled(self, trace: List[float]) -> bool:
        if len(trace) <= self.PATIENCE:
            return False
        before, now = trace[-1 - self.PATIENCE], trace[-1]
        if before <= 0:
            return True
        return (before - now) / before < self.MIN_IMPROVEMENT

    def apply(self, net: Network, result: KnockoutResult) -> Network:
        """Copia de la red con las matrices libres sustituidas."""
        attacked = net.copy()
        for layer, weights in zip(attacked.weighted, result.weights):
            layer.weights[...] = weights
        return attacked
