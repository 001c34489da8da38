import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from models.attack_config import AttackConfig, AttackStream
from models.mc_config import McConfig
from models.network import Network
from models.rng import Rng
from models.split_stats import LayerStatsInput
from models.weight_tensor import WeightTensor
from services.attack_service import AttackService
from services.tensor_service import TensorService

logger = logging.getLogger(__name__)


class MonteCarloService:
    """Estimaciones empíricas de probabilidades de desactivación.

    Los ensayos se reparten en trozos de tamaño fijo; el trozo i usa siempre el
    hijo i de la semilla y los conteos se suman, así que el resultado no depende
    del número de trabajadores.
    """

    MIN_TRIALS = 1000

    def __init__(self, attack_service: Optional[AttackService] = None,
                 tensor_service: Optional[TensorService] = None):
        self.attack_service = attack_service or AttackService()
        self.tensor_service = tensor_service or TensorService()
        logger.info("✅ MonteCarloService inicializado")

    def _run_chunks(self, cfg: McConfig, work: Callable[[Rng, int], np.ndarray]) -> np.ndarray:
        tasks = list(cfg.chunks())

        def run(task):
            index, size = task
            return work(Rng.child(cfg.seed, index), size)

        if cfg.jobs > 1 and len(tasks) > 1:
            with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
                partials = list(pool.map(run, tasks))
        else:
            partials = [run(task) for task in tasks]

        return np.sum(partials, axis=0)

    # ========== PROBABILIDAD DE DESACTIVACIÓN ==========

    def estimate_p_zero(self, layer: Tuple[WeightTensor, np.ndarray], cfg: McConfig) -> np.ndarray:
        """Frecuencia de (W x + a)_i ≤ 0 por neurona."""
        weights, bias = layer
        if weights.rank != 2:
            raise ValueError(
                f"estimate_p_zero solo admite capas fc; para {weights.shape} use active_neuron_count"
            )
        if cfg.trials < self.MIN_TRIALS:
            raise ValueError(f"Se necesitan al menos {self.MIN_TRIALS} ensayos, no {cfg.trials}")

        matrix = weights.to_array()
        bias = np.asarray(bias, dtype=np.float64).reshape(-1)
        if bias.size != matrix.shape[0]:
            raise ValueError(f"El sesgo tiene {bias.size} componentes y la capa {matrix.shape[0]} neuronas")

        def work(rng: Rng, size: int) -> np.ndarray:
            x = cfg.sample_inputs(rng, size, (matrix.shape[1],))
            return np.count_nonzero(x @ matrix.T + bias <= 0.0, axis=0)

        counts = self._run_chunks(cfg, work)
        return counts / cfg.trials

    def active_neuron_count(self, net: Network, cfg: McConfig) -> List[int]:
        """Neuronas con salida post-ReLU > 0 en al menos un ensayo, por capa con pesos.

        La última capa se cuenta sobre ReLU(logits); en capas convolucionales la
        unidad es el canal.
        """
        shape = net.spec.input_shape

        def work(rng: Rng, size: int) -> np.ndarray:
            x = cfg.sample_inputs(rng, size, shape)
            trace = []
            logits = net.copy().logits(x, trace=trace)
            outputs = trace + [np.maximum(logits, 0.0)]
            seen = [(out > 0).reshape(size, -1, out.shape[-1]).any(axis=(0, 1)) for out in outputs]
            return np.concatenate(seen).astype(np.int64)

        flags = self._run_chunks(cfg, work) > 0
        counts, offset = [], 0
        for out_width in self._widths(net):
            counts.append(int(flags[offset:offset + out_width].sum()))
            offset += out_width
        logger.info(f"Neuronas activas por capa: {counts}")
        return counts

    @staticmethod
    def _widths(net: Network) -> List[int]:
        return [layer.weights.shape[0] if layer.kind == 'dense' else layer.weights.shape[-1]
                for layer in net.weighted]

    def nonzero_output_fraction(self, net: Network, cfg: McConfig, layer: int = -1) -> float:
        """Fracción de salidas post-ReLU distintas de cero en una capa dada."""
        shape = net.spec.input_shape
        depth = net.depth
        position = layer % depth

        def work(rng: Rng, size: int) -> np.ndarray:
            x = cfg.sample_inputs(rng, size, shape)
            trace = []
            logits = net.copy().logits(x, trace=trace)
            out = trace[position] if position < depth - 1 else np.maximum(logits, 0.0)
            return np.array([np.count_nonzero(out > 0), out.size], dtype=np.int64)

        nonzero, total = self._run_chunks(cfg, work)
        return float(nonzero / total)

    # ========== ORÁCULO DE LA PRIMERA CAPA ==========

    def estimate_block_p_zero(self, params: LayerStatsInput, sigma_a: float, cfg: McConfig,
                              rows: int = 200, matrix_seed: int = 0) -> Tuple[float, float]:
        """Frecuencia media de h ≤ 0 en las filas del bloque pequeño y del grande.

        Se atacan pesos N(0, σ_A²) de forma [rows, n] con Soft Knockout
        (colocación aleatoria dentro de cada bloque) y sesgo
        a = bias_ratio·σ_A·μ_x. Las filas mixtas se descartan.
        """
        n = params.n
        rng = Rng(matrix_seed)
        clean = WeightTensor(shape=(rows, n),
                             data=self.tensor_service.normal_sample(rng, 0.0, sigma_a, rows * n))
        attack = AttackConfig(kind='soft_knockout', r=params.r, placement='shuffled',
                              placement_seed=matrix_seed)
        attacked = self.attack_service.soft_knockout_fc(AttackStream(attack), clean)

        mu_x, _ = cfg.input_moments()
        bias = np.full(rows, params.bias_ratio * sigma_a * mu_x)
        frequencies = self.estimate_p_zero((attacked, bias), cfg)

        k = self.attack_service.small_count(params.r, rows * n)
        full_small = k // n
        first_large = -(-k // n)
        small = frequencies[:full_small]
        large = frequencies[first_large:]
        p_small = float(small.mean()) if small.size else float('nan')
        p_large = float(large.mean()) if large.size else float('nan')
        return p_small, p_large

    def empirical_block_stats(self, w: WeightTensor, r: float) -> Dict[str, float]:
        """Media y varianza muestrales de los bloques S y L de un tensor."""
        k = self.attack_service.small_count(r, w.size)
        if k == 0 or k == w.size:
            raise ValueError("Con ese r uno de los bloques queda vacío")
        ordered = np.sort(w.data, kind='stable')
        small, large = ordered[:k], ordered[k:]
        return {
            'mu_s': float(small.mean()), 'mu_l': float(large.mean()),
            'var_s': float(small.var()), 'var_l': float(large.var()),
        }
