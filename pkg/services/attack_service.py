import math
import logging
from typing import List, Optional, Tuple

import numpy as np

from models.attack_config import AttackConfig, AttackStream
from models.rng import Rng
from models.weight_tensor import WeightTensor

logger = logging.getLogger(__name__)


class AttackService:
    """Ataques de inicialización: permutan los pesos recién inicializados.

    Convenciones comunes:
      - k = ⌊r·N + ½⌋ componentes forman el bloque pequeño S.
      - Empates: se respeta el orden del índice original (orden estable).
      - Colocación 'stable': cada bloque ordenado ascendentemente en su orden de
        llenado. 'shuffled': cada bloque permutado con la semilla de colocación
        (hijo por índice de tensor dentro del flujo).
      - Una fila o columna mixta en la frontera se llena de forma contigua.
    """

    def __init__(self):
        logger.info("✅ AttackService inicializado")

    # ========== UTILIDADES ==========

    @staticmethod
    def small_count(r: float, size: int) -> int:
        return int(math.floor(r * size + 0.5))

    @staticmethod
    def _split_sorted(values: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
        ordered = values[np.argsort(values, kind='stable')]
        return ordered[:k], ordered[k:]

    @staticmethod
    def _placement_rng(stream: AttackStream) -> Optional[Rng]:
        config = stream.config
        if config.placement != 'shuffled':
            return None
        return Rng.child(config.placement_seed, stream.processed)

    @staticmethod
    def _place(block: np.ndarray, rng: Optional[Rng]) -> np.ndarray:
        if rng is None or block.size < 2:
            return block
        return block[rng.permutation(block.size)]

    @staticmethod
    def _require_rank(w: WeightTensor, rank: int):
        if w.rank != rank:
            raise ValueError(f"Se esperaba un tensor de rango {rank} y se recibió {w.shape}")

    def _stack_rows(self, w: WeightTensor, small: np.ndarray, large: np.ndarray) -> np.ndarray:
        # (S sobre L): llenado por filas, S primero
        rows, cols = w.shape
        return np.concatenate([small, large]).reshape(rows, cols)

    def _cross_columns(self, w: WeightTensor, small: np.ndarray, large: np.ndarray) -> np.ndarray:
        # (L S): llenado por columnas, L primero
        rows, cols = w.shape
        return np.concatenate([large, small]).reshape(cols, rows).T

    # ========== ATAQUES FC ==========

    def soft_knockout_fc(self, stream: AttackStream, w: WeightTensor) -> WeightTensor:
        """Soft Knockout: bloque de las r·|W| componentes más pequeñas."""
        self._require_rank(w, 2)
        k = self.small_count(stream.config.r, w.size)
        small, large = self._split_sorted(w.data, k)
        out = self._layout_fc(stream, w, small, large)
        stream.advance()
        return out

    def shift_fc(self, stream: AttackStream, w: WeightTensor) -> WeightTensor:
        """Shift: división por signo y, en capas cruzadas, desplazamiento periódico s."""
        self._require_rank(w, 2)
        k = int(np.count_nonzero(w.data < 0))
        small, large = self._split_sorted(w.data, k)

        if not stream.cross:
            out = self._layout_fc(stream, w, small, large)
        else:
            rng = self._placement_rng(stream)
            matrix = self._cross_columns(w, self._place(small, rng), self._place(large, rng))
            matrix = self._shift_rows(matrix, stream.config.s)
            out = w.with_data(matrix)

        stream.advance()
        return out

    def _layout_fc(self, stream: AttackStream, w: WeightTensor,
                   small: np.ndarray, large: np.ndarray) -> WeightTensor:
        rng = self._placement_rng(stream)
        small, large = self._place(small, rng), self._place(large, rng)
        if stream.cross:
            return w.with_data(self._cross_columns(w, small, large))
        return w.with_data(self._stack_rows(w, small, large))

    @staticmethod
    def _shift_rows(matrix: np.ndarray, s: int) -> np.ndarray:
        """Desplaza periódicamente las primeras s filas (s módulo el número de columnas).

        Cada fila de la disposición (L S) es un prefijo de componentes no
        negativas seguido de un sufijo negativo; rotarla tantas posiciones como
        componentes negativas tiene deja sus componentes grandes sobre las
        entradas que la capa anterior mantiene activas.
        """
        rows, cols = matrix.shape
        active = min(s % cols, rows)
        shifted = matrix.copy()
        for i in range(active):
            negatives = int(np.count_nonzero(shifted[i] < 0))
            shifted[i] = np.roll(shifted[i], negatives)
        return shifted

    # ========== ATAQUES CONV ==========

    def conv_attack(self, stream: AttackStream, w: WeightTensor,
                    cfg: Optional[AttackConfig] = None) -> WeightTensor:
        """Variante convolucional: por filtros en capas impares, por canales en pares."""
        self._require_rank(w, 4)
        cfg = cfg or stream.config
        fh, fw, channels, filters = w.shape
        ratio = cfg.r if cfg.kind == 'conv_soft_knockout' else 0.5
        rng = self._placement_rng(stream)
        if cfg.attacked_filters > filters:
            raise ValueError(
                f"attacked_filters={cfg.attacked_filters} supera los {filters} filtros de la capa"
            )

        if not stream.cross:
            small_filters = min(filters, int(math.ceil(ratio * filters)))
            k = small_filters * fh * fw * channels
            small, large = self._split_sorted(w.data, k)
            sequence = np.concatenate([self._place(small, rng), self._place(large, rng)])
            tensor = sequence.reshape(filters, fh, fw, channels).transpose(1, 2, 3, 0)
            stream.previous_dead_channels = small_filters
        else:
            dead = stream.previous_dead_channels
            if dead is None or dead > channels:
                dead = min(channels, int(math.ceil(ratio * channels)))
            k_large = dead * fh * fw * filters
            small, large = self._split_sorted(w.data, w.size - k_large)
            sequence = np.concatenate([self._place(large, rng), self._place(small, rng)])
            tensor = sequence.reshape(channels, filters, fh, fw).transpose(2, 3, 0, 1).copy()

            for f in range(cfg.attacked_filters):
                tensor[:, :, :, f] = self._soften_filter(tensor[:, :, :, f], cfg, dead)
            stream.previous_dead_channels = None

        stream.advance()
        return w.with_data(tensor)

    def _soften_filter(self, kernel: np.ndarray, cfg: AttackConfig, dead: int) -> np.ndarray:
        """Modifica un filtro atacado de una capa cruzada.

        conv_shift rota el eje de canales s posiciones. conv_soft_knockout
        vuelve a dividir el filtro con k = ⌊r·N + ½⌋: se llena por canales desde
        el primer canal activo (dando la vuelta hasta el canal 0) con las N − k
        grandes y después las k pequeñas. Con k = dead·fh·fw las pequeñas ocupan
        justo los canales desactivados y el filtro queda activo; con r = 0 el
        filtro conserva la disposición de los no atacados.
        """
        # kernel: (fh, fw, canales)
        if cfg.kind == 'conv_shift':
            return np.roll(kernel, cfg.s, axis=2)
        fh, fw, channels = kernel.shape
        k = self.small_count(cfg.r, kernel.size)
        small, large = self._split_sorted(kernel.reshape(-1), k)
        flat = np.roll(np.concatenate([large, small]), dead * fh * fw)
        return flat.reshape(channels, fh, fw).transpose(1, 2, 0)

    # ========== ATAQUES DE ESCALA ==========

    def scale_weights(self, w: WeightTensor, factor: float) -> WeightTensor:
        """Encoge o amplía todas las componentes por `factor`."""
        if factor <= 0:
            raise ValueError("El factor de escala debe ser positivo")
        return w.with_data(w.data * factor)

    def variance_swap(self, w: WeightTensor) -> WeightTensor:
        """Reescala a varianza 2/fan_out partiendo de una inicialización He."""
        return self.scale_weights(w, math.sqrt(w.fan_in() / w.fan_out()))

    # ========== RED COMPLETA ==========

    def attack_network(self, net_weights: List[WeightTensor], cfg: AttackConfig) -> List[WeightTensor]:
        """Aplica el ataque capa a capa, en orden de inicialización, con un solo flujo."""
        if not net_weights:
            raise ValueError("La lista de pesos está vacía")

        logger.info(f"Atacando {len(net_weights)} tensores con {cfg}")
        stream = AttackStream(cfg)
        attacked = []

        for w in net_weights:
            if w.layout == 'bias':
                # Los sesgos nunca se modifican
                attacked.append(w)
                continue
            attacked.append(self._attack_one(stream, w, cfg))

        return attacked

    def _attack_one(self, stream: AttackStream, w: WeightTensor, cfg: AttackConfig) -> WeightTensor:
        if cfg.kind == 'scale_weights':
            stream.advance()
            return self.scale_weights(w, cfg.scale_factor)

        if cfg.kind == 'variance_swap':
            stream.advance()
            return self.variance_swap(w)

        if w.rank == 4:
            if not cfg.is_conv:
                raise ValueError(f"El ataque {cfg.kind} no admite tensores convolucionales {w.shape}")
            return self.conv_attack(stream, w, cfg)

        if w.rank != 2:
            raise ValueError(f"Tensor de rango no soportado: {w.shape}")

        if cfg.kind in ('shift', 'conv_shift'):
            return self.shift_fc(stream, w)
        return self.soft_knockout_fc(stream, w)
