import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from models.initializer_spec import InitializerSpec
from models.network import Network
from models.network_spec import NetworkSpec
from models.rng import Rng
from models.weight_tensor import WeightTensor
from services.tensor_service import TensorService

logger = logging.getLogger(__name__)


class InitService:
    """Inicializadores He/Glorot (normales) y convenciones de sesgo.

    La varianza de He es 2/fan_in (desviación sqrt(2/fan_in)). Los ataques son
    invariantes de escala, así que tomar sqrt(2/fan_in) como varianza no cambia
    ningún resultado.
    """

    def __init__(self, tensor_service: Optional[TensorService] = None):
        self.tensor_service = tensor_service or TensorService()
        logger.info("✅ InitService inicializado")

    @staticmethod
    def fans(shape: Sequence[int]) -> Tuple[int, int]:
        """(fan_in, fan_out) para fc [m, n] o conv [fh, fw, canales, filtros]."""
        shape = tuple(int(s) for s in shape)
        if len(shape) == 2:
            rows, cols = shape
            return cols, rows
        if len(shape) == 4:
            fh, fw, channels, filters = shape
            return fh * fw * channels, fh * fw * filters
        raise ValueError(f"Forma no soportada para inicializar: {shape}")

    def init_layer(self, spec: InitializerSpec, shape: Sequence[int], rng: Rng,
                   layer_index: int = 0) -> Tuple[WeightTensor, np.ndarray]:
        """Pesos normales de media cero según el inicializador y sesgo según la política."""
        if not shape:
            raise ValueError("La forma de la capa no puede estar vacía")
        fan_in, fan_out = self.fans(shape)
        if fan_in < 1:
            raise ValueError("fan_in debe ser al menos 1")

        std = float(np.sqrt(spec.variance(fan_in, fan_out)))
        return self._draw(spec, shape, rng, std, layer_index)

    def variance_swap_init(self, spec: InitializerSpec, shape: Sequence[int], rng: Rng,
                           layer_index: int = 0) -> Tuple[WeightTensor, np.ndarray]:
        """Ataque alternativo: varianza 2/fan_out en lugar de 2/fan_in."""
        if not shape:
            raise ValueError("La forma de la capa no puede estar vacía")
        fan_in, fan_out = self.fans(shape)
        if fan_in < 1 or fan_out < 1:
            raise ValueError("fan_in y fan_out deben ser al menos 1")

        std = float(np.sqrt(2.0 / fan_out))
        logger.debug(f"variance_swap: std {np.sqrt(2.0 / fan_in):.4g} -> {std:.4g}")
        return self._draw(spec, shape, rng, std, layer_index)

    def _draw(self, spec: InitializerSpec, shape: Sequence[int], rng: Rng, std: float,
              layer_index: int) -> Tuple[WeightTensor, np.ndarray]:
        shape = tuple(int(s) for s in shape)
        count = int(np.prod(shape))
        data = self.tensor_service.normal_sample(rng, 0.0, std, count)
        weights = WeightTensor(shape=shape, data=data, layer_index=layer_index)

        width = shape[-1] if len(shape) == 4 else shape[0]
        bias = np.full(width, spec.bias_value if spec.bias_policy == 'constant' else 0.0)
        return weights, bias

    def init_network(self, spec: NetworkSpec, rng: Rng) -> Network:
        """Inicializa todas las capas con pesos en orden de capa."""
        weights, biases = [], []
        for index, shape in enumerate(spec.weight_shapes()):
            w, b = self.init_layer(spec.initializer, shape, rng, layer_index=index)
            weights.append(w.to_array())
            biases.append(b)
        logger.debug(f"Red inicializada ({spec.initializer.kind}): {spec.weight_shapes()}")
        return Network(spec, weights, biases)
