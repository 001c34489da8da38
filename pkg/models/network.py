from typing import Dict, Any, List, Optional, Tuple

import numpy as np
from scipy.special import logsumexp, softmax

from models.layers import Dense, Conv2D, MaxPool2D, Flatten
from models.network_spec import NetworkSpec
from models.rng import Rng
from models.weight_tensor import WeightTensor


class Network:
    """Red neuronal con sus parámetros (pesos + sesgos) y la pasada hacia delante/atrás.

    ReLU sigue a cada capa con pesos salvo la última; la salida son logits que
    se convierten en probabilidades con softmax.
    """

    def __init__(self, spec: NetworkSpec, weights: List[np.ndarray], biases: List[np.ndarray]):
        self.spec = spec
        expected = spec.weight_shapes()
        if len(weights) != len(expected) or len(biases) != len(expected):
            raise ValueError(f"Se esperaban {len(expected)} tensores de pesos y sesgos")

        self.layers = []
        self.weighted = []
        position = 0
        for layer_spec in spec.layers:
            if layer_spec.kind in ('dense', 'conv'):
                w = np.asarray(weights[position], dtype=np.float64)
                b = np.asarray(biases[position], dtype=np.float64).reshape(-1)
                if w.shape != expected[position]:
                    raise ValueError(f"Pesos de la capa {position}: forma {w.shape}, se esperaba {expected[position]}")
                if b.size != expected[position][0 if layer_spec.kind == 'dense' else -1]:
                    raise ValueError(f"Sesgo de la capa {position} con tamaño incorrecto")
                layer = Dense(w, b) if layer_spec.kind == 'dense' else Conv2D(w, b)
                self.weighted.append(layer)
                position += 1
            elif layer_spec.kind == 'maxpool':
                layer = MaxPool2D(layer_spec.window)
            else:
                layer = Flatten()
            self.layers.append(layer)

        self._relu_masks = []

    # ========== PARÁMETROS ==========

    @property
    def depth(self) -> int:
        """Número de capas con pesos."""
        return len(self.weighted)

    def parameters(self) -> List[np.ndarray]:
        """[W0, b0, W1, b1, ...] (referencias vivas, el optimizador las modifica)."""
        params = []
        for layer in self.weighted:
            params.extend([layer.weights, layer.bias])
        return params

    def weight_tensors(self) -> List[WeightTensor]:
        return [WeightTensor.from_array(layer.weights, layer_index=i, name=f"w{i}")
                for i, layer in enumerate(self.weighted)]

    def bias_tensors(self) -> List[WeightTensor]:
        return [WeightTensor.from_array(layer.bias, layer_index=i, layout='bias', name=f"b{i}")
                for i, layer in enumerate(self.weighted)]

    def set_weights(self, tensors: List[WeightTensor]):
        """Sustituye los pesos (no los sesgos) por tensores de la misma forma."""
        if len(tensors) != self.depth:
            raise ValueError(f"Se esperaban {self.depth} tensores de pesos, se recibieron {len(tensors)}")
        for layer, tensor in zip(self.weighted, tensors):
            if tuple(layer.weights.shape) != tensor.shape:
                raise ValueError(f"Forma {tensor.shape} incompatible con {layer.weights.shape}")
            layer.weights[...] = tensor.to_array()

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.parameters())

    def copy(self) -> 'Network':
        return Network(self.spec,
                       [layer.weights.copy() for layer in self.weighted],
                       [layer.bias.copy() for layer in self.weighted])

    # ========== PASADA HACIA DELANTE ==========

    def _check_input(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == len(self.spec.input_shape):
            x = x[None, ...]
        if tuple(x.shape[1:]) != self.spec.input_shape:
            raise ValueError(f"Entrada de forma {x.shape[1:]}, se esperaba {self.spec.input_shape}")
        return x

    def logits(self, x: np.ndarray, training: bool = False, rng: Optional[Rng] = None,
               trace: Optional[List[np.ndarray]] = None) -> np.ndarray:
        """Salida de la última capa antes de softmax.

        Con training=True y dropout_rate > 0 se aplica una máscara por conexión
        a cada capa densa (una máscara por lote). `trace` recibe la salida
        post-ReLU de cada capa oculta con pesos.
        """
        x = self._check_input(x)
        rate = self.spec.dropout_rate
        drop = training and rate > 0.0
        if drop and rng is None:
            raise ValueError("El dropout necesita un generador")

        self._relu_masks = []
        last = self.weighted[-1]
        h = x
        for layer in self.layers:
            if drop and layer.kind == 'dense':
                mask = rng.bernoulli_mask(1.0 - rate, layer.weights.shape)
                h = layer.forward(h, mask=mask, keep_probability=1.0 - rate)
            else:
                h = layer.forward(h)

            if layer.kind in ('dense', 'conv') and layer is not last:
                active = h > 0
                self._relu_masks.append(active)
                h = h * active
                if trace is not None:
                    trace.append(h)
            elif layer.kind in ('dense', 'conv'):
                self._relu_masks.append(None)
        return h

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Probabilidades de clase (cada fila suma 1)."""
        return softmax(self.logits(x), axis=1)

    def hidden_activations(self, x: np.ndarray) -> List[np.ndarray]:
        """Salidas post-ReLU de cada capa oculta con pesos."""
        trace = []
        self.logits(x, trace=trace)
        return trace

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.logits(x).argmax(axis=1)

    # ========== PASADA HACIA ATRÁS ==========

    def loss(self, x: np.ndarray, labels: np.ndarray) -> float:
        return self.cross_entropy(self.logits(x), labels)

    def cross_entropy(self, logits: np.ndarray, labels: np.ndarray) -> float:
        """Entropía cruzada media de unos logits ya calculados."""
        labels = self._check_labels(labels, logits.shape[0])
        log_probs = logits - logsumexp(logits, axis=1, keepdims=True)
        return float(-log_probs[np.arange(labels.size), labels].mean())

    def _check_labels(self, labels: np.ndarray, count: int) -> np.ndarray:
        labels = np.asarray(labels).astype(np.int64).reshape(-1)
        if labels.size != count:
            raise ValueError(f"{labels.size} etiquetas para {count} muestras")
        if labels.size and (labels.min() < 0 or labels.max() >= self.spec.classes):
            raise ValueError(f"Etiqueta fuera de rango [0, {self.spec.classes})")
        return labels

    def backward(self, x: np.ndarray, labels: np.ndarray, training: bool = False,
                 rng: Optional[Rng] = None) -> Tuple[float, List[np.ndarray]]:
        """Pérdida de entropía cruzada media y su gradiente para cada parámetro."""
        logits = self.logits(x, training=training, rng=rng)
        labels = self._check_labels(labels, logits.shape[0])
        count = labels.size

        log_probs = logits - logsumexp(logits, axis=1, keepdims=True)
        loss = float(-log_probs[np.arange(count), labels].mean())

        # (probabilidades − one-hot) / tamaño del lote
        grad = np.exp(log_probs)
        grad[np.arange(count), labels] -= 1.0
        grad /= count
        return loss, self.backward_from_output(grad)

    def backward_from_output(self, grad: np.ndarray) -> List[np.ndarray]:
        """Propaga un gradiente dado respecto a los logits de la última pasada."""
        grads = []
        relu = list(self._relu_masks)
        for layer in reversed(self.layers):
            if layer.kind in ('dense', 'conv'):
                active = relu.pop()
                if active is not None:
                    grad = grad * active
                grad, d_weights, d_bias = layer.backward(grad)
                grads.extend([d_bias, d_weights])
            else:
                grad, _, _ = layer.backward(grad)
        grads.reverse()
        return grads

    # ========== SERIALIZACIÓN ==========

    def to_tensors(self) -> List[WeightTensor]:
        """Pesos y sesgos intercalados en orden de capa."""
        tensors = []
        for w, b in zip(self.weight_tensors(), self.bias_tensors()):
            tensors.extend([w, b])
        return tensors

    @classmethod
    def from_tensors(cls, spec: NetworkSpec, tensors: List[WeightTensor]) -> 'Network':
        weights = [t.to_array() for t in tensors if t.layout != 'bias']
        biases = [t.to_array() for t in tensors if t.layout == 'bias']
        return cls(spec, weights, biases)

    def manifest(self) -> Dict[str, Any]:
        return {'spec': self.spec.to_dict()}

    def __repr__(self) -> str:
        return f"Network({self.spec!r})"
