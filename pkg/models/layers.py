from typing import Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Dense:
    """Capa totalmente conectada: h = x Wᵀ + b, con W de forma [salida, entrada]."""

    kind = 'dense'

    def __init__(self, weights: np.ndarray, bias: np.ndarray):
        self.weights = np.array(weights, dtype=np.float64)
        self.bias = np.array(bias, dtype=np.float64)
        self._x = None
        self._mask = None
        self._effective = None

    def forward(self, x: np.ndarray, mask: Optional[np.ndarray] = None,
                keep_probability: float = 1.0) -> np.ndarray:
        """`mask` es la máscara por conexión (DropConnect) con escalado invertido."""
        self._x = x
        if mask is None:
            self._mask = None
            self._effective = self.weights
        else:
            self._mask = mask / keep_probability
            self._effective = self.weights * self._mask
        return x @ self._effective.T + self.bias

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Devuelve (dx, dW, db)."""
        d_weights = grad.T @ self._x
        if self._mask is not None:
            d_weights = d_weights * self._mask
        d_bias = grad.sum(axis=0)
        d_input = grad @ self._effective
        return d_input, d_weights, d_bias


class Conv2D:
    """Convolución con relleno 'same' y paso 1 sobre entradas (N, alto, ancho, canales).

    Pesos [fh, fw, canales, filtros]; relleno superior/izquierdo (f − 1)//2.
    """

    kind = 'conv'

    def __init__(self, weights: np.ndarray, bias: np.ndarray):
        self.weights = np.array(weights, dtype=np.float64)
        self.bias = np.array(bias, dtype=np.float64)
        self._windows = None
        self._padded_shape = None
        self._input_shape = None

    def _padding(self):
        fh, fw = self.weights.shape[:2]
        top, left = (fh - 1) // 2, (fw - 1) // 2
        return (top, fh - 1 - top), (left, fw - 1 - left)

    def forward(self, x: np.ndarray, **_) -> np.ndarray:
        fh, fw = self.weights.shape[:2]
        pad_h, pad_w = self._padding()
        padded = np.pad(x, ((0, 0), pad_h, pad_w, (0, 0)))
        # ventanas[n, h, w, c, i, j] = padded[n, h + i, w + j, c]
        self._windows = sliding_window_view(padded, (fh, fw), axis=(1, 2))
        self._padded_shape = padded.shape
        self._input_shape = x.shape
        return np.einsum('nhwcij,ijcf->nhwf', self._windows, self.weights, optimize=True) + self.bias

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        fh, fw = self.weights.shape[:2]
        _, height, width, _ = self._input_shape
        d_weights = np.einsum('nhwcij,nhwf->ijcf', self._windows, grad, optimize=True)
        d_bias = grad.sum(axis=(0, 1, 2))

        d_padded = np.zeros(self._padded_shape)
        for i in range(fh):
            for j in range(fw):
                d_padded[:, i:i + height, j:j + width, :] += grad @ self.weights[i, j].T

        (top, _), (left, _) = self._padding()
        d_input = d_padded[:, top:top + height, left:left + width, :]
        return d_input, d_weights, d_bias


class MaxPool2D:
    """Max-pool de ventana k y paso k; las filas/columnas sobrantes se descartan."""

    kind = 'maxpool'

    def __init__(self, window: int = 2):
        self.window = int(window)
        self._argmax = None
        self._input_shape = None

    def forward(self, x: np.ndarray, **_) -> np.ndarray:
        k = self.window
        n, height, width, channels = x.shape
        out_h, out_w = height // k, width // k
        blocks = (x[:, :out_h * k, :out_w * k, :]
                  .reshape(n, out_h, k, out_w, k, channels)
                  .transpose(0, 1, 3, 5, 2, 4)
                  .reshape(n, out_h, out_w, channels, k * k))
        self._argmax = blocks.argmax(axis=-1)
        self._input_shape = x.shape
        return np.take_along_axis(blocks, self._argmax[..., None], axis=-1)[..., 0]

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, None, None]:
        k = self.window
        n, height, width, channels = self._input_shape
        out_h, out_w = height // k, width // k

        blocks = np.zeros((n, out_h, out_w, channels, k * k))
        np.put_along_axis(blocks, self._argmax[..., None], grad[..., None], axis=-1)
        d_cropped = (blocks.reshape(n, out_h, out_w, channels, k, k)
                     .transpose(0, 1, 4, 2, 5, 3)
                     .reshape(n, out_h * k, out_w * k, channels))

        d_input = np.zeros(self._input_shape)
        d_input[:, :out_h * k, :out_w * k, :] = d_cropped
        return d_input, None, None


class Flatten:
    kind = 'flatten'

    def __init__(self):
        self._input_shape = None

    def forward(self, x: np.ndarray, **_) -> np.ndarray:
        self._input_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, None, None]:
        return grad.reshape(self._input_shape), None, None
