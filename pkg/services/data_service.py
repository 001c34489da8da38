import os
import csv
import gzip
import math
import logging
from typing import List, Optional, Tuple, Union

import numpy as np

from models.dataset import Dataset
from models.rng import Rng
from storage.tensor_store import TensorStore

logger = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class DataService:
    """Generación y carga de datasets normalizados a [0, 1]."""

    def __init__(self, store: Optional[TensorStore] = None):
        self.store = store or TensorStore()
        logger.info("✅ DataService inicializado")

    # ========== UTILIDADES ==========

    @staticmethod
    def normalize(features: np.ndarray) -> np.ndarray:
        """Min-max por característica; una característica constante queda en 0."""
        features = np.asarray(features, dtype=np.float64)
        low = features.min(axis=0)
        span = features.max(axis=0) - low
        safe = np.where(span > 0, span, 1.0)
        return np.where(span > 0, (features - low) / safe, 0.0)

    @staticmethod
    def split_indices(count: int, test_fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
        """Partición barajada determinista (misma semilla, misma partición)."""
        if count < 2:
            raise ValueError(f"Con {count} muestra(s) no es posible separar entrenamiento y prueba")
        if not 0.0 < test_fraction < 1.0:
            raise ValueError("La fracción de prueba debe estar en (0, 1)")

        order = Rng(seed).permutation(count)
        test_count = min(count - 1, max(1, int(round(count * test_fraction))))
        return np.sort(order[test_count:]), np.sort(order[:test_count])

    # ========== DATOS SINTÉTICOS ==========

    def gaussian_blobs(self, classes: int, d: int, per_class: int, separation: float,
                       seed: int = 0, test_fraction: float = 0.25) -> Dataset:
        """Nubes gaussianas isótropas (σ = 1) con centros a distancia `separation`.

        Con d ≥ classes los centros son los vértices de un símplice escalado;
        si no, un polígono regular en las dos primeras coordenadas.
        """
        if classes < 2 or d < 2:
            raise ValueError("Se necesitan al menos 2 clases y 2 dimensiones")
        if per_class < 1:
            raise ValueError("per_class debe ser al menos 1")
        if separation < 0:
            raise ValueError("La separación no puede ser negativa")

        centers = np.zeros((classes, d))
        if d >= classes:
            centers[np.arange(classes), np.arange(classes)] = separation / math.sqrt(2.0)
        else:
            radius = separation / (2.0 * math.sin(math.pi / classes))
            angles = 2.0 * math.pi * np.arange(classes) / classes
            centers[:, 0], centers[:, 1] = radius * np.cos(angles), radius * np.sin(angles)

        rng = Rng(seed)
        labels = np.repeat(np.arange(classes), per_class)
        features = centers[labels] + rng.normal(0.0, 1.0, (labels.size, d))

        train, test = self.split_indices(labels.size, test_fraction, seed)
        logger.info(f"Blobs: {classes} clases, d={d}, {labels.size} muestras, separación {separation}")
        return Dataset(self.normalize(features), labels, train, test,
                       name=f"blobs-{classes}x{d}", classes=classes)

    # ========== CSV ==========

    def load_csv(self, path: str, label_column: Union[int, str] = -1, split_fraction: float = 0.25,
                 seed: int = 0, header: bool = False) -> Dataset:
        """Carga un CSV numérico; la columna de etiquetas se recodifica a 0..K−1."""
        try:
            with open(path, newline="") as handle:
                rows = [row for row in csv.reader(handle) if row and any(cell.strip() for cell in row)]
        except OSError as e:
            logger.error(f"❌ No se pudo leer {path}: {e}")
            raise

        first_line = 1
        names: List[str] = []
        if header and rows:
            names = [cell.strip() for cell in rows[0]]
            rows = rows[1:]
            first_line = 2

        if not rows:
            raise ValueError(f"{path} no contiene filas de datos")

        width = len(rows[0])
        if width < 2:
            raise ValueError(f"{path} necesita al menos una característica y una etiqueta")

        column = self._label_index(label_column, names, width)
        values = np.empty((len(rows), width))
        for i, row in enumerate(rows):
            line = i + first_line
            if len(row) != width:
                raise ValueError(f"{path}: la fila {line} tiene {len(row)} columnas, se esperaban {width}")
            for j, cell in enumerate(row):
                text = cell.strip()
                if not text or text.lower() in ('nan', 'na', '?'):
                    raise ValueError(f"{path}: valor ausente en fila {line}, columna {j + 1}")
                try:
                    values[i, j] = float(text)
                except ValueError:
                    raise ValueError(f"{path}: valor no numérico '{text}' en fila {line}, columna {j + 1}")

        raw_labels = values[:, column]
        if not np.all(raw_labels == np.round(raw_labels)):
            raise ValueError(f"{path}: la columna de etiquetas debe ser entera")
        classes, labels = np.unique(raw_labels.astype(np.int64), return_inverse=True)
        if classes.size < 2:
            raise ValueError(f"{path}: la columna de etiquetas tiene una sola clase")

        features = self.normalize(np.delete(values, column, axis=1))
        train, test = self.split_indices(len(rows), split_fraction, seed)
        logger.info(f"CSV {path}: {features.shape[0]} filas, {features.shape[1]} características")
        return Dataset(features, labels, train, test,
                       name=os.path.splitext(os.path.basename(path))[0], classes=classes.size)

    @staticmethod
    def _label_index(label_column: Union[int, str], names: List[str], width: int) -> int:
        if isinstance(label_column, str) and not label_column.lstrip('-').isdigit():
            if label_column not in names:
                raise ValueError(f"No existe la columna de etiquetas '{label_column}'")
            return names.index(label_column)
        index = int(label_column)
        if not -width <= index < width:
            raise ValueError(f"Columna de etiquetas {index} fuera de rango")
        return index % width

    # ========== IDX ==========

    @staticmethod
    def _read_bytes(path: str) -> bytes:
        opener = gzip.open if path.endswith(".gz") else open
        with opener(path, "rb") as handle:
            return handle.read()

    def _idx_payload(self, path: str, magic: int, dims: int) -> Tuple[Tuple[int, ...], np.ndarray]:
        payload = self._read_bytes(path)
        header_size = 4 + 4 * dims
        if len(payload) < header_size:
            raise ValueError(f"{path}: fichero truncado ({len(payload)} bytes, cabecera de {header_size})")

        header = np.frombuffer(payload, dtype='>u4', count=1 + dims)
        if int(header[0]) != magic:
            raise ValueError(f"{path}: número mágico 0x{int(header[0]):08x}, se esperaba 0x{magic:08x}")

        shape = tuple(int(v) for v in header[1:])
        expected = header_size + int(np.prod(shape))
        if len(payload) < expected:
            raise ValueError(f"{path}: fichero truncado ({len(payload)} bytes, se esperaban {expected})")
        return shape, np.frombuffer(payload, dtype=np.uint8, count=int(np.prod(shape)), offset=header_size)

    def read_idx(self, images_path: str, labels_path: str, flatten: bool = True) -> Tuple[np.ndarray, np.ndarray]:
        """(píxeles en [0, 1], etiquetas) de un par de ficheros IDX."""
        shape, pixels = self._idx_payload(images_path, IDX_IMAGES_MAGIC, 3)
        (count,), labels = self._idx_payload(labels_path, IDX_LABELS_MAGIC, 1)
        if count != shape[0]:
            raise ValueError(f"{count} etiquetas para {shape[0]} imágenes")

        images = pixels.astype(np.float64) / 255.0
        if flatten:
            images = images.reshape(shape[0], shape[1] * shape[2])
        else:
            images = images.reshape(shape[0], shape[1], shape[2], 1)
        return images, labels.astype(np.int64)

    def load_idx(self, images_path: str, labels_path: str, split: float = 1.0 / 7.0,
                 seed: int = 0, flatten: bool = True) -> Dataset:
        images, labels = self.read_idx(images_path, labels_path, flatten)
        train, test = self.split_indices(labels.size, split, seed)
        logger.info(f"IDX {images_path}: {images.shape}")
        return Dataset(images, labels, train, test, name="idx", classes=int(labels.max()) + 1)

    def load_mnist_dir(self, directory: str, flatten: bool = True, limit: Optional[int] = None) -> Dataset:
        """Ficheros estándar de MNIST: la partición es la de los propios ficheros."""
        def find(stem: str) -> str:
            for candidate in (stem, stem + ".gz"):
                path = os.path.join(directory, candidate)
                if os.path.exists(path):
                    return path
            raise ValueError(f"No se encuentra {stem} en {directory}")

        train_x, train_y = self.read_idx(find("train-images-idx3-ubyte"), find("train-labels-idx1-ubyte"), flatten)
        test_x, test_y = self.read_idx(find("t10k-images-idx3-ubyte"), find("t10k-labels-idx1-ubyte"), flatten)
        if limit is not None:
            train_x, train_y = train_x[:limit], train_y[:limit]

        features = np.concatenate([train_x, test_x])
        labels = np.concatenate([train_y, test_y])
        train = np.arange(train_y.size)
        test = np.arange(train_y.size, labels.size)
        return Dataset(features, labels, train, test, name="mnist", classes=10)

    # ========== CACHÉ ==========

    def save_cache(self, dataset: Dataset, directory: str) -> str:
        metadata = dataset.metadata()
        metadata['train_indices'] = dataset.train_indices.tolist()
        metadata['test_indices'] = dataset.test_indices.tolist()
        return self.store.save_dataset(directory, dataset.features, dataset.labels, metadata)

    def load_cache(self, directory: str) -> Dataset:
        features, labels, metadata = self.store.load_dataset(directory)
        shape = metadata.get('sample_shape')
        if shape:
            features = features.reshape((features.shape[0],) + tuple(shape))
        return Dataset(features, labels, metadata['train_indices'], metadata['test_indices'],
                       name=metadata.get('name', 'cache'), classes=metadata.get('classes'))
