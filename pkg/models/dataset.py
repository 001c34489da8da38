from typing import Dict, Any, Optional, Sequence

import numpy as np


class Dataset:
    """Conjunto de datos normalizado a [0, 1] con su partición entrenamiento/prueba."""

    def __init__(
        self,
        features: np.ndarray,
        labels: Sequence[int],
        train_indices: Sequence[int],
        test_indices: Sequence[int],
        name: str = "dataset",
        classes: Optional[int] = None
    ):
        self.features = np.asarray(features, dtype=np.float64)
        self.labels = np.asarray(labels).astype(np.int64).reshape(-1)
        self.train_indices = np.asarray(train_indices, dtype=np.int64)
        self.test_indices = np.asarray(test_indices, dtype=np.int64)
        self.name = name
        self.classes = int(classes) if classes is not None else int(self.labels.max()) + 1

        self._validate()

    def _validate(self):
        if self.features.ndim < 2 or self.features.shape[0] == 0:
            raise ValueError("El dataset necesita al menos una muestra con características")

        if self.labels.size != self.features.shape[0]:
            raise ValueError(
                f"{self.labels.size} etiquetas para {self.features.shape[0]} muestras"
            )

        if not np.all(np.isfinite(self.features)):
            raise ValueError("Las características contienen valores no finitos")

        if self.features.min() < 0.0 or self.features.max() > 1.0:
            raise ValueError("Las características deben estar normalizadas en [0, 1]")

        if self.classes < 2:
            raise ValueError("Se necesitan al menos dos clases")

        if self.labels.min() < 0 or self.labels.max() >= self.classes:
            raise ValueError(f"Etiquetas fuera de [0, {self.classes})")

        if self.train_indices.size == 0 or self.test_indices.size == 0:
            raise ValueError("Las particiones de entrenamiento y prueba no pueden estar vacías")

        if np.intersect1d(self.train_indices, self.test_indices).size:
            raise ValueError("Las particiones de entrenamiento y prueba se solapan")

    @property
    def sample_shape(self):
        return tuple(self.features.shape[1:])

    @property
    def train_x(self) -> np.ndarray:
        return self.features[self.train_indices]

    @property
    def train_y(self) -> np.ndarray:
        return self.labels[self.train_indices]

    @property
    def test_x(self) -> np.ndarray:
        return self.features[self.test_indices]

    @property
    def test_y(self) -> np.ndarray:
        return self.labels[self.test_indices]

    @property
    def random_guess_accuracy(self) -> float:
        return 1.0 / self.classes

    def flattened(self) -> 'Dataset':
        """Misma partición con cada muestra aplanada a un vector."""
        return Dataset(self.features.reshape(self.features.shape[0], -1), self.labels,
                       self.train_indices, self.test_indices, self.name, self.classes)

    def metadata(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'classes': self.classes,
            'samples': int(self.features.shape[0]),
            'sample_shape': list(self.sample_shape),
            'train': int(self.train_indices.size),
            'test': int(self.test_indices.size),
            'random_guess_accuracy': self.random_guess_accuracy,
        }

    def __repr__(self) -> str:
        return (f"Dataset(name='{self.name}', samples={self.features.shape[0]}, "
                f"shape={self.sample_shape}, classes={self.classes})")
