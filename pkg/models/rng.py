from typing import List, Optional, Sequence

import numpy as np


class Rng:
    """Generador pseudoaleatorio reproducible.

    Algoritmo fijo: PCG64 de numpy sembrado con ``SeedSequence(seed)``. Es
    independiente de la plataforma y del número de hilos. Los generadores hijos
    se derivan con ``SeedSequence.spawn``: el hijo i de una semilla es siempre
    el mismo, se pida cuando se pida.
    """

    def __init__(self, seed: int = 0, seed_sequence: Optional[np.random.SeedSequence] = None):
        if seed_sequence is None:
            if int(seed) < 0 or int(seed) >= 2 ** 64:
                raise ValueError("La semilla debe ser un entero de 64 bits sin signo")
            seed_sequence = np.random.SeedSequence(int(seed))
        self.seed = int(seed_sequence.entropy) if seed_sequence.entropy is not None else int(seed)
        self._sequence = seed_sequence
        self._generator = np.random.Generator(np.random.PCG64(seed_sequence))

    @property
    def generator(self) -> np.random.Generator:
        return self._generator

    def spawn(self, count: int) -> List['Rng']:
        """Crea `count` generadores hijos independientes."""
        if count < 1:
            raise ValueError("Se necesita al menos un generador hijo")
        return [Rng(seed_sequence=child) for child in self._sequence.spawn(count)]

    @staticmethod
    def child(seed: int, index: int) -> 'Rng':
        """Hijo `index` de `seed` sin consumir estado (regla de división estable)."""
        return Rng(seed_sequence=np.random.SeedSequence(int(seed), spawn_key=(int(index),)))

    def normal(self, mean: float, std: float, count) -> np.ndarray:
        return self._generator.normal(mean, std, size=count)

    def uniform(self, low: float, high: float, size) -> np.ndarray:
        return self._generator.uniform(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._generator.permutation(n)

    def shuffle_in_place(self, values: np.ndarray):
        self._generator.shuffle(values)

    def integers(self, low: int, high: int, size=None):
        return self._generator.integers(low, high, size=size)

    def bernoulli_mask(self, keep_probability: float, shape: Sequence[int]) -> np.ndarray:
        return self._generator.random(size=tuple(shape)) < keep_probability

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed})"
