from typing import Optional, Dict, Any, Sequence

import numpy as np


class WeightTensor:
    """Clase que representa un tensor denso de pesos (fc, conv o sesgo)."""

    # Disposiciones válidas
    #   fc:   [filas m, columnas n]
    #   conv: [alto filtro, ancho filtro, canales, filtros]
    #   bias: [ancho]
    LAYOUTS = ['fc', 'conv', 'bias']

    def __init__(
        self,
        shape: Sequence[int] = (),
        data: Optional[Sequence[float]] = None,
        layer_index: int = 0,
        layout: Optional[str] = None,
        name: str = ""
    ):
        self.shape = tuple(int(s) for s in shape)
        values = np.asarray(data if data is not None else [], dtype=np.float64)
        # Copia propia en orden por filas; el tensor es inmutable tras construirse
        self._data = np.array(values.reshape(-1), dtype=np.float64, copy=True)
        self._data.setflags(write=False)
        self.layer_index = int(layer_index)
        self.layout = layout or self._default_layout()
        self.name = name or f"w{self.layer_index}"

        self._validate()

    def _default_layout(self) -> str:
        if len(self.shape) == 4:
            return 'conv'
        if len(self.shape) == 1:
            return 'bias'
        return 'fc'

    def _validate(self):
        """Valida los datos del tensor."""
        if not self.shape:
            raise ValueError("La forma del tensor no puede estar vacía")

        if any(s <= 0 for s in self.shape):
            raise ValueError(f"Todas las dimensiones deben ser positivas: {self.shape}")

        if int(np.prod(self.shape)) != self._data.size:
            raise ValueError(
                f"El producto de la forma {self.shape} no coincide con {self._data.size} componentes"
            )

        if not np.all(np.isfinite(self._data)):
            raise ValueError("El tensor contiene valores no finitos (NaN/Inf)")

        if self.layer_index < 0:
            raise ValueError("El índice de capa no puede ser negativo")

        if self.layout not in self.LAYOUTS:
            raise ValueError(f"Disposición inválida. Debe ser: {', '.join(self.LAYOUTS)}")

    @classmethod
    def from_array(cls, array: np.ndarray, layer_index: int = 0,
                   layout: Optional[str] = None, name: str = "") -> 'WeightTensor':
        array = np.asarray(array, dtype=np.float64)
        return cls(shape=array.shape, data=array.reshape(-1), layer_index=layer_index,
                   layout=layout, name=name)

    @property
    def data(self) -> np.ndarray:
        """Componentes en orden por filas (vista de solo lectura)."""
        return self._data

    @property
    def rank(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return self._data.size

    def to_array(self) -> np.ndarray:
        """Copia editable con la forma del tensor."""
        return self._data.reshape(self.shape).copy()

    def with_data(self, data: np.ndarray) -> 'WeightTensor':
        """Nuevo tensor con los mismos metadatos y otros datos."""
        return WeightTensor(shape=self.shape, data=np.asarray(data).reshape(-1),
                            layer_index=self.layer_index, layout=self.layout, name=self.name)

    def fan_in(self) -> int:
        if self.layout == 'conv':
            fh, fw, channels, _ = self.shape
            return fh * fw * channels
        if self.layout == 'fc':
            return self.shape[1]
        return self.shape[0]

    def fan_out(self) -> int:
        if self.layout == 'conv':
            fh, fw, _, filters = self.shape
            return fh * fw * filters
        return self.shape[0]

    def as_matrix(self) -> np.ndarray:
        """Vista 2-D: fc tal cual, conv aplanado por filtros (una fila por filtro)."""
        if self.layout == 'conv':
            fh, fw, channels, filters = self.shape
            return self.to_array().transpose(3, 0, 1, 2).reshape(filters, fh * fw * channels)
        if self.layout == 'bias':
            return self.to_array().reshape(1, -1)
        return self.to_array()

    def metadata(self) -> Dict[str, Any]:
        return {
            'shape': list(self.shape),
            'layer_index': self.layer_index,
            'layout': self.layout,
            'name': self.name,
        }

    def to_dict(self) -> Dict[str, Any]:
        """Convierte el tensor a diccionario."""
        meta = self.metadata()
        meta['data'] = self._data.tolist()
        return meta

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'WeightTensor':
        """Crea un WeightTensor desde un diccionario."""
        return cls(
            shape=data.get('shape', ()),
            data=data.get('data', []),
            layer_index=data.get('layer_index', 0),
            layout=data.get('layout'),
            name=data.get('name', '')
        )

    def same_multiset(self, other: 'WeightTensor') -> bool:
        """Comprueba que ambos tensores tienen exactamente las mismas componentes."""
        return bool(np.array_equal(np.sort(self._data), np.sort(other.data)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WeightTensor):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self._data, other.data)

    def __hash__(self):
        return hash((self.shape, self._data.tobytes()))

    def __repr__(self) -> str:
        return f"WeightTensor(name='{self.name}', shape={self.shape}, layout='{self.layout}')"

    def __str__(self) -> str:
        return (f"{self.name} {list(self.shape)} [{self.layout}] "
                f"media={self._data.mean():.4g} var={self._data.var():.4g}")
