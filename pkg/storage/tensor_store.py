import os
import json
import struct
import logging
from typing import Optional, List, Dict, Any, Tuple

import numpy as np

from models.weight_tensor import WeightTensor
from storage.settings import Settings

logger = logging.getLogger(__name__)

MAGIC = b"MLNT"
VERSION = 1
MANIFEST_NAME = "manifest.json"


class TensorStore:
    """Persistencia de tensores en el contenedor binario MLNT.

    Formato de cada fichero ``.bin``:
      - 4 bytes mágicos ``MLNT``
      - 1 byte de versión
      - 1 byte con el rango
      - la forma, un entero de 64 bits little-endian por dimensión
      - las componentes como float64 IEEE-754 little-endian, en orden por filas

    Los metadatos (índice de capa, disposición, nombre) van en un sidecar JSON
    con el mismo nombre y extensión ``.json``.
    """

    def __init__(self, settings: Optional[Settings] = None):
        self.settings = settings or Settings()
        logger.info("✅ TensorStore inicializado")

    # ========== TENSORES SUELTOS ==========

    @staticmethod
    def sidecar_path(path: str) -> str:
        root, _ = os.path.splitext(path)
        return root + ".json"

    def encode(self, tensor: WeightTensor) -> bytes:
        header = MAGIC + struct.pack("<BB", VERSION, tensor.rank)
        header += struct.pack(f"<{tensor.rank}q", *tensor.shape)
        return header + tensor.data.astype("<f8").tobytes()

    def decode(self, payload: bytes, metadata: Optional[Dict[str, Any]] = None) -> WeightTensor:
        if len(payload) < 6 or payload[:4] != MAGIC:
            raise ValueError("Contenedor inválido: bytes mágicos distintos de 'MLNT'")

        version, rank = struct.unpack_from("<BB", payload, 4)
        if version != VERSION:
            raise ValueError(f"Versión de contenedor no soportada: {version}")

        offset = 6
        if len(payload) < offset + 8 * rank:
            raise ValueError("Contenedor truncado: cabecera de forma incompleta")
        shape = struct.unpack_from(f"<{rank}q", payload, offset)
        offset += 8 * rank

        count = int(np.prod(shape)) if rank else 0
        expected = offset + 8 * count
        if len(payload) != expected:
            raise ValueError(
                f"Contenedor truncado o con bytes de más: se esperaban {expected} bytes y hay {len(payload)}"
            )

        data = np.frombuffer(payload, dtype="<f8", count=count, offset=offset)
        metadata = metadata or {}
        return WeightTensor(
            shape=shape,
            data=data,
            layer_index=metadata.get('layer_index', 0),
            layout=metadata.get('layout'),
            name=metadata.get('name', '')
        )

    def save_tensor(self, tensor: WeightTensor, path: str) -> str:
        """Escribe el tensor y su sidecar JSON."""
        try:
            directory = os.path.dirname(os.path.abspath(path))
            os.makedirs(directory, exist_ok=True)

            with open(path, "wb") as handle:
                handle.write(self.encode(tensor))
            with open(self.sidecar_path(path), "w") as handle:
                json.dump(tensor.metadata(), handle, indent=2)

            logger.debug(f"Tensor {tensor.name} guardado en {path}")
            return path

        except OSError as e:
            logger.error(f"❌ Error al guardar tensor en {path}: {e}")
            raise

    def load_tensor(self, path: str) -> WeightTensor:
        """Lee un tensor (el sidecar es opcional)."""
        try:
            with open(path, "rb") as handle:
                payload = handle.read()

            metadata = {}
            sidecar = self.sidecar_path(path)
            if os.path.exists(sidecar):
                with open(sidecar) as handle:
                    metadata = json.load(handle)

            return self.decode(payload, metadata)

        except OSError as e:
            logger.error(f"❌ Error al leer tensor de {path}: {e}")
            raise

    # ========== CHECKPOINTS ==========

    def save_checkpoint(self, directory: str, tensors: List[WeightTensor],
                        manifest: Dict[str, Any]) -> str:
        """Guarda un tensor por parámetro y un manifiesto JSON con la lista de ficheros."""
        os.makedirs(directory, exist_ok=True)
        entries = []
        for position, tensor in enumerate(tensors):
            file_name = f"{position:03d}_{tensor.name}.bin"
            self.save_tensor(tensor, os.path.join(directory, file_name))
            entries.append({'file': file_name, **tensor.metadata()})

        full_manifest = dict(manifest)
        full_manifest['parameters'] = entries
        with open(os.path.join(directory, MANIFEST_NAME), "w") as handle:
            json.dump(full_manifest, handle, indent=2)

        logger.info(f"✅ Checkpoint con {len(tensors)} tensores guardado en {directory}")
        return directory

    def load_checkpoint(self, directory: str) -> Tuple[List[WeightTensor], Dict[str, Any]]:
        manifest_path = os.path.join(directory, MANIFEST_NAME)
        if not os.path.exists(manifest_path):
            raise ValueError(f"No existe {MANIFEST_NAME} en {directory}")

        with open(manifest_path) as handle:
            manifest = json.load(handle)

        tensors = [self.load_tensor(os.path.join(directory, entry['file']))
                   for entry in manifest.get('parameters', [])]
        logger.info(f"Checkpoint leído de {directory}: {len(tensors)} tensores")
        return tensors, manifest

    def load_any(self, path: str) -> Tuple[List[WeightTensor], Dict[str, Any]]:
        """Acepta un fichero .bin suelto o un directorio de checkpoint."""
        if os.path.isdir(path):
            return self.load_checkpoint(path)
        return [self.load_tensor(path)], {}

    def save_any(self, path: str, tensors: List[WeightTensor], manifest: Dict[str, Any]) -> str:
        if path.endswith(".bin"):
            if len(tensors) != 1:
                raise ValueError("Un fichero .bin solo admite un tensor; use un directorio")
            return self.save_tensor(tensors[0], path)
        return self.save_checkpoint(path, tensors, manifest)

    # ========== CACHÉ DE DATASETS ==========

    def save_dataset(self, directory: str, features: np.ndarray, labels: np.ndarray,
                     metadata: Dict[str, Any]) -> str:
        tensors = [
            WeightTensor.from_array(features, layout='fc', name='features'),
            WeightTensor.from_array(labels.astype(np.float64), layout='bias', name='labels'),
        ]
        return self.save_checkpoint(directory, tensors, {'dataset': metadata})

    def load_dataset(self, directory: str) -> Tuple[np.ndarray, np.ndarray, Dict[str, Any]]:
        tensors, manifest = self.load_checkpoint(directory)
        by_name = {t.name: t for t in tensors}
        features = by_name['features'].to_array()
        labels = by_name['labels'].to_array().astype(np.int64)
        return features, labels, manifest.get('dataset', {})
