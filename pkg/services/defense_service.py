import os
import json
import logging
from typing import Dict, List, Optional

import numpy as np

from models.detection_report import DetectionReport
from models.network import Network
from models.rng import Rng
from models.weight_tensor import WeightTensor
from services.tensor_service import TensorService
from validators.block_structure_validator import BlockStructureValidator

logger = logging.getLogger(__name__)


class DefenseService:
    """Defensas: mapas de calor de pesos, filtros sin activación, detector y rebarajado."""

    REPORT_NAME = "report.json"

    def __init__(self, validator: Optional[BlockStructureValidator] = None,
                 tensor_service: Optional[TensorService] = None):
        self.validator = validator or BlockStructureValidator()
        self.tensor_service = tensor_service or TensorService()
        logger.info("✅ DefenseService inicializado")

    # ========== VISUALIZACIÓN ==========

    @staticmethod
    def heatmap_pixels(w: WeightTensor) -> np.ndarray:
        """[−max|w|, +max|w|] → [0, 255]; una matriz nula queda en gris 128."""
        if w.layout == 'bias':
            raise ValueError("El mapa de calor necesita una matriz, no un sesgo")
        matrix = w.as_matrix()
        peak = float(np.abs(matrix).max())
        if peak == 0.0:
            return np.full(matrix.shape, 128, dtype=np.uint8)
        pixels = np.floor(127.5 + 127.5 * matrix / peak + 0.5)
        return np.clip(pixels, 0, 255).astype(np.uint8)

    def weight_heatmap(self, w: WeightTensor, path: str) -> str:
        """Escribe la matriz como PGM binario (P5) en escala de grises."""
        pixels = self.heatmap_pixels(w)
        rows, cols = pixels.shape
        try:
            directory = os.path.dirname(path)
            if directory:
                os.makedirs(directory, exist_ok=True)
            with open(path, "wb") as handle:
                handle.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
                handle.write(pixels.tobytes())
        except OSError as e:
            logger.error(f"❌ No se pudo escribir el mapa de calor {path}: {e}")
            raise
        logger.debug(f"Mapa de calor {rows}×{cols} en {path}")
        return path

    # ========== FILTROS SIN ACTIVACIÓN ==========

    def filter_activation_report(self, net: Network, probe: np.ndarray) -> Dict[int, np.ndarray]:
        """Por capa convolucional: True en los canales con salida nula para todo el sondeo."""
        conv_positions = [i for i, layer in enumerate(net.weighted[:-1]) if layer.kind == 'conv']
        if not conv_positions:
            raise ValueError("La red no tiene capas convolucionales")

        outputs = net.hidden_activations(probe)
        report = {}
        for position in conv_positions:
            out = outputs[position]
            report[position] = ~(out > 0).any(axis=(0, 1, 2))
            logger.info(f"Capa conv {position}: {int(report[position].sum())}/{out.shape[-1]} canales sin salida")
        return report

    # ========== REMEDIO ==========

    def reshuffle_tensors(self, tensors: List[WeightTensor], seed: int) -> List[WeightTensor]:
        """Permuta uniformemente cada tensor de pesos; los sesgos se devuelven tal cual."""
        result, position = [], 0
        for w in tensors:
            if w.layout == 'bias':
                result.append(w)
                continue
            result.append(self.tensor_service.shuffle(w, Rng.child(seed, position)))
            position += 1
        return result

    def reshuffle_weights(self, net: Network, seed: int) -> Network:
        shuffled = self.reshuffle_tensors(net.weight_tensors(), seed)
        result = net.copy()
        result.set_weights(shuffled)
        logger.info(f"Pesos rebarajados con semilla {seed}")
        return result

    # ========== DETECCIÓN ==========

    def detect_tensors(self, tensors: List[WeightTensor], output_dir: Optional[str] = None,
                       net: Optional[Network] = None, probe: Optional[np.ndarray] = None) -> DetectionReport:
        """Prueba de bloques por tensor de pesos y, si hay red y sondeo, filtros sin salida.

        Con `output_dir` se escriben report.json y un PGM por capa.
        """
        report = DetectionReport(alpha=self.validator.alpha)

        for w in tensors:
            if w.layout == 'bias':
                continue
            try:
                details = self.validator.analyze(w)
            except ValueError as e:
                logger.warning(f"⚠️ {w.name}: {e}")
                report.add_layer(w.name, list(w.shape), 1.0, {'note': str(e)})
                continue

            entry = {'p_rows': details['p_rows'], 'p_cols': details['p_cols']}
            if output_dir:
                entry['heatmap'] = os.path.basename(
                    self.weight_heatmap(w, os.path.join(output_dir, f"{w.name}.pgm"))
                )
            report.add_layer(w.name, list(w.shape), details['p_value'], entry)

        if net is not None and probe is not None and net.spec.is_conv:
            flags = self.filter_activation_report(net, probe)
            for position, dead in flags.items():
                report.layers[position]['dead_channels'] = np.flatnonzero(dead).tolist()

        if output_dir:
            self._write_report(report, output_dir)

        logger.info(f"Detección: {report!r}")
        return report

    def detect_network(self, net: Network, output_dir: Optional[str] = None,
                       probe: Optional[np.ndarray] = None) -> DetectionReport:
        return self.detect_tensors(net.weight_tensors(), output_dir, net=net, probe=probe)

    def _write_report(self, report: DetectionReport, output_dir: str):
        os.makedirs(output_dir, exist_ok=True)
        path = os.path.join(output_dir, self.REPORT_NAME)
        with open(path, "w") as handle:
            json.dump(report.to_dict(), handle, indent=2)
        logger.info(f"✅ Informe escrito en {path}")
