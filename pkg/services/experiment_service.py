import os
import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import gaussian_kde, norm

from models.dataset import Dataset
from models.experiment import ExperimentConfig, ExperimentRecord, TrainingTrace
from models.initializer_spec import InitializerSpec
from models.network import Network
from models.network_spec import NetworkSpec
from models.rng import Rng
from services.attack_service import AttackService
from services.data_service import DataService
from services.init_service import InitService
from services.training_service import TrainingService, TrainingDivergedError

logger = logging.getLogger(__name__)


class ExperimentService:
    """Protocolo de muchas semillas: línea base frente a ataque con las mismas semillas."""

    RECORDS_FILE = "records.csv"
    KDE_FILE = "kde_accuracy.csv"
    HIST_FILE = "hist_epoch.csv"
    CURVES_FILE = "loss_curves.csv"
    MANIFEST_FILE = "manifest.json"
    COMPARISON_FILE = "comparison.csv"
    SEEDS_DIR = "seeds"

    def __init__(
        self,
        data_service: Optional[DataService] = None,
        init_service: Optional[InitService] = None,
        attack_service: Optional[AttackService] = None,
        training_service: Optional[TrainingService] = None
    ):
        self.data_service = data_service or DataService()
        self.init_service = init_service or InitService()
        self.attack_service = attack_service or AttackService()
        self.training_service = training_service or TrainingService()
        logger.info("✅ ExperimentService inicializado")

    # ========== RESOLUCIÓN DE REFERENCIAS ==========

    def load_dataset(self, ref: Dict[str, Any]) -> Dataset:
        kind = ref.get('kind')
        if kind == 'blobs':
            return self.data_service.gaussian_blobs(
                classes=int(ref.get('classes', 4)), d=int(ref.get('features', 20)),
                per_class=int(ref.get('per_class', 250)), separation=float(ref.get('separation', 6.0)),
                seed=int(ref.get('seed', 0)), test_fraction=float(ref.get('test_fraction', 0.25)))
        if kind == 'csv':
            return self.data_service.load_csv(
                ref['path'], label_column=ref.get('label_column', -1),
                split_fraction=float(ref.get('test_fraction', 0.25)), seed=int(ref.get('seed', 0)),
                header=bool(ref.get('header', False)))
        if kind == 'idx':
            flatten = bool(ref.get('flatten', True))
            if ref.get('directory'):
                return self.data_service.load_mnist_dir(ref['directory'], flatten=flatten,
                                                        limit=ref.get('limit'))
            return self.data_service.load_idx(ref['images'], ref['labels'],
                                              split=float(ref.get('test_fraction', 1.0 / 7.0)),
                                              seed=int(ref.get('seed', 0)), flatten=flatten)
        if kind == 'cache':
            return self.data_service.load_cache(ref['path'])
        raise ValueError(f"Tipo de dataset desconocido: {kind}")

    def build_spec(self, ref: Dict[str, Any], dataset: Dataset) -> NetworkSpec:
        """Arquitectura a partir de la referencia y de la forma de las muestras."""
        initializer = InitializerSpec.from_dict(ref.get('initializer', {}))
        dropout = float(ref.get('dropout_rate', 0.0))
        architecture = ref.get('architecture', 'dense')
        shape = dataset.sample_shape

        if architecture == 'conv':
            if len(shape) != 3:
                raise ValueError(f"Una red convolucional necesita muestras (alto, ancho, canales), no {shape}")
            spec = NetworkSpec.small_conv_net(*shape, classes=dataset.classes,
                                              filters=ref.get('filters', (16, 16)), initializer=initializer)
            return NetworkSpec(spec.input_shape, spec.layers, initializer, dropout, dataset.classes)

        if len(shape) != 1:
            raise ValueError(f"Una red densa necesita muestras planas, no {shape}")
        if architecture == 'halving':
            spec = NetworkSpec.halving_architecture(shape[0], dataset.classes,
                                                    second_hidden=ref.get('second_hidden'),
                                                    initializer=initializer)
            return NetworkSpec(spec.input_shape, spec.layers, initializer, dropout, dataset.classes)

        return NetworkSpec.dense_net(shape[0], ref.get('hidden', [64, 64]), dataset.classes,
                                     initializer=initializer, dropout_rate=dropout)

    # ========== UNA SEMILLA ==========

    def build_network(self, spec: NetworkSpec, seed: int, attack=None) -> Network:
        """Inicializa con la semilla y, si hay ataque, lo aplica antes de entrenar."""
        net = self.init_service.init_network(spec, Rng(seed))
        if attack is not None:
            net.set_weights(self.attack_service.attack_network(net.weight_tensors(), attack))
        return net

    def run_seed(self, cfg: ExperimentConfig, dataset: Dataset, spec: NetworkSpec,
                 seed: int) -> Tuple[ExperimentRecord, TrainingTrace]:
        net = self.build_network(spec, seed, cfg.attack)
        return self.train_network(net, cfg, dataset, seed)

    def train_network(self, net: Network, cfg: ExperimentConfig, dataset: Dataset,
                      seed: int) -> Tuple[ExperimentRecord, TrainingTrace]:
        """Entrena con la semilla dada; una divergencia queda registrada, no es fatal."""
        train = cfg.train.with_overrides(seed=seed)
        try:
            trace = self.training_service.train(net, dataset, train)
        except TrainingDivergedError as e:
            logger.warning(f"⚠️ Semilla {seed}: {e}")
            trace = e.trace or TrainingTrace()
            trace.diverged_at = e.epoch
        return ExperimentRecord.from_trace(seed, trace), trace

    # ========== EXPERIMENTO COMPLETO ==========

    def run_experiment(self, cfg: ExperimentConfig, write: bool = True,
                       dataset: Optional[Dataset] = None) -> List[ExperimentRecord]:
        """Un registro por semilla, ordenado por semilla.

        Con `write` se guardan los resultados por semilla a medida que
        terminan; una ejecución interrumpida retoma saltando esas semillas.
        """
        dataset = dataset or self.load_dataset(cfg.dataset)
        spec = self.build_spec(cfg.network, dataset)
        seeds_dir = os.path.join(cfg.output_dir, self.SEEDS_DIR)

        done: Dict[int, Tuple[ExperimentRecord, TrainingTrace]] = {}
        if write:
            os.makedirs(seeds_dir, exist_ok=True)
            done = self._load_completed(seeds_dir, cfg.seeds)
            if done:
                logger.info(f"Retomando: {len(done)} semillas ya completadas")

        pending = [seed for seed in cfg.seeds if seed not in done]
        logger.info(f"Experimento '{cfg.name}' ({cfg.variant}): {len(pending)} semillas pendientes")

        def run(seed: int):
            result = self.run_seed(cfg, dataset, spec, seed)
            if write:
                self._save_seed(seeds_dir, seed, *result)
            return seed, result

        if cfg.jobs > 1 and len(pending) > 1:
            with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
                finished = list(pool.map(run, pending))
        else:
            finished = [run(seed) for seed in pending]
        done.update(dict(finished))

        ordered = sorted(done.items())
        records = [record for _, (record, _) in ordered]
        if write:
            self.write_outputs(cfg, records, [(seed, trace) for seed, (_, trace) in ordered], spec)
        return records

    def _save_seed(self, seeds_dir: str, seed: int, record: ExperimentRecord, trace: TrainingTrace):
        path = os.path.join(seeds_dir, f"{seed}.json")
        with open(path, "w") as handle:
            json.dump({'record': record.to_dict(), 'trace': trace.to_dict()}, handle)

    def _load_completed(self, seeds_dir: str, seeds: Sequence[int]):
        done = {}
        for seed in seeds:
            path = os.path.join(seeds_dir, f"{seed}.json")
            if os.path.exists(path):
                with open(path) as handle:
                    data = json.load(handle)
                done[seed] = (ExperimentRecord.from_dict(data['record']),
                              TrainingTrace.from_dict(data['trace']))
        return done

    # ========== SALIDAS ==========

    def write_outputs(self, cfg: ExperimentConfig, records: List[ExperimentRecord],
                      traces: List[Tuple[int, TrainingTrace]], spec: NetworkSpec):
        out = cfg.output_dir
        os.makedirs(out, exist_ok=True)
        self.write_records(records, os.path.join(out, self.RECORDS_FILE))

        accuracies = [r.best_test_accuracy for r in records]
        if len(accuracies) >= 2:
            grid, density = self.kde(accuracies)
            self._write_csv(os.path.join(out, self.KDE_FILE), ['x', 'density'],
                            [[f"{x:.6f}", f"{d:.6f}"] for x, d in zip(grid, density)])

        epochs = cfg.train.epochs
        edges, counts = self.histogram([r.best_epoch for r in records], bins=min(20, epochs),
                                       low=0, high=epochs)
        self._write_csv(os.path.join(out, self.HIST_FILE), ['bin_lo', 'bin_hi', 'count'],
                        [[f"{lo:g}", f"{hi:g}", int(c)] for lo, hi, c in zip(edges[:-1], edges[1:], counts)])

        curve_rows = []
        for seed, trace in traces:
            for row in trace.rows(seed):
                curve_rows.append([row['seed'], row['epoch'], f"{row['train_loss']:.6f}",
                                   f"{row['test_loss']:.6f}", f"{row['test_acc']:.6f}",
                                   f"{row['dead_fraction']:.6f}"])
        self._write_csv(os.path.join(out, self.CURVES_FILE),
                        ['seed', 'epoch', 'train_loss', 'test_loss', 'test_acc', 'dead_fraction'], curve_rows)

        manifest = {'config': cfg.to_dict(), 'network': spec.to_dict(), 'variant': cfg.variant,
                    'alternative_attack': bool(cfg.alternative)}
        with open(os.path.join(out, self.MANIFEST_FILE), "w") as handle:
            json.dump(manifest, handle, indent=2)
        logger.info(f"✅ Resultados escritos en {out}")

    @staticmethod
    def _write_csv(path: str, header: List[str], rows: List[List[Any]]):
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(header)
            writer.writerows(rows)

    def write_records(self, records: List[ExperimentRecord], path: str):
        self._write_csv(path, ExperimentRecord.CSV_FIELDS, [r.csv_row() for r in records])

    @staticmethod
    def read_records(path: str) -> List[ExperimentRecord]:
        with open(path, newline="") as handle:
            return [ExperimentRecord.from_csv_row(row) for row in csv.DictReader(handle)]

    # ========== ESTADÍSTICAS ==========

    @staticmethod
    def kde(values: Sequence[float], bandwidth: Optional[float] = None,
            points: int = 512) -> Tuple[np.ndarray, np.ndarray]:
        """Densidad por núcleo gaussiano (`gaussian_kde`) muestreada en una rejilla.

        Ancho de banda por defecto: regla de Silverman. Con valores idénticos la
        covarianza es nula y se usa un núcleo de escala mínima relativa a los datos.
        """
        values = np.asarray(values, dtype=np.float64)
        if values.size < 2:
            raise ValueError("La estimación de densidad necesita al menos 2 valores")
        if bandwidth is not None and bandwidth <= 0:
            raise ValueError("El ancho de banda debe ser positivo")

        std = float(values.std(ddof=1))
        if std == 0.0:
            width = bandwidth or 1e-3 * max(1.0, float(np.abs(values).max()))
            grid = np.linspace(values[0] - 4 * width, values[0] + 4 * width, points)
            return grid, norm.pdf(grid, loc=values[0], scale=width)

        # gaussian_kde escala el factor por la desviación de los datos
        kernel = gaussian_kde(values, bw_method='silverman' if bandwidth is None else bandwidth / std)
        width = float(np.sqrt(kernel.covariance[0, 0]))
        grid = np.linspace(values.min() - 4 * width, values.max() + 4 * width, points)
        return grid, kernel(grid)

    @staticmethod
    def histogram(epochs: Sequence[int], bins: int, low: Optional[float] = None,
                  high: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Recuento por intervalos [lo, hi) sobre [low, high]; el último intervalo incluye high."""
        if bins < 1:
            raise ValueError("Se necesita al menos un intervalo")
        values = np.asarray(epochs, dtype=np.float64)
        low = 0.0 if low is None else float(low)
        if high is None:
            high = (values.max() + 1.0) if values.size else low + 1.0
        # Los valores fuera del rango cuentan en el intervalo extremo
        counts, edges = np.histogram(np.clip(values, low, high), bins=bins, range=(low, float(high)))
        return edges, counts

    # ========== ATAQUES ALTERNATIVOS Y ABLACIONES ==========

    def override_training(self, cfg: ExperimentConfig, learning_rate: Optional[float] = None,
                          dropout_rate: Optional[float] = None) -> ExperimentConfig:
        """Sustituye la tasa de aprendizaje o el dropout por un valor malicioso."""
        if learning_rate is None and dropout_rate is None:
            return cfg

        alternative = dict(cfg.alternative)
        train, network = cfg.train, dict(cfg.network)
        if learning_rate is not None:
            if learning_rate <= 0:
                raise ValueError("La tasa de aprendizaje maliciosa debe ser positiva")
            alternative.setdefault('original_learning_rate', train.learning_rate)
            train = train.with_overrides(learning_rate=learning_rate)
            alternative['learning_rate'] = float(learning_rate)
        if dropout_rate is not None:
            if not 0.0 < dropout_rate < 1.0:
                raise ValueError("El dropout malicioso debe estar en (0, 1)")
            alternative.setdefault('original_dropout_rate', float(network.get('dropout_rate', 0.0)))
            network['dropout_rate'] = float(dropout_rate)
            alternative['dropout_rate'] = float(dropout_rate)

        logger.info(f"Ataque por hiperparámetros: {alternative}")
        return cfg.with_changes(train=train, network=network, alternative=alternative)

    def ablation_configs(self, cfg: ExperimentConfig) -> Dict[str, ExperimentConfig]:
        """Variantes He/Glorot y Adam/SGD con las mismas semillas."""
        variants = {}
        for kind in InitializerSpec.KINDS:
            network = dict(cfg.network)
            initializer = dict(network.get('initializer', {}))
            initializer['kind'] = kind
            network['initializer'] = initializer
            variants[f"init-{kind}"] = cfg.with_changes(
                network=network, name=f"{cfg.name}-init-{kind}",
                output_dir=os.path.join(cfg.output_dir, f"init-{kind}"))
        for optimizer in ('adam', 'sgd'):
            variants[f"opt-{optimizer}"] = cfg.with_changes(
                train=cfg.train.with_overrides(optimizer=optimizer),
                name=f"{cfg.name}-opt-{optimizer}",
                output_dir=os.path.join(cfg.output_dir, f"opt-{optimizer}"))
        return variants

    # ========== COMPARACIÓN PAREADA ==========

    def compare_runs(self, baseline: List[ExperimentRecord], attack: List[ExperimentRecord],
                     path: Optional[str] = None) -> Dict[str, Any]:
        """Empareja por semilla y resume medianas de precisión y de épocas hasta el 95 %."""
        by_seed = {r.seed: r for r in attack}
        if sorted(by_seed) != sorted(r.seed for r in baseline):
            raise ValueError("Las semillas de la línea base y del ataque no coinciden")

        rows = []
        for base in sorted(baseline, key=lambda r: r.seed):
            other = by_seed[base.seed]
            rows.append([base.seed, f"{base.best_test_accuracy:.6f}", base.best_epoch, base.epochs_to_95,
                         f"{other.best_test_accuracy:.6f}", other.best_epoch, other.epochs_to_95])

        summary = {
            'seeds': len(rows),
            'baseline_median_acc': float(np.median([r.best_test_accuracy for r in baseline])),
            'attack_median_acc': float(np.median([r.best_test_accuracy for r in attack])),
            'baseline_median_epochs_to_95': float(np.median([r.epochs_to_95 for r in baseline])),
            'attack_median_epochs_to_95': float(np.median([r.epochs_to_95 for r in attack])),
        }

        if path:
            self._write_csv(path, ['seed', 'baseline_acc', 'baseline_epoch', 'baseline_epochs_to_95',
                                   'attack_acc', 'attack_epoch', 'attack_epochs_to_95'], rows)
        logger.info(f"Comparación: {summary}")
        return summary

    def run_paired(self, cfg: ExperimentConfig, write: bool = True) -> Dict[str, Any]:
        """Ejecuta línea base y variante atacada con la misma lista de semillas."""
        dataset = self.load_dataset(cfg.dataset)
        baseline_cfg = cfg.with_changes(attack=None, alternative={},
                                        output_dir=os.path.join(cfg.output_dir, "baseline"),
                                        name=f"{cfg.name}-baseline")
        if cfg.alternative:
            baseline_cfg = baseline_cfg.with_changes(
                train=baseline_cfg.train.with_overrides(**self._clean_train(cfg)),
                network=self._clean_network(cfg))
        attack_cfg = cfg.with_changes(output_dir=os.path.join(cfg.output_dir, "attack"),
                                      name=f"{cfg.name}-{cfg.variant}")

        baseline = self.run_experiment(baseline_cfg, write=write, dataset=dataset)
        attacked = self.run_experiment(attack_cfg, write=write, dataset=dataset)
        path = os.path.join(cfg.output_dir, self.COMPARISON_FILE) if write else None
        summary = self.compare_runs(baseline, attacked, path)
        return {'baseline': baseline, 'attack': attacked, 'summary': summary}

    @staticmethod
    def _clean_train(cfg: ExperimentConfig) -> Dict[str, Any]:
        original = cfg.alternative.get('original_learning_rate')
        return {'learning_rate': original} if original is not None else {}

    @staticmethod
    def _clean_network(cfg: ExperimentConfig) -> Dict[str, Any]:
        network = dict(cfg.network)
        if 'dropout_rate' in cfg.alternative:
            network['dropout_rate'] = cfg.alternative.get('original_dropout_rate', 0.0)
        return network
