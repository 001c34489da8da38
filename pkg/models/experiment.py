import math
from typing import Dict, Any, List, Optional

from models.attack_config import AttackConfig
from models.network_spec import TrainConfig


class TrainingTrace:
    """Métricas por época de un entrenamiento (épocas indexadas desde 0)."""

    def __init__(self):
        self.train_loss: List[float] = []
        self.test_loss: List[float] = []
        self.test_accuracy: List[float] = []
        self.dead_fraction: List[float] = []
        self.diverged_at: Optional[int] = None
        self.wall_seconds = 0.0

    def add_epoch(self, train_loss: float, test_loss: float, test_accuracy: float,
                  dead_fraction: float = 0.0):
        self.train_loss.append(float(train_loss))
        self.test_loss.append(float(test_loss))
        self.test_accuracy.append(float(test_accuracy))
        self.dead_fraction.append(float(dead_fraction))

    @property
    def epochs(self) -> int:
        return len(self.test_accuracy)

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None

    @property
    def best_accuracy(self) -> float:
        return max(self.test_accuracy) if self.test_accuracy else 0.0

    @property
    def best_epoch(self) -> int:
        """Primera época en la que se alcanza la mejor precisión."""
        if not self.test_accuracy:
            return 0
        return self.test_accuracy.index(self.best_accuracy)

    @property
    def final_loss(self) -> float:
        return self.train_loss[-1] if self.train_loss else float('nan')

    def epochs_to_fraction(self, fraction: float = 0.95) -> int:
        """Primera época con precisión ≥ fraction · (mejor precisión propia)."""
        target = fraction * self.best_accuracy
        for epoch, accuracy in enumerate(self.test_accuracy):
            if accuracy >= target:
                return epoch
        return self.epochs

    def rows(self, seed: int) -> List[Dict[str, Any]]:
        return [
            {'seed': seed, 'epoch': epoch, 'train_loss': self.train_loss[epoch],
             'test_loss': self.test_loss[epoch], 'test_acc': self.test_accuracy[epoch],
             'dead_fraction': self.dead_fraction[epoch]}
            for epoch in range(self.epochs)
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            'train_loss': self.train_loss, 'test_loss': self.test_loss,
            'test_accuracy': self.test_accuracy, 'dead_fraction': self.dead_fraction,
            'diverged_at': self.diverged_at, 'wall_seconds': self.wall_seconds,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TrainingTrace':
        trace = cls()
        trace.train_loss = [float(v) for v in data.get('train_loss', [])]
        trace.test_loss = [float(v) for v in data.get('test_loss', [])]
        trace.test_accuracy = [float(v) for v in data.get('test_accuracy', [])]
        trace.dead_fraction = [float(v) for v in data.get('dead_fraction', [0.0] * len(trace.test_accuracy))]
        trace.diverged_at = data.get('diverged_at')
        trace.wall_seconds = float(data.get('wall_seconds', 0.0))
        return trace

    def __repr__(self) -> str:
        return (f"TrainingTrace(epochs={self.epochs}, best={self.best_accuracy:.4f}"
                f"@{self.best_epoch}, diverged={self.diverged})")


class ExperimentRecord:
    """Resultado de una semilla: mejor precisión, su época, pérdida final y tiempo."""

    CSV_FIELDS = ['seed', 'best_acc', 'best_epoch', 'final_loss', 'wall_s']

    def __init__(
        self,
        seed: int,
        best_test_accuracy: float,
        best_epoch: int,
        final_loss: float,
        wall_seconds: float = 0.0,
        epochs_to_95: Optional[int] = None,
        diverged_at: Optional[int] = None
    ):
        self.seed = int(seed)
        self.best_test_accuracy = round(float(best_test_accuracy), 6)
        self.best_epoch = int(best_epoch)
        self.final_loss = float(final_loss)
        self.wall_seconds = float(wall_seconds)
        self.epochs_to_95 = int(epochs_to_95) if epochs_to_95 is not None else self.best_epoch
        self.diverged_at = diverged_at

        self._validate()

    def _validate(self):
        if not 0.0 <= self.best_test_accuracy <= 1.0:
            raise ValueError("La mejor precisión debe estar en [0, 1]")
        if self.best_epoch < 0:
            raise ValueError("La mejor época no puede ser negativa")

    @classmethod
    def from_trace(cls, seed: int, trace: TrainingTrace) -> 'ExperimentRecord':
        return cls(seed=seed, best_test_accuracy=trace.best_accuracy, best_epoch=trace.best_epoch,
                   final_loss=trace.final_loss, wall_seconds=trace.wall_seconds,
                   epochs_to_95=trace.epochs_to_fraction(0.95), diverged_at=trace.diverged_at)

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None

    def csv_row(self) -> List[str]:
        loss = "nan" if math.isnan(self.final_loss) else f"{self.final_loss:.6f}"
        return [str(self.seed), f"{self.best_test_accuracy:.6f}", str(self.best_epoch),
                loss, f"{self.wall_seconds:.3f}"]

    @classmethod
    def from_csv_row(cls, row: Dict[str, str]) -> 'ExperimentRecord':
        return cls(seed=int(row['seed']), best_test_accuracy=float(row['best_acc']),
                   best_epoch=int(row['best_epoch']), final_loss=float(row['final_loss']),
                   wall_seconds=float(row['wall_s']))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'seed': self.seed, 'best_test_accuracy': self.best_test_accuracy,
            'best_epoch': self.best_epoch, 'final_loss': self.final_loss,
            'wall_seconds': self.wall_seconds, 'epochs_to_95': self.epochs_to_95,
            'diverged_at': self.diverged_at,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentRecord':
        return cls(
            seed=data['seed'],
            best_test_accuracy=data.get('best_test_accuracy', 0.0),
            best_epoch=data.get('best_epoch', 0),
            final_loss=data.get('final_loss', float('nan')),
            wall_seconds=data.get('wall_seconds', 0.0),
            epochs_to_95=data.get('epochs_to_95'),
            diverged_at=data.get('diverged_at')
        )

    def same_result(self, other: 'ExperimentRecord') -> bool:
        """Igualdad ignorando el tiempo de reloj."""
        return self._result_key() == other._result_key()

    def _result_key(self):
        loss = None if math.isnan(self.final_loss) else self.final_loss
        return (self.seed, self.best_test_accuracy, self.best_epoch, loss,
                self.epochs_to_95, self.diverged_at)

    def __repr__(self) -> str:
        return (f"ExperimentRecord(seed={self.seed}, best={self.best_test_accuracy:.4f}, "
                f"epoch={self.best_epoch})")


class ExperimentConfig:
    """Protocolo de varias semillas: dataset, red, entrenamiento y ataque opcional.

    `dataset` y `network` son referencias (diccionarios) que se resuelven al
    ejecutar; `attack=None` es la línea base. `alternative` anota los ataques
    por hiperparámetros (tasa de aprendizaje o dropout maliciosos).
    """

    ARCHITECTURES = ['dense', 'halving', 'conv']
    DATASET_KINDS = ['blobs', 'csv', 'idx', 'cache']

    def __init__(
        self,
        dataset: Dict[str, Any],
        network: Optional[Dict[str, Any]] = None,
        train: Optional[TrainConfig] = None,
        attack: Optional[AttackConfig] = None,
        seeds: Optional[List[int]] = None,
        output_dir: str = "./runs",
        jobs: int = 1,
        name: str = "experiment",
        alternative: Optional[Dict[str, float]] = None
    ):
        self.dataset = dict(dataset or {})
        self.network = dict(network or {'architecture': 'halving'})
        self.train = train or TrainConfig()
        self.attack = attack
        self.seeds = [int(s) for s in (seeds if seeds is not None else range(50))]
        self.output_dir = output_dir
        self.jobs = int(jobs)
        self.name = name
        self.alternative = dict(alternative or {})

        self._validate()

    def _validate(self):
        if self.dataset.get('kind') not in self.DATASET_KINDS:
            raise ValueError(f"Tipo de dataset inválido. Debe ser: {', '.join(self.DATASET_KINDS)}")

        if self.network.get('architecture', 'dense') not in self.ARCHITECTURES:
            raise ValueError(f"Arquitectura inválida. Debe ser: {', '.join(self.ARCHITECTURES)}")

        if not self.seeds:
            raise ValueError("La lista de semillas no puede estar vacía")

        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("La lista de semillas contiene duplicados")

        if self.jobs < 1:
            raise ValueError("jobs debe ser al menos 1")

    @property
    def is_baseline(self) -> bool:
        return self.attack is None and not self.alternative

    @property
    def variant(self) -> str:
        if self.attack is not None:
            return self.attack.kind
        if self.alternative:
            return 'alternative'
        return 'baseline'

    def with_changes(self, **changes) -> 'ExperimentConfig':
        data = {
            'dataset': self.dataset, 'network': self.network, 'train': self.train,
            'attack': self.attack, 'seeds': self.seeds, 'output_dir': self.output_dir,
            'jobs': self.jobs, 'name': self.name, 'alternative': self.alternative,
        }
        data.update(changes)
        return ExperimentConfig(**data)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'dataset': self.dataset,
            'network': self.network,
            'train': self.train.to_dict(),
            'attack': self.attack.to_dict() if self.attack else None,
            'seeds': self.seeds,
            'output_dir': self.output_dir,
            'jobs': self.jobs,
            'alternative': self.alternative,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ExperimentConfig':
        attack = data.get('attack')
        train = data.get('train')
        return cls(
            dataset=data.get('dataset', {}),
            network=data.get('network'),
            train=TrainConfig.from_dict(train) if train else None,
            attack=AttackConfig.from_dict(attack) if attack else None,
            seeds=data.get('seeds'),
            output_dir=data.get('output_dir', './runs'),
            jobs=data.get('jobs', 1),
            name=data.get('name', 'experiment'),
            alternative=data.get('alternative')
        )

    def __repr__(self) -> str:
        return (f"ExperimentConfig(name='{self.name}', variant={self.variant}, "
                f"seeds={len(self.seeds)}, {self.train!r})")
