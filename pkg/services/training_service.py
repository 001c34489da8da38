import time
import logging
from typing import List, Optional, Tuple

import numpy as np

from models.dataset import Dataset
from models.experiment import TrainingTrace
from models.network import Network
from models.network_spec import TrainConfig
from models.rng import Rng

logger = logging.getLogger(__name__)


class TrainingDivergedError(RuntimeError):
    """Aparecieron valores no finitos durante el entrenamiento."""

    def __init__(self, epoch: int, trace: Optional[TrainingTrace] = None):
        super().__init__(f"El entrenamiento divergió en la época {epoch}")
        self.epoch = epoch
        self.trace = trace


class SgdOptimizer:
    def __init__(self, learning_rate: float):
        self.learning_rate = learning_rate

    def step(self, params: List[np.ndarray], grads: List[np.ndarray]):
        for param, grad in zip(params, grads):
            param -= self.learning_rate * grad


class AdamOptimizer:
    """Adam con corrección de sesgo; ε se suma fuera de la raíz."""

    def __init__(self, learning_rate: float, beta1: float = 0.9, beta2: float = 0.999,
                 epsilon: float = 1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m: Optional[List[np.ndarray]] = None
        self.v: Optional[List[np.ndarray]] = None

    def step(self, params: List[np.ndarray], grads: List[np.ndarray]):
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]

        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t

        for param, grad, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad ** 2
            m_hat = m / correction1
            v_hat = v / correction2
            param -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)


class TrainingService:
    """Entrenamiento por mini-lotes con evaluación en prueba tras cada época."""

    EVAL_BATCH = 1024

    def __init__(self):
        logger.info("✅ TrainingService inicializado")

    @staticmethod
    def make_optimizer(cfg: TrainConfig):
        if cfg.optimizer == 'sgd':
            return SgdOptimizer(cfg.learning_rate)
        return AdamOptimizer(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)

    def train(self, net: Network, dataset: Dataset, cfg: TrainConfig) -> TrainingTrace:
        """Entrena `net` en su sitio y devuelve la traza por época.

        El orden de los lotes y las máscaras de dropout salen de dos hijos de
        la semilla de entrenamiento, así que la traza es reproducible.
        """
        if tuple(dataset.sample_shape) != net.spec.input_shape:
            raise ValueError(
                f"El dataset tiene muestras {dataset.sample_shape} y la red espera {net.spec.input_shape}"
            )

        order_rng, dropout_rng = Rng(cfg.seed).spawn(2)
        optimizer = self.make_optimizer(cfg)
        trace = TrainingTrace()
        train_x, train_y = dataset.train_x, dataset.train_y
        test_x, test_y = dataset.test_x, dataset.test_y
        count = train_y.size
        started = time.perf_counter()

        logger.info(f"Entrenando {net.spec!r} con {cfg!r} sobre {count} muestras")

        for epoch in range(cfg.epochs):
            order = order_rng.permutation(count)
            total_loss = 0.0

            for start in range(0, count, cfg.batch_size):
                batch = order[start:start + cfg.batch_size]
                loss, grads = net.backward(train_x[batch], train_y[batch], training=True, rng=dropout_rng)
                optimizer.step(net.parameters(), grads)
                total_loss += loss * batch.size

            train_loss = total_loss / count
            if not np.isfinite(train_loss) or not net.all_finite():
                trace.diverged_at = epoch
                trace.wall_seconds = time.perf_counter() - started
                logger.error(f"❌ Divergencia en la época {epoch}")
                raise TrainingDivergedError(epoch, trace)

            test_loss, test_accuracy = self.evaluate(net, test_x, test_y)
            dead = self.dead_fraction(net, test_x)
            trace.add_epoch(train_loss, test_loss, test_accuracy, dead)
            logger.debug(f"Época {epoch}: loss={train_loss:.4f} test_acc={test_accuracy:.4f} muertas={dead:.3f}")

        trace.wall_seconds = time.perf_counter() - started
        logger.info(f"✅ Mejor precisión {trace.best_accuracy:.4f} en la época {trace.best_epoch}")
        return trace

    def evaluate(self, net: Network, x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
        """(pérdida media, precisión) sin dropout."""
        total_loss, correct = 0.0, 0
        for start in range(0, y.size, self.EVAL_BATCH):
            xb, yb = x[start:start + self.EVAL_BATCH], y[start:start + self.EVAL_BATCH]
            logits = net.logits(xb)
            total_loss += net.cross_entropy(logits, yb) * yb.size
            correct += int(np.count_nonzero(logits.argmax(axis=1) == yb))
        return total_loss / y.size, correct / y.size

    def dead_fraction(self, net: Network, x: np.ndarray) -> float:
        """Fracción de unidades ReLU ocultas sin salida positiva para ninguna muestra.

        En capas convolucionales la unidad es el canal.
        """
        if net.depth < 2:
            return 0.0

        alive = None
        for start in range(0, x.shape[0], self.EVAL_BATCH):
            outputs = net.hidden_activations(x[start:start + self.EVAL_BATCH])
            flags = np.concatenate([
                (out > 0).reshape(out.shape[0], -1, out.shape[-1]).any(axis=(0, 1)) for out in outputs
            ])
            alive = flags if alive is None else (alive | flags)
        return float(1.0 - alive.mean())
