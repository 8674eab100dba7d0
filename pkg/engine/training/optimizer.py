"""
Mini-batch gradient descent with a bold-driver learning rate.
"""
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Tuple

import numpy as np
import pandas as pd
from django.conf import settings

from config.exceptions import ChainError, ConfigurationError, DegenerateInterfaceError, DivergenceError
from network.forward import forward_with_record
from network.topology import Network, build_network
from .backprop import cost_and_gradients, data_cost, penalty, relative_errors
from .datasets import Batch, Dataset

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = [
    'epoch', 'lr', 'train_cost', 'test_cost', 'train_error', 'test_error', 'active_nodes', 'reverted',
]


def _setting(name, default):
    return getattr(settings, name, default)


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; unset fields fall back to the DMN_TRAIN_* settings."""
    epochs: int = field(default_factory=lambda: _setting('DMN_TRAIN_EPOCHS', 20000))
    n_batches: int = field(default_factory=lambda: _setting('DMN_TRAIN_BATCHES', 10))
    lam: float = field(default_factory=lambda: _setting('DMN_TRAIN_LAMBDA', 0.001))
    lr0: float = field(default_factory=lambda: _setting('DMN_TRAIN_LR0', 0.01))
    bold_up: float = field(default_factory=lambda: _setting('DMN_TRAIN_BOLD_UP', 1.05))
    bold_down: float = field(default_factory=lambda: _setting('DMN_TRAIN_BOLD_DOWN', 0.5))
    seed: int = 0
    n_layers: int = 8
    log_every: int = 100
    lr_min: float = field(default_factory=lambda: _setting('DMN_TRAIN_LR_MIN', 1e-12))

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigurationError(f'epochs must be non-negative, got {self.epochs}')
        if self.n_batches < 1:
            raise ConfigurationError(f'n_batches must be positive, got {self.n_batches}')
        if self.lam < 0:
            raise ConfigurationError(f'lambda must be non-negative, got {self.lam}')
        if self.lr0 <= 0:
            raise ConfigurationError(f'lr0 must be positive, got {self.lr0}')
        if not 0.0 < self.lr_min <= self.lr0:
            raise ConfigurationError(f'lr_min must lie in (0, lr0], got {self.lr_min}')
        if not (self.bold_up > 1.0 > self.bold_down > 0.0):
            raise ConfigurationError(
                f'bold driver factors need bold_up > 1 > bold_down > 0, got {self.bold_up}, {self.bold_down}'
            )

    def fingerprint(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()


@dataclass
class TrainingResult:
    network: Network
    history: pd.DataFrame

    def summary(self) -> dict:
        """Final errors and regularization residual of the trained network."""
        last = self.history.iloc[-1]
        net = self.network
        target = net.regularization_target()
        return {
            'epochs': int(last['epoch']),
            'train_error': float(last['train_error']),
            'test_error': float(last['test_error']),
            'train_cost': float(last['train_cost']),
            'test_cost': float(last['test_cost']),
            'regularization_residual': abs(float(np.maximum(net.z, 0).sum()) - target) / target,
            'active_nodes': net.active_bottom_nodes(),
        }


def _metrics(net: Network, part: Batch, lam: float) -> Tuple[float, float]:
    """(cost, scaled MAE) from one forward pass; NaNs when the pass fails."""
    if len(part) == 0:
        return float('nan'), float('nan')
    try:
        prediction, _ = forward_with_record(net, part.fiber, part.matrix)
    except DegenerateInterfaceError:
        return float('nan'), float('nan')
    residual, scale = relative_errors(prediction, part.composite)
    j = data_cost(prediction, part.composite) + penalty(net, lam)
    return j, float(np.mean(np.sqrt(residual / scale)))


def evaluate_error(net: Network, part: Batch) -> float:
    """Scaled mean absolute error: mean of |C_pred - C_c|_F / |C_c|_F."""
    if len(part) == 0:
        raise ValueError('evaluate_error needs a non-empty dataset part')
    prediction, _ = forward_with_record(net, part.fiber, part.matrix)
    residual, scale = relative_errors(prediction, part.composite)
    return float(np.mean(np.sqrt(residual / scale)))


def train(
    net: Network,
    dataset: Dataset,
    cfg: TrainConfig,
    callback: Optional[Callable[[int, Network], None]] = None,
) -> TrainingResult:
    """
    Fit the network trainables to the training split.

    Each epoch shuffles the training split into cfg.n_batches batches and takes
    one gradient step per batch. An epoch that lowers the training error grows
    the learning rate by bold_up; any other epoch is reverted and the learning
    rate shrinks by bold_down, never below lr_min. A non-finite epoch at
    lr_min raises DivergenceError.
    """
    if len(dataset.train) == 0:
        raise ValueError('training split is empty')
    rng = np.random.default_rng(cfg.seed)
    provenance = {'training_config': cfg.fingerprint(), 'seed': cfg.seed}
    if dataset.descriptor is not None:
        provenance['descriptor'] = list(dataset.descriptor)

    params = net.parameter_vector().copy()
    current = net
    lr = cfg.lr0
    train_cost, train_error = _metrics(current, dataset.train, cfg.lam)
    if not np.isfinite(train_cost):
        raise DivergenceError('initial training cost is not finite', snapshot=net)
    test_cost, test_error = _metrics(current, dataset.test, cfg.lam)

    rows = [[0, lr, train_cost, test_cost, train_error, test_error, sum(net.active_bottom_nodes().values()), False]]
    logger.info(f'Training {net.n_layers}-layer network on {dataset}: initial error {train_error:.4e}')

    for epoch in range(1, cfg.epochs + 1):
        trial = params.copy()
        finite = True
        for index in np.array_split(rng.permutation(len(dataset.train)), cfg.n_batches):
            if index.size == 0:
                continue
            candidate = Network.from_parameter_vector(net.n_layers, trial)
            try:
                _, grads = cost_and_gradients(candidate, dataset.train.subset(index), cfg.lam)
            except DegenerateInterfaceError:
                finite = False
                break
            step = grads.vector()
            if not np.all(np.isfinite(step)):
                finite = False
                break
            trial -= lr * step

        new_cost, new_error = float('nan'), float('nan')
        if finite and np.all(np.isfinite(trial)):
            candidate = Network.from_parameter_vector(net.n_layers, trial)
            new_cost, new_error = _metrics(candidate, dataset.train, cfg.lam)

        if np.isfinite(new_cost) and new_error < train_error:
            params = trial
            current = candidate
            train_cost, train_error = new_cost, new_error
            test_cost, test_error = _metrics(current, dataset.test, cfg.lam)
            lr *= cfg.bold_up
            reverted = False
        else:
            if not np.isfinite(new_cost) and lr <= cfg.lr_min:
                raise DivergenceError(
                    f'training cost is not finite at the learning rate floor (epoch {epoch}, lr={lr:.3e})',
                    snapshot=current.with_parameters(current.z, current.angles, **provenance),
                )
            lr = max(lr * cfg.bold_down, cfg.lr_min)
            reverted = True

        rows.append([
            epoch, lr, train_cost, test_cost, train_error, test_error,
            sum(current.active_bottom_nodes().values()), reverted,
        ])
        if epoch % cfg.log_every == 0 or epoch == cfg.epochs:
            logger.info(
                f'Epoch {epoch}/{cfg.epochs} | lr {lr:.3e} | train {train_error:.4e} | test {test_error:.4e}'
            )
        if callback is not None:
            callback(epoch, current)

    trained = net.with_parameters(params[:net.n_bottom], params[net.n_bottom:].reshape(-1, 3), **provenance)
    history = pd.DataFrame(rows, columns=HISTORY_COLUMNS)
    return TrainingResult(network=trained, history=history)


def transfer_train_chain(stages: List[Tuple[Dataset, TrainConfig]]) -> List[Network]:
    """
    Train a chain of networks, each stage starting from the previous result.

    The first stage starts from build_network(cfg.n_layers, cfg.seed).
    """
    if not stages:
        raise ChainError('transfer chain needs at least one stage')
    networks: List[Network] = []
    previous: Optional[Network] = None
    for number, (dataset, cfg) in enumerate(stages, start=1):
        if previous is None:
            init = build_network(cfg.n_layers, cfg.seed)
        else:
            if cfg.n_layers != previous.n_layers:
                raise ChainError(
                    f'stage {number} asks for {cfg.n_layers} layers but the chain has {previous.n_layers}'
                )
            init = previous
        initial_error = evaluate_error(init, dataset.train)
        logger.info(f'Chain stage {number}: {dataset} starts at error {initial_error:.4e}')
        result = train(init, dataset, cfg)
        trained = result.network.with_parameters(
            result.network.z, result.network.angles, stage=number, initial_error=initial_error
        )
        networks.append(trained)
        previous = trained
    return networks


def plot_history(history: pd.DataFrame, path: Path) -> Path:
    """Train and test error versus epoch on log axes."""
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    epochs = history['epoch'].clip(lower=1)
    ax.loglog(epochs, history['train_error'], label='train')
    ax.loglog(epochs, history['test_error'], label='test', linestyle='--')
    ax.set_xlabel('epoch')
    ax.set_ylabel('scaled mean absolute error')
    ax.grid(True, which='both', alpha=0.3)
    ax.legend()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    logger.info(f'Training history plot written to {path}')
    return path
