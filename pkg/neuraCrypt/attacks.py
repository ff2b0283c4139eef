from __future__ import annotations

import logging
import pathlib
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from neuraCrypt.config import (
    ATTACK_LEARNING_RATE,
    ATTACK_MOMENTUM,
    ATTACK_SEED,
    ATTACK_STEPS,
    ATTACKER_WIDTH,
    MAX_GRAD_NORM,
)
from neuraCrypt.encoder import image_to_patches
from neuraCrypt.errors import DimMismatch, Divergence, EmptySet, SingleClassData, UnsupportedModel
from neuraCrypt.metrics import LogisticRegression, mean_pool, roc_auc
from neuraCrypt.mmd import MMDConfig, mmd2_and_output_gradient
from neuraCrypt.prng import GaussianStream

logger = logging.getLogger("neuraCrypt.Attacks")

LINEAR = "linear"
TWO_LAYER = "two-layer"
KINDS = (LINEAR, TWO_LAYER)

Predictor = Callable[[np.ndarray], np.ndarray]


def canonical_sort(patches: np.ndarray) -> np.ndarray:
    """Rows in lexicographic order, the shuffle-invariant form of a patch set."""
    patches = np.asarray(patches)
    return patches[np.lexsort(patches.T[::-1])]


def _as_image(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    return image[np.newaxis] if image.ndim == 2 else image


@dataclass
class AttackerModel:
    """T*: a per-patch map from raw patch vectors to encoded patch vectors."""

    kind: str
    params: dict
    patch_size: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UnsupportedModel(f"Unknown attacker kind {self.kind!r}, expected {KINDS}")

    @classmethod
    def initialize(
        cls,
        kind: str,
        in_dim: int,
        out_dim: int,
        patch_size: int,
        width: int | None = None,
        seed: int = ATTACK_SEED,
        scale: float = 1.0,
    ) -> AttackerModel:
        """He-initialized weights from the seed's Gaussian stream, zero biases."""
        stream = GaussianStream(seed)

        def he(rows: int, cols: int) -> np.ndarray:
            return stream.take(rows * cols).reshape(rows, cols) * np.sqrt(2.0 / cols) * scale

        if kind == LINEAR:
            return cls(kind, {"W": he(out_dim, in_dim)}, patch_size)
        if kind == TWO_LAYER:
            width = width or ATTACKER_WIDTH or out_dim
            params = {
                "W1": he(width, in_dim),
                "b1": np.zeros(width),
                "W2": he(out_dim, width),
                "b2": np.zeros(out_dim),
            }
            return cls(kind, params, patch_size)
        raise UnsupportedModel(f"Unknown attacker kind {kind!r}, expected {KINDS}")

    @classmethod
    def from_linear(cls, weight: np.ndarray, patch_size: int) -> AttackerModel:
        return cls(LINEAR, {"W": np.array(weight, dtype=np.float64)}, patch_size)

    @property
    def in_dim(self) -> int:
        return (self.params["W"] if self.kind == LINEAR else self.params["W1"]).shape[1]

    @property
    def out_dim(self) -> int:
        return (self.params["W"] if self.kind == LINEAR else self.params["W2"]).shape[0]

    @property
    def width(self) -> int | None:
        return self.params["W1"].shape[0] if self.kind == TWO_LAYER else None

    def copy(self) -> AttackerModel:
        params = {k: v.copy() for k, v in self.params.items()}
        return AttackerModel(self.kind, params, self.patch_size)

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.in_dim:
            raise DimMismatch(f"Attacker expects {self.in_dim}-dim patches, got {X.shape}")
        return X

    def forward(self, X: np.ndarray) -> np.ndarray:
        X = self._check(X)
        if self.kind == LINEAR:
            return X @ self.params["W"].T
        hidden = np.maximum(X @ self.params["W1"].T + self.params["b1"], 0.0)
        return hidden @ self.params["W2"].T + self.params["b2"]

    def backward(self, X: np.ndarray, grad_out: np.ndarray) -> dict:
        """Parameter gradients given dL/dY for Y = forward(X)."""
        X = self._check(X)
        if self.kind == LINEAR:
            return {"W": grad_out.T @ X}
        pre = X @ self.params["W1"].T + self.params["b1"]
        hidden = np.maximum(pre, 0.0)
        grad_hidden = (grad_out @ self.params["W2"]) * (pre > 0)
        return {
            "W1": grad_hidden.T @ X,
            "b1": grad_hidden.sum(axis=0),
            "W2": grad_out.T @ hidden,
            "b2": grad_out.sum(axis=0),
        }

    def encode(self, image: np.ndarray) -> np.ndarray:
        return self.forward(image_to_patches(_as_image(image), self.patch_size))

    def __call__(self, image: np.ndarray) -> np.ndarray:
        return self.encode(image)

    def save(self, path: pathlib.Path | str) -> pathlib.Path:
        path = pathlib.Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as file:
            np.savez(
                file, kind=np.array(self.kind), patch_size=np.array(self.patch_size), **self.params
            )
        return path

    @classmethod
    def load(cls, path: pathlib.Path | str) -> AttackerModel:
        with np.load(pathlib.Path(path)) as data:
            kind = str(data["kind"])
            names = ("W",) if kind == LINEAR else ("W1", "b1", "W2", "b2")
            params = {n: data[n].astype(np.float64) for n in names}
            return cls(kind, params, int(data["patch_size"]))


@dataclass(frozen=True)
class MeanBaseline:
    """T_μ: ignores its input and predicts the mean ciphertext patch."""

    mean: np.ndarray
    num_patches: int

    def __call__(self, image: np.ndarray) -> np.ndarray:
        return np.tile(self.mean, (self.num_patches, 1))


def mean_baseline(Z: Sequence[np.ndarray]) -> MeanBaseline:
    sets = [np.asarray(z, dtype=np.float64) for z in Z]
    if not sets:
        raise EmptySet("The mean baseline needs at least one encoded sample")
    sets = [s[np.newaxis] if s.ndim == 1 else s for s in sets]
    stacked = np.concatenate(sets)
    return MeanBaseline(stacked.mean(axis=0), len(sets[0]))


def patch_set_mse(prediction: np.ndarray, target: np.ndarray) -> float:
    prediction = np.asarray(prediction, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if prediction.shape != target.shape:
        raise DimMismatch(f"Prediction {prediction.shape} and target {target.shape} differ")
    return float(np.mean((canonical_sort(prediction) - canonical_sort(target)) ** 2))


def mean_mse(predictor: Predictor, pairs: Sequence[tuple]) -> float:
    if not pairs:
        raise EmptySet("The evaluation set is empty")
    return float(np.mean([patch_set_mse(predictor(x), z) for x, z in pairs]))


def mse_ratio(T_star: Predictor, T_mu: Predictor, pairs: Sequence[tuple]) -> float:
    """MSE(T*) / MSE(T_μ) over paired (image, encoded) samples, patch sets canonically sorted."""
    numerator = mean_mse(T_star, pairs)
    denominator = mean_mse(T_mu, pairs)
    if denominator == 0:
        return 0.0 if numerator == 0 else float("inf")
    return numerator / denominator


@dataclass
class AttackReport:
    attack: str
    mse_ratio: float | None = None
    initial_mse_ratio: float | None = None
    epochs_run: int = 0
    final_loss: float | None = None
    transfer_auc_on_zstar: float | None = None
    transfer_auc_on_z: float | None = None
    rank_deficient: bool = False
    losses: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "kind": "attack",
            "attack": self.attack,
            "mse_ratio": self.mse_ratio,
            "initial_mse_ratio": self.initial_mse_ratio,
            "epochs_run": self.epochs_run,
            "final_loss": self.final_loss,
            "transfer_auc_on_zstar": self.transfer_auc_on_zstar,
            "transfer_auc_on_z": self.transfer_auc_on_z,
            "rank_deficient": self.rank_deficient,
        }


def mmd2_gradient(
    attacker: AttackerModel,
    X_batch: np.ndarray,
    Z_batch: np.ndarray,
    config: MMDConfig,
    base: float | None = None,
) -> tuple[float, dict]:
    """MMD²(Z_batch, attacker(X_batch)) and its gradient with respect to the attacker."""
    if not isinstance(attacker, AttackerModel) or attacker.kind not in KINDS:
        raise UnsupportedModel(f"Cannot differentiate through {attacker!r}")
    Z_batch = np.asarray(Z_batch, dtype=np.float64)
    if len(Z_batch) == 0 or len(X_batch) == 0:
        raise EmptySet("Both batches must be non-empty")
    Y = attacker.forward(X_batch)
    if Y.shape[1] != Z_batch.shape[1]:
        raise DimMismatch(f"Attacker emits {Y.shape[1]} dims, ciphertexts have {Z_batch.shape[1]}")
    base = config.resolve_base(Z_batch, Y) if base is None else base
    loss, grad_out = mmd2_and_output_gradient(Z_batch, Y, config.sigmas(base))
    return loss, attacker.backward(X_batch, grad_out)


class _Momentum:
    def __init__(
        self,
        attacker: AttackerModel,
        learning_rate: float,
        momentum: float,
        max_grad_norm: float | None,
    ):
        self.attacker = attacker
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.max_grad_norm = max_grad_norm
        self.velocity = {k: np.zeros_like(v) for k, v in attacker.params.items()}

    def step(self, grads: dict) -> None:
        if self.max_grad_norm:
            norm = float(np.sqrt(sum(np.sum(g**2) for g in grads.values())))
            if norm > self.max_grad_norm:
                grads = {k: g * (self.max_grad_norm / norm) for k, g in grads.items()}
        for name, grad in grads.items():
            self.velocity[name] = self.momentum * self.velocity[name] - self.learning_rate * grad
            self.attacker.params[name] += self.velocity[name]


def _patch_dim(image: np.ndarray, patch_size: int) -> int:
    return _as_image(image).shape[0] * patch_size**2


def _patch_rows(images: Sequence[np.ndarray], patch_size: int) -> np.ndarray:
    return np.concatenate([image_to_patches(_as_image(x), patch_size) for x in images])


def train_mmd_attack(
    attacker: AttackerModel,
    X: Sequence[np.ndarray],
    Z: Sequence[np.ndarray],
    steps: int = ATTACK_STEPS,
    learning_rate: float = ATTACK_LEARNING_RATE,
    config: MMDConfig | None = None,
    momentum: float = ATTACK_MOMENTUM,
    max_grad_norm: float | None = MAX_GRAD_NORM,
    eval_pairs: Sequence[tuple] | None = None,
) -> AttackReport:
    """Fit ``attacker`` in place by gradient descent on MMD² between Z and attacker(X).

    X and Z are not paired. ``eval_pairs`` (image, ciphertext) is used only for scoring.
    The base bandwidth is fixed once from the initial outputs.
    """
    config = config or MMDConfig()
    if not len(X) or not len(Z):
        raise EmptySet("The MMD attack needs raw samples and ciphertexts")
    X_rows = _patch_rows(X, attacker.patch_size)
    Z_rows = np.concatenate([np.asarray(z, dtype=np.float64) for z in Z])
    base = config.resolve_base(Z_rows, attacker.forward(X_rows))
    baseline = mean_baseline(Z)
    report = AttackReport("mmd")
    if eval_pairs:
        report.initial_mse_ratio = mse_ratio(attacker, baseline, eval_pairs)
    optimizer = _Momentum(attacker, learning_rate, momentum, max_grad_norm)
    loss = None
    for step in range(steps):
        loss, grads = mmd2_gradient(attacker, X_rows, Z_rows, config, base)
        if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
            raise Divergence(step, loss)
        report.losses.append(loss)
        optimizer.step(grads)
        if step % 100 == 0:
            logger.trace("MMD step %s: loss=%.6g", step, loss)
    final_loss, _ = mmd2_gradient(attacker, X_rows, Z_rows, config, base)
    if not np.isfinite(final_loss):
        raise Divergence(steps, final_loss)
    report.epochs_run = steps
    report.final_loss = final_loss
    if eval_pairs:
        report.mse_ratio = mse_ratio(attacker, baseline, eval_pairs)
    logger.debug(
        "MMD attack: %s steps, loss %s, MSE ratio %s", steps, final_loss, report.mse_ratio
    )
    return report


def sorted_mse_gradient(
    attacker: AttackerModel, inputs: Sequence[np.ndarray], targets: Sequence[np.ndarray]
) -> tuple[float, dict]:
    """Mean canonical-sort MSE over (input image, target patch set) and its gradient."""
    total = 0.0
    grads = {k: np.zeros_like(v) for k, v in attacker.params.items()}
    for image, target in zip(inputs, targets):
        X = image_to_patches(_as_image(image), attacker.patch_size)
        Y = attacker.forward(X)
        target = np.asarray(target, dtype=np.float64)
        if Y.shape != target.shape:
            raise DimMismatch(f"Attacker output {Y.shape} and target {target.shape} differ")
        order = np.lexsort(Y.T[::-1])
        diff = Y[order] - canonical_sort(target)
        total += float(np.mean(diff**2))
        grad_out = np.empty_like(Y)
        grad_out[order] = 2.0 * diff / diff.size
        for name, g in attacker.backward(X, grad_out).items():
            grads[name] += g
    count = len(inputs)
    return total / count, {k: g / count for k, g in grads.items()}


def fit_mse(
    attacker: AttackerModel,
    inputs: Sequence[np.ndarray],
    targets: Sequence[np.ndarray],
    steps: int,
    learning_rate: float,
    momentum: float = ATTACK_MOMENTUM,
    max_grad_norm: float | None = MAX_GRAD_NORM,
) -> list[float]:
    if not len(inputs):
        raise EmptySet("No training pairs")
    optimizer = _Momentum(attacker, learning_rate, momentum, max_grad_norm)
    losses = []
    for step in range(steps):
        loss, grads = sorted_mse_gradient(attacker, inputs, targets)
        if not np.isfinite(loss):
            raise Divergence(step, loss)
        losses.append(loss)
        optimizer.step(grads)
    return losses


def plaintext_attack(
    pairs: Sequence[tuple],
    patch_size: int,
    kind: str = LINEAR,
    steps: int = ATTACK_STEPS,
    learning_rate: float = ATTACK_LEARNING_RATE,
    width: int | None = None,
    seed: int = ATTACK_SEED,
    eval_pairs: Sequence[tuple] | None = None,
) -> tuple[AttackerModel, AttackReport]:
    """Recover T from parallel (image, encoded) pairs.

    ``linear`` solves least squares over every patch (pseudo-inverse when rank deficient),
    which needs the targets in grid order. ``two-layer`` runs gradient descent on the
    canonical-sort MSE, for shuffled deep targets.
    """
    if not pairs:
        raise EmptySet("The plaintext attack needs at least one pair")
    images = [x for x, _ in pairs]
    targets = [np.asarray(z, dtype=np.float64) for _, z in pairs]
    eval_pairs = eval_pairs or pairs
    report = AttackReport("plaintext")
    if kind == LINEAR:
        X = _patch_rows(images, patch_size)
        Z = np.concatenate(targets)
        if len(X) != len(Z):
            raise DimMismatch(f"{len(X)} raw patches but {len(Z)} encoded patches")
        solution, _, rank, _ = np.linalg.lstsq(X, Z, rcond=None)
        attacker = AttackerModel.from_linear(solution.T, patch_size)
        if rank < X.shape[1]:
            report.rank_deficient = True
            logger.warning(
                "Plaintext patches have rank %s < input dimension %s; using the pseudo-inverse",
                rank,
                X.shape[1],
            )
        report.final_loss = float(np.mean((X @ solution - Z) ** 2))
    elif kind == TWO_LAYER:
        attacker = AttackerModel.initialize(
            TWO_LAYER,
            _patch_dim(images[0], patch_size),
            targets[0].shape[1],
            patch_size,
            width=width,
            seed=seed,
        )
        losses = fit_mse(attacker, images, targets, steps, learning_rate)
        report.losses = losses
        report.epochs_run = steps
        report.final_loss = sorted_mse_gradient(attacker, images, targets)[0]
    else:
        raise UnsupportedModel(f"Unknown attacker kind {kind!r}, expected {KINDS}")
    report.mse_ratio = mse_ratio(attacker, mean_baseline(targets), eval_pairs)
    logger.debug("Plaintext attack (%s): MSE ratio %s", kind, report.mse_ratio)
    return attacker, report


def permutation_fit(
    target: Predictor,
    images: Sequence[np.ndarray],
    permutation: Sequence[int],
    steps: int = ATTACK_STEPS,
    learning_rate: float = ATTACK_LEARNING_RATE,
    attacker: AttackerModel | None = None,
    patch_size: int | None = None,
    width: int | None = None,
    seed: int = ATTACK_SEED,
) -> tuple[AttackerModel, AttackReport]:
    """Fit T_π so that T_π(x_π(i)) matches T(x_i) under the canonical-sort MSE."""
    images = list(images)
    permutation = list(permutation)
    if not images:
        raise EmptySet("The permutation fit needs at least one sample")
    if sorted(permutation) != list(range(len(images))):
        raise DimMismatch(f"{permutation} is not a permutation of {len(images)} samples")
    targets = [np.asarray(target(x), dtype=np.float64) for x in images]
    inputs = [images[j] for j in permutation]
    if attacker is None:
        if patch_size is None:
            raise UnsupportedModel("A patch size is required to build a fresh attacker")
        in_dim = _patch_dim(images[0], patch_size)
        attacker = AttackerModel.initialize(
            TWO_LAYER, in_dim, targets[0].shape[1], patch_size, width=width, seed=seed
        )
    pairs = list(zip(inputs, targets))
    baseline = mean_baseline(targets)
    report = AttackReport("permfit")
    report.initial_mse_ratio = mse_ratio(attacker, baseline, pairs)
    report.losses = fit_mse(attacker, inputs, targets, steps, learning_rate)
    report.epochs_run = steps
    report.final_loss = sorted_mse_gradient(attacker, inputs, targets)[0]
    report.mse_ratio = mse_ratio(attacker, baseline, pairs)
    return attacker, report


def transfer_attack(
    T_star: Predictor,
    raw_images: Sequence[np.ndarray],
    raw_labels: Sequence[int],
    Z: Sequence[np.ndarray],
    Z_labels: Sequence[int],
    steps: int = ATTACK_STEPS,
    learning_rate: float = ATTACK_LEARNING_RATE,
    l2: float = 0.0,
) -> tuple[LogisticRegression, AttackReport]:
    """Train on mean-pooled T*(X) and evaluate on both Z* and the published Z.

    Each feature set is standardized with its own statistics.
    """
    raw_labels = np.asarray(raw_labels, dtype=np.int64)
    Z_labels = np.asarray(Z_labels, dtype=np.int64)
    if len(np.unique(raw_labels)) < 2 or len(np.unique(Z_labels)) < 2:
        raise SingleClassData("The transfer attack needs both classes in both datasets")
    z_star = mean_pool([T_star(x) for x in raw_images])
    z_pub = mean_pool(Z)
    if z_star.shape[1] != z_pub.shape[1]:
        raise DimMismatch(f"T* emits {z_star.shape[1]} dims, ciphertexts have {z_pub.shape[1]}")
    classifier = LogisticRegression(steps=steps, learning_rate=learning_rate, l2=l2)
    classifier.fit(z_star, raw_labels)
    report = AttackReport("transfer", epochs_run=steps)
    report.transfer_auc_on_zstar = roc_auc(classifier.decision_function(z_star), raw_labels)
    report.transfer_auc_on_z = roc_auc(
        classifier.decision_function(z_pub, own_statistics=True), Z_labels
    )
    report.final_loss = classifier.loss_
    logger.debug(
        "Transfer attack: AUC on Z*=%.4f, on Z=%.4f",
        report.transfer_auc_on_zstar,
        report.transfer_auc_on_z,
    )
    return classifier, report
