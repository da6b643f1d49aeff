"""Multi-head classifier over frozen text embeddings.

One shared input vector feeds an independent two-layer head per category:

    z_c      = dropout(h)
    hidden_c = tanh(W1_c z_c + b1_c)
    logits_c = W2_c dropout(hidden_c) + b2_c

Training minimizes the masked weighted cross-entropy

    L = (1 / |V|) * sum_c  w_c * [y_c >= 0] * CE(logits_c, y_c)

where V is the set of categories whose target is not masked (masked targets
use the sentinel ``MASK``), w_c is the category weight, and L = 0 when every
category is masked. The encoder producing h is frozen: only head parameters
are trained, with AdamW (decoupled weight decay) and early stopping on the
validation pooled macro F1.

Dropout is inverted (scaling by 1/(1-rate) at train time, identity at eval
time) and drawn independently per head, per example. All training arithmetic
is float64.

Checkpoint files start with magic ``FMHC`` and a format-version u32, then a
u32-length-prefixed JSON header (dim, hidden, dropout, category names,
label lists, weights) followed by each head's W1, b1, W2, b2 as row-major
little-endian float64, in category order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import metrics
from .dataio import SplitAssignment
from .embeddings import EmbeddingMatrix
from .errors import (
    BadMagic,
    DimensionMismatch,
    EmptySplit,
    LabelOutOfRange,
    NonFiniteLoss,
    SchemaMismatch,
    TruncatedFile,
)
from .taxonomy import DIMENSIONS, LABEL_SPACE, Dimension, FactRecord, LabelSet

MASK = -1

CHECKPOINT_MAGIC = int.from_bytes(b"FMHC", "little")
CHECKPOINT_VERSION = 1


@dataclass
class HeadParams:
    """Two affine maps of one classification head."""

    W1: np.ndarray  # (hidden, dim)
    b1: np.ndarray  # (hidden,)
    W2: np.ndarray  # (n_labels, hidden)
    b2: np.ndarray  # (n_labels,)

    def arrays(self) -> list[np.ndarray]:
        return [self.W1, self.b1, self.W2, self.b2]

    def copy(self) -> "HeadParams":
        return HeadParams(*(a.copy() for a in self.arrays()))


@dataclass
class MultiHeadModel:
    """Per-category heads plus the label space they predict into.

    ``label_weights``, when set, weights each category's cross-entropy by
    the gold label's weight (one nonnegative array per category); ``None``
    means uniform weighting.
    """

    dim: int
    hidden: int
    dropout_rate: float
    category_names: tuple[str, ...]
    label_space: tuple[tuple[str, ...], ...]
    category_weights: np.ndarray
    heads: list[HeadParams]
    label_weights: Optional[list[np.ndarray]] = None

    @property
    def n_categories(self) -> int:
        return len(self.category_names)

    def parameters(self) -> list[np.ndarray]:
        """All trainable arrays: W1, b1, W2, b2 per head, in category order."""
        out: list[np.ndarray] = []
        for head in self.heads:
            out.extend(head.arrays())
        return out

    def copy(self) -> "MultiHeadModel":
        return replace(
            self,
            category_weights=self.category_weights.copy(),
            heads=[head.copy() for head in self.heads],
            label_weights=(
                None
                if self.label_weights is None
                else [w.copy() for w in self.label_weights]
            ),
        )


def canonical_label_space() -> list[tuple[str, tuple[str, ...]]]:
    """The seven-dimension taxonomy as (name, labels) pairs."""
    return [(dim.value, LABEL_SPACE[dim]) for dim in DIMENSIONS]


def new_model(
    dim: int,
    label_space: Sequence[tuple[str, Sequence[str]]],
    hidden: Optional[int] = None,
    dropout_rate: float = 0.1,
    category_weights: Optional[Sequence[float]] = None,
    label_weights: Optional[Sequence[Sequence[float]]] = None,
    seed: int = 0,
) -> MultiHeadModel:
    """Fresh model with uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights."""
    if hidden is None:
        hidden = dim
    if not 0.0 <= dropout_rate < 1.0:
        raise ValueError("dropout_rate must lie in [0, 1)")
    names = tuple(name for name, _ in label_space)
    spaces = tuple(tuple(labels) for _, labels in label_space)
    if category_weights is None:
        weights = np.ones(len(names), dtype=np.float64)
    else:
        weights = np.asarray(category_weights, dtype=np.float64)
        if weights.shape != (len(names),) or np.any(weights < 0):
            raise ValueError("category_weights must be one nonnegative value per category")
    rng = np.random.default_rng(seed)
    heads = []
    for labels in spaces:
        n = len(labels)
        if n < 2:
            raise ValueError("every category needs at least two labels")
        bound1 = 1.0 / np.sqrt(dim)
        bound2 = 1.0 / np.sqrt(hidden)
        heads.append(
            HeadParams(
                W1=rng.uniform(-bound1, bound1, size=(hidden, dim)),
                b1=np.zeros(hidden, dtype=np.float64),
                W2=rng.uniform(-bound2, bound2, size=(n, hidden)),
                b2=np.zeros(n, dtype=np.float64),
            )
        )
    per_label = None
    if label_weights is not None:
        per_label = [np.asarray(w, dtype=np.float64) for w in label_weights]
        for w, labels in zip(per_label, spaces):
            if w.shape != (len(labels),) or np.any(w < 0):
                raise ValueError("label_weights must give one nonnegative value per label")
    return MultiHeadModel(
        dim=dim,
        hidden=hidden,
        dropout_rate=dropout_rate,
        category_names=names,
        label_space=spaces,
        category_weights=weights,
        heads=heads,
        label_weights=per_label,
    )


def inverse_frequency_label_weights(
    targets: np.ndarray, label_space: Sequence[tuple[str, Sequence[str]]]
) -> list[np.ndarray]:
    """Per-label weights N_c / (n_labels * count), from unmasked targets.

    Labels absent from ``targets`` get the weight a single occurrence would,
    so rare labels are never zeroed out.
    """
    targets = np.asarray(targets, dtype=np.int64)
    weights = []
    for c, (_, labels) in enumerate(label_space):
        column = targets[:, c]
        column = column[column >= 0]
        counts = np.bincount(column, minlength=len(labels)).astype(np.float64)
        total = counts.sum()
        if total == 0:
            weights.append(np.ones(len(labels), dtype=np.float64))
            continue
        weights.append(total / (len(labels) * np.maximum(counts, 1.0)))
    return weights


# ---------------------------------------------------------------------------
# forward / loss / backward


def _dropout_mask(rng, shape, rate: float) -> Optional[np.ndarray]:
    if rate == 0.0:
        return None
    return (rng.random(shape) >= rate) / (1.0 - rate)


def _forward_batch(
    model: MultiHeadModel,
    X: np.ndarray,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
):
    """Logits per head for a (B, dim) batch, plus the cache backward needs."""
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise DimensionMismatch(f"expected (*, {model.dim}) inputs, got {X.shape}")
    if train_mode and model.dropout_rate > 0.0 and rng is None:
        raise ValueError("train-mode dropout needs an RNG")
    logits: list[np.ndarray] = []
    cache = []
    for head in model.heads:
        m1 = _dropout_mask(rng, X.shape, model.dropout_rate) if train_mode else None
        z = X if m1 is None else X * m1
        a = z @ head.W1.T + head.b1
        t = np.tanh(a)
        m2 = _dropout_mask(rng, t.shape, model.dropout_rate) if train_mode else None
        u = t if m2 is None else t * m2
        logits.append(u @ head.W2.T + head.b2)
        cache.append((z, t, u, m2))
    return logits, cache


def forward(
    model: MultiHeadModel,
    h: np.ndarray,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> list[np.ndarray]:
    """Per-category logit vectors for one d-dimensional input."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (model.dim,):
        raise DimensionMismatch(f"expected a ({model.dim},) vector, got {h.shape}")
    logits, _ = _forward_batch(model, h[None, :], train_mode=train_mode, rng=rng)
    return [l[0] for l in logits]


def _check_targets(model: MultiHeadModel, targets: np.ndarray) -> np.ndarray:
    targets = np.asarray(targets, dtype=np.int64)
    if targets.ndim == 1:
        targets = targets[None, :]
    if targets.shape[1] != model.n_categories:
        raise DimensionMismatch(
            f"targets have {targets.shape[1]} categories, model has {model.n_categories}"
        )
    for c, labels in enumerate(model.label_space):
        column = targets[:, c]
        bad = (column < MASK) | (column >= len(labels))
        if np.any(bad):
            raise LabelOutOfRange(
                f"category {model.category_names[c]!r} target out of range: "
                f"{column[bad][0]}"
            )
    return targets


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(_log_softmax(np.atleast_2d(logits)))


def _gold_weights(model, targets, c, rows) -> np.ndarray:
    """Per-example CE scale for head c: w_c, times the gold label weight."""
    scale = np.full(rows.size, model.category_weights[c])
    if model.label_weights is not None:
        scale = scale * model.label_weights[c][targets[rows, c]]
    return scale


def _batch_loss_terms(model, logits, targets):
    """Per-example loss and per-head CE pieces shared by loss and backward."""
    B = targets.shape[0]
    valid = targets >= 0
    valid_counts = valid.sum(axis=1).astype(np.float64)
    contrib = np.zeros(B, dtype=np.float64)
    for c in range(model.n_categories):
        rows = np.flatnonzero(valid[:, c])
        if rows.size == 0:
            continue
        log_probs = _log_softmax(logits[c][rows])
        ce = -log_probs[np.arange(rows.size), targets[rows, c]]
        contrib[rows] += _gold_weights(model, targets, c, rows) * ce
    per_example = np.where(valid_counts > 0, contrib / np.maximum(valid_counts, 1.0), 0.0)
    return per_example, valid, valid_counts


def loss(model: MultiHeadModel, logits: Sequence[np.ndarray], target: np.ndarray) -> float:
    """Masked weighted cross-entropy for one example's logits."""
    targets = _check_targets(model, target)
    batch_logits = [np.atleast_2d(np.asarray(l, dtype=np.float64)) for l in logits]
    for c, l in enumerate(batch_logits):
        if l.shape[1] != len(model.label_space[c]):
            raise DimensionMismatch(
                f"category {model.category_names[c]!r} logits have width {l.shape[1]}"
            )
    per_example, _, _ = _batch_loss_terms(model, batch_logits, targets)
    return float(per_example[0])


def _loss_and_grads(
    model: MultiHeadModel,
    X: np.ndarray,
    targets: np.ndarray,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> tuple[float, list[np.ndarray]]:
    """Mean per-example loss over the batch and gradients for parameters()."""
    targets = _check_targets(model, targets)
    logits, cache = _forward_batch(model, X, train_mode=train_mode, rng=rng)
    per_example, valid, valid_counts = _batch_loss_terms(model, logits, targets)
    B = X.shape[0]
    total = float(per_example.mean())

    grads: list[np.ndarray] = []
    scale_rows = np.where(valid_counts > 0, 1.0 / np.maximum(valid_counts, 1.0), 0.0) / B
    for c, head in enumerate(model.heads):
        rows = np.flatnonzero(valid[:, c])
        if rows.size == 0:
            grads.extend(np.zeros_like(a) for a in head.arrays())
            continue
        z, t, u, m2 = cache[c]
        probs = np.exp(_log_softmax(logits[c][rows]))
        probs[np.arange(rows.size), targets[rows, c]] -= 1.0
        G = probs * (_gold_weights(model, targets, c, rows) * scale_rows[rows])[:, None]
        dW2 = G.T @ u[rows]
        db2 = G.sum(axis=0)
        dU = G @ head.W2
        if m2 is not None:
            dU = dU * m2[rows]
        dA = dU * (1.0 - t[rows] ** 2)
        dW1 = dA.T @ z[rows]
        db1 = dA.sum(axis=0)
        grads.extend([dW1, db1, dW2, db2])
    return total, grads


def backward(
    model: MultiHeadModel,
    h: np.ndarray,
    target: np.ndarray,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> list[np.ndarray]:
    """Exact gradients of loss(forward(h)) in ``parameters()`` order.

    With ``train_mode`` the dropout masks are drawn from ``rng`` and shared
    between the forward pass and the gradients; leave it off when gradient
    checking.
    """
    h = np.asarray(h, dtype=np.float64)
    if h.ndim == 1:
        h = h[None, :]
    _, grads = _loss_and_grads(model, h, target, train_mode=train_mode, rng=rng)
    return grads


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 10
    patience: int = 3
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    weight_decay: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.adam_beta1 < 1.0 and 0.0 < self.adam_beta2 < 1.0):
            raise ValueError("betas must lie strictly between 0 and 1")
        if self.adam_eps <= 0.0:
            raise ValueError("eps must be positive")
        if self.learning_rate < 0.0 or self.weight_decay < 0.0:
            raise ValueError("learning rate and weight decay must be nonnegative")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 0:
            raise ValueError("batch_size and max_epochs must be >= 1, patience >= 0")


@dataclass
class AdamState:
    step: int
    m: list[np.ndarray]
    v: list[np.ndarray]

    @classmethod
    def zeros_like(cls, params: Sequence[np.ndarray]) -> "AdamState":
        return cls(
            step=0,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adamw_step(
    state: AdamState,
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    config: TrainConfig,
) -> tuple[Sequence[np.ndarray], AdamState]:
    """One AdamW update with decoupled weight decay; mutates in place.

    p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise DimensionMismatch("params, grads, and state must align")
    state.step += 1
    b1, b2 = config.adam_beta1, config.adam_beta2
    bias1 = 1.0 - b1**state.step
    bias2 = 1.0 - b2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = (m / bias1) / (np.sqrt(v / bias2) + config.adam_eps)
        if config.weight_decay:
            update = update + config.weight_decay * p
        p -= config.learning_rate * update
    return params, state


# ---------------------------------------------------------------------------
# training loop


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    val_f1: float


@dataclass
class TrainResult:
    model: MultiHeadModel
    history: list[EpochStats]
    best_epoch: int
    best_val_f1: float


def targets_from_facts(
    facts: Sequence[FactRecord],
    label_space: Sequence[tuple[str, Sequence[str]]],
) -> np.ndarray:
    """Label indices per fact and category from canonical label strings."""
    columns = {name: {label: i for i, label in enumerate(labels)} for name, labels in label_space}
    out = np.empty((len(facts), len(columns)), dtype=np.int64)
    for i, fact in enumerate(facts):
        if fact.labels is None:
            raise ValueError(f"fact {fact.id!r} has no labels")
        for c, (name, _) in enumerate(label_space):
            out[i, c] = columns[name][getattr(fact.labels, name)]
    return out


def pooled_f1_indices(gold: np.ndarray, pred: np.ndarray) -> float:
    """Pooled macro F1 over (category, index) pairs, skipping masked gold."""
    gold = np.asarray(gold)
    pred = np.asarray(pred)
    pairs_gold = []
    pairs_pred = []
    for c in range(gold.shape[1]):
        for g, p in zip(gold[:, c], pred[:, c]):
            if g < 0:
                continue
            pairs_gold.append((c, int(g)))
            pairs_pred.append((c, int(p)))
    return metrics.macro_f1(pairs_gold, pairs_pred)


def predict_batch(model: MultiHeadModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eval-mode argmax indices and max-softmax confidences, per category.

    Ties go to the lowest label index.
    """
    logits, _ = _forward_batch(model, np.asarray(X, dtype=np.float64))
    indices = np.stack([l.argmax(axis=1) for l in logits], axis=1)
    confidences = np.stack(
        [softmax(l).max(axis=1) for l in logits], axis=1
    )
    return indices, confidences


def train(
    model: MultiHeadModel,
    embeddings: EmbeddingMatrix,
    targets: np.ndarray,
    split: SplitAssignment,
    config: TrainConfig,
) -> TrainResult:
    """Mini-batch training with early stopping on validation pooled F1.

    ``targets`` aligns row-for-row with ``embeddings``. Each epoch shuffles
    the training rows with a generator seeded from ``config.seed``, then
    takes AdamW steps per batch; after each epoch the validation pooled
    macro F1 decides whether this epoch's parameters become the kept
    snapshot. Training stops after ``patience`` consecutive epochs without
    improvement or at ``max_epochs``.
    """
    if not split.train or not split.val:
        raise EmptySplit("train and val splits must both be non-empty")
    targets = _check_targets(model, targets)
    if len(targets) != len(embeddings):
        raise DimensionMismatch("targets and embeddings rows must align")
    row_of = embeddings.index_of()
    try:
        train_rows = [row_of[i] for i in split.train]
        val_rows = [row_of[i] for i in split.val]
    except KeyError as exc:
        raise EmptySplit(f"id {exc.args[0]!r} missing from embeddings") from exc

    X_train = embeddings.rows[train_rows].astype(np.float64)
    T_train = targets[train_rows]
    X_val = embeddings.rows[val_rows].astype(np.float64)
    T_val = targets[val_rows]

    work = model.copy()
    params = work.parameters()
    state = AdamState.zeros_like(params)
    rng = np.random.default_rng(config.seed)

    best = work.copy()
    best_f1 = -np.inf
    best_epoch = 0
    since_best = 0
    history: list[EpochStats] = []

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(len(train_rows))
        seen = 0
        loss_sum = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            batch_loss, grads = _loss_and_grads(
                work, X_train[batch], T_train[batch], train_mode=True, rng=rng
            )
            if not np.isfinite(batch_loss):
                raise NonFiniteLoss(
                    f"epoch {epoch}, batch at {start}: loss={batch_loss}"
                )
            adamw_step(state, params, grads, config)
            loss_sum += batch_loss * len(batch)
            seen += len(batch)

        val_pred, _ = predict_batch(work, X_val)
        val_f1 = pooled_f1_indices(T_val, val_pred)
        history.append(EpochStats(epoch=epoch, train_loss=loss_sum / seen, val_f1=val_f1))

        if val_f1 > best_f1:
            best = work.copy()
            best_f1 = val_f1
            best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            # patience 0 means stop at the first epoch without improvement
            if since_best >= max(config.patience, 1):
                break

    return TrainResult(model=best, history=history, best_epoch=best_epoch, best_val_f1=best_f1)


def predict(
    model: MultiHeadModel, embeddings: EmbeddingMatrix
) -> list[tuple[LabelSet, dict[Dimension, float]]]:
    """Label sets and per-dimension confidences for every embedding row.

    Heads are read independently: the invalidity-reason prediction is not
    reconciled against the validity prediction, so the returned label sets
    may be internally inconsistent. The model must carry the canonical
    seven-dimension label space.
    """
    if tuple(model.category_names) != tuple(d.value for d in DIMENSIONS):
        raise SchemaMismatch("model does not carry the canonical seven dimensions")
    indices, confidences = predict_batch(model, embeddings.rows.astype(np.float64))
    results = []
    for i in range(indices.shape[0]):
        values = {
            name: model.label_space[c][indices[i, c]]
            for c, name in enumerate(model.category_names)
        }
        conf = {
            Dimension(name): float(confidences[i, c])
            for c, name in enumerate(model.category_names)
        }
        results.append((LabelSet(**values), conf))
    return results


# ---------------------------------------------------------------------------
# checkpoints


def save_model(path: Union[str, Path], model: MultiHeadModel) -> None:
    header = {
        "dim": model.dim,
        "hidden": model.hidden,
        "dropout_rate": model.dropout_rate,
        "categories": [
            {
                "name": name,
                "labels": list(labels),
                "weight": float(weight),
                "label_weights": (
                    None
                    if model.label_weights is None
                    else [float(w) for w in model.label_weights[c]]
                ),
            }
            for c, (name, labels, weight) in enumerate(
                zip(model.category_names, model.label_space, model.category_weights)
            )
        ],
    }
    blob = json.dumps(header, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as handle:
        handle.write(struct.pack("<3I", CHECKPOINT_MAGIC, CHECKPOINT_VERSION, len(blob)))
        handle.write(blob)
        for param in model.parameters():
            handle.write(np.ascontiguousarray(param, dtype="<f8").tobytes())


def load_model(path: Union[str, Path]) -> MultiHeadModel:
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise TruncatedFile(f"{path}: shorter than the checkpoint header")
    magic, version, blob_len = struct.unpack_from("<3I", data, 0)
    if magic != CHECKPOINT_MAGIC:
        raise BadMagic(f"{path}: not a model checkpoint")
    if version != CHECKPOINT_VERSION:
        raise BadMagic(f"{path}: unsupported checkpoint version {version}")
    offset = 12
    if len(data) < offset + blob_len:
        raise TruncatedFile(f"{path}: header JSON is short")
    header = json.loads(data[offset : offset + blob_len].decode("utf-8"))
    offset += blob_len
    dim = header["dim"]
    hidden = header["hidden"]
    heads = []
    for entry in header["categories"]:
        n = len(entry["labels"])
        shapes = [(hidden, dim), (hidden,), (n, hidden), (n,)]
        arrays = []
        for shape in shapes:
            count = int(np.prod(shape))
            if len(data) < offset + count * 8:
                raise TruncatedFile(f"{path}: parameter block is short")
            arrays.append(
                np.frombuffer(data, dtype="<f8", count=count, offset=offset)
                .reshape(shape)
                .copy()
            )
            offset += count * 8
        heads.append(HeadParams(*arrays))
    if offset != len(data):
        raise TruncatedFile(f"{path}: {len(data) - offset} trailing bytes")
    per_label = None
    if any(e.get("label_weights") is not None for e in header["categories"]):
        per_label = [
            np.asarray(
                e["label_weights"]
                if e.get("label_weights") is not None
                else [1.0] * len(e["labels"]),
                dtype=np.float64,
            )
            for e in header["categories"]
        ]
    return MultiHeadModel(
        dim=dim,
        hidden=hidden,
        dropout_rate=header["dropout_rate"],
        category_names=tuple(e["name"] for e in header["categories"]),
        label_space=tuple(tuple(e["labels"]) for e in header["categories"]),
        category_weights=np.asarray(
            [e["weight"] for e in header["categories"]], dtype=np.float64
        ),
        heads=heads,
        label_weights=per_label,
    )
