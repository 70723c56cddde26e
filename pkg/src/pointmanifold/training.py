"""Training loop, optimizer, learning-rate schedule and classification metrics.

The loop is plain mini-batch SGD with momentum under a cosine schedule. All
randomness (initialization, shuffling, dropout) is derived from one seed, so
two runs with the same configuration produce identical logs.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support

from .errors import ContractError, InvalidInputError, MissingCacheError, NumericalError
from .manifold import EmbeddingCache, augment_lle, cache_key, lle_embed
from .network.checkpoint import save_checkpoint
from .network.layers import softmax_cross_entropy
from .network.model import AUGMENTATIONS, ArchitectureSpec, PointManifoldNet
from .pointset import standardize

LOG_COLUMNS = ("epoch", "lr", "train_loss", "test_oa", "test_ma")
PROFILES = ("dgcnn", "toy")


@dataclass
class TrainConfig:
    """Optimization and architecture settings of one run.

    ``profile`` picks the base widths: ``"dgcnn"`` (64/64/128/256, 1024,
    512/256) or ``"toy"`` (a quarter of that, for CPU-scale experiments).
    ``lr_min_ratio`` sets the cosine floor as a fraction of ``lr0``. The
    width fields, when set, replace the profile's base widths (before the
    channel multiplier ``t`` is applied).
    """

    epochs: int = 250
    batch_size: int = 32
    lr0: float = 0.1
    momentum: float = 0.9
    dropout: float = 0.5
    seed: int = 0
    k_edgeconv: int = 20
    k_lle: int = 12
    t: int = 1
    mp_planes: int = 3
    dynamic_graph: bool = True
    profile: str = "dgcnn"
    dtype: str = "float32"
    eval_batch_size: int = 64
    lr_min_ratio: float = 1e-3
    # optional overrides of the profile's base widths
    edgeconv_widths: tuple | None = None
    embedding_width: int | None = None
    head_widths: tuple | None = None
    mp_hidden: int = 16

    def __post_init__(self):
        for name in ("epochs", "batch_size", "k_edgeconv", "k_lle", "t", "eval_batch_size", "mp_hidden"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise InvalidInputError(f"{name} must be a positive integer, got {value!r}")
        if self.batch_size < 2:
            raise InvalidInputError("batch_size must be >= 2 for batch normalization")
        if not self.lr0 > 0:
            raise InvalidInputError(f"lr0 must be positive, got {self.lr0}")
        if not 0 <= self.momentum < 1:
            raise InvalidInputError(f"momentum must be in [0, 1), got {self.momentum}")
        if not 0 <= self.dropout < 1:
            raise InvalidInputError(f"dropout must be in [0, 1), got {self.dropout}")
        if not 0 <= self.lr_min_ratio <= 1:
            raise InvalidInputError(f"lr_min_ratio must be in [0, 1], got {self.lr_min_ratio}")
        if self.mp_planes not in (1, 3):
            raise InvalidInputError(f"mp_planes must be 1 or 3, got {self.mp_planes}")
        if self.profile not in PROFILES:
            raise InvalidInputError(f"profile must be one of {PROFILES}, got {self.profile!r}")
        if self.dtype not in ("float32", "float64"):
            raise InvalidInputError(f"dtype must be float32 or float64, got {self.dtype!r}")

    def architecture(self, num_classes):
        """The :class:`ArchitectureSpec` this configuration describes."""
        kw = dict(
            t=self.t, k=self.k_edgeconv, num_classes=num_classes, dropout_rate=self.dropout,
            mp_planes=self.mp_planes, mp_hidden=self.mp_hidden, dynamic_graph=self.dynamic_graph,
        )
        for name in ("edgeconv_widths", "embedding_width", "head_widths"):
            if getattr(self, name) is not None:
                kw[name] = getattr(self, name)
        return ArchitectureSpec.toy(**kw) if self.profile == "toy" else ArchitectureSpec(**kw)

    def to_dict(self):
        d = asdict(self)
        for name in ("edgeconv_widths", "head_widths"):
            if d[name] is not None:
                d[name] = list(d[name])
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for name in ("edgeconv_widths", "head_widths"):
            if d.get(name) is not None:
                d[name] = tuple(d[name])
        return cls(**d)

    @classmethod
    def field_types(cls):
        return {f.name: f.type for f in fields(cls)}


# ---------------------------------------------------------------------------
# optimizer


def cosine_lr(epoch, epochs, lr0, lr_min_ratio=1e-3):
    """Cosine annealing from ``lr0`` towards ``lr0 * lr_min_ratio``."""
    if not 0 <= epoch < epochs:
        raise InvalidInputError(f"epoch must be in [0, {epochs}), got {epoch}")
    lr_min = lr0 * lr_min_ratio
    return lr_min + 0.5 * (lr0 - lr_min) * (1.0 + math.cos(math.pi * epoch / epochs))


def sgd_momentum_step(params, grads, velocity, lr, momentum):
    """In-place ``v <- momentum * v + g``; ``p <- p - lr * v`` for each triple.

    Returns ``(params, velocity)``.
    """
    if not len(params) == len(grads) == len(velocity):
        raise ContractError("params, grads and velocity must have the same length")
    for p, g, v in zip(params, grads, velocity):
        if not p.shape == g.shape == v.shape:
            raise ContractError(f"shape mismatch: param {p.shape}, grad {g.shape}, velocity {v.shape}")
        v *= momentum
        v += g
        p -= lr * v
    return params, velocity


# ---------------------------------------------------------------------------
# metrics


@dataclass
class MetricsReport:
    confusion: np.ndarray
    oA: float
    mA: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    class_names: list = field(default_factory=list)

    @classmethod
    def from_confusion(cls, confusion, class_names=None):
        confusion = np.asarray(confusion, dtype=np.int64)
        if confusion.ndim != 2 or confusion.shape[0] != confusion.shape[1]:
            raise InvalidInputError(f"confusion matrix must be square, got {confusion.shape}")
        if (confusion < 0).any():
            raise InvalidInputError("confusion matrix has negative counts")
        total = confusion.sum()
        if total == 0:
            raise InvalidInputError("confusion matrix is empty")
        n_classes = confusion.shape[0]
        diag = np.diag(confusion).astype(np.float64)
        support = confusion.sum(axis=1)
        predicted = confusion.sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            recall = np.where(support > 0, diag / support, 0.0)
            precision = np.where(predicted > 0, diag / predicted, 0.0)
            denom = precision + recall
            f1 = np.where(denom > 0, 2 * precision * recall / denom, 0.0)
        names = list(class_names) if class_names is not None else [str(i) for i in range(n_classes)]
        return cls(
            confusion=confusion,
            oA=float(diag.sum() / total),
            mA=float(recall[support > 0].mean()),
            precision=precision,
            recall=recall,
            f1=f1,
            support=support,
            class_names=names,
        )

    @classmethod
    def from_predictions(cls, y_true, y_pred, n_classes, class_names=None):
        y_true = np.asarray(y_true)
        if y_true.size == 0:
            raise InvalidInputError("cannot compute metrics on an empty split")
        cm = confusion_matrix(y_true, y_pred, labels=np.arange(n_classes))
        return cls.from_confusion(cm, class_names)

    def to_dict(self):
        return {
            "oA": self.oA,
            "mA": self.mA,
            "class_names": list(self.class_names),
            "confusion": self.confusion.tolist(),
            "per_class": {
                "precision": self.precision.tolist(),
                "recall": self.recall.tolist(),
                "f1": self.f1.tolist(),
                "support": self.support.tolist(),
            },
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d):
        pc = d["per_class"]
        return cls(
            confusion=np.asarray(d["confusion"], dtype=np.int64),
            oA=d["oA"],
            mA=d["mA"],
            precision=np.asarray(pc["precision"]),
            recall=np.asarray(pc["recall"]),
            f1=np.asarray(pc["f1"]),
            support=np.asarray(pc["support"], dtype=np.int64),
            class_names=list(d["class_names"]),
        )


def per_class_scores(y_true, y_pred, n_classes):
    """Library cross-check of the per-class precision/recall/F1 arrays."""
    p, r, f, s = precision_recall_fscore_support(
        y_true, y_pred, labels=np.arange(n_classes), zero_division=0
    )
    return p, r, f, s


# ---------------------------------------------------------------------------
# features


def prepare_features(clouds, augmentation="none", k_lle=12, cache=None, require_cache=False):
    """Stack standardized clouds into a ``(N, n, c)`` network input.

    For the LLE augmentations each cloud gets its 2-D embedding appended.
    With ``cache`` (an :class:`EmbeddingCache` or a directory) embeddings are
    read from disk; ``require_cache`` turns a miss into an error instead of
    computing the embedding in place.
    """
    if augmentation not in AUGMENTATIONS:
        raise InvalidInputError(f"unknown augmentation {augmentation!r}; expected one of {AUGMENTATIONS}")
    if not clouds:
        raise InvalidInputError("no clouds to prepare")
    sizes = {c.n for c in clouds}
    if len(sizes) != 1:
        raise ContractError(f"all clouds must have the same number of points, got sizes {sorted(sizes)}")
    if cache is not None and not isinstance(cache, EmbeddingCache):
        cache = EmbeddingCache(cache)
    out = []
    for cloud in clouds:
        pts = standardize(cloud).points
        if "lle" not in augmentation:
            out.append(pts)
            continue
        if cache is None:
            coords = lle_embed(pts, k_lle, 2).coords
        elif require_cache:
            coords = cache.get(cache_key(pts, k_lle, 2, method="lle"))
            if coords is None:
                raise MissingCacheError(
                    f"no cached LLE embedding for cloud {cloud.id!r} (k={k_lle}) in {cache.directory}; "
                    f"run `pointmanifold embed --method lle --k {k_lle}` on this manifest first"
                )
        else:
            coords, _ = cache.embed(pts, "lle", k_lle, 2)
        out.append(augment_lle(pts, k_lle, embedding=coords).values)
    return np.stack(out)


def labels_of(clouds):
    return np.array([c.label for c in clouds], dtype=np.int64)


# ---------------------------------------------------------------------------
# loop


def iterate_batches(n_items, batch_size, rng=None, drop_last=False):
    """Index arrays of consecutive batches, shuffled when ``rng`` is given."""
    order = rng.permutation(n_items) if rng is not None else np.arange(n_items)
    stop = n_items - n_items % batch_size if drop_last else n_items
    for start in range(0, stop, batch_size):
        yield order[start:start + batch_size]


def predict(model, X, batch_size=64, graph=None):
    return np.argmax(model.predict_logits(X, batch_size=batch_size, graph=graph), axis=1)


def input_graphs(model, X, batch_size=64):
    """First-layer graphs of every cloud in ``X``, or ``None`` if they depend on parameters."""
    if not model.fixed_input_graph:
        return None
    return np.concatenate([model.input_graph(X[i:i + batch_size]) for i in range(0, len(X), batch_size)])


def evaluate(model, X, y, class_names=None, batch_size=64, graph=None):
    """Eval-mode metrics of ``model`` on features ``X`` with labels ``y``."""
    X = np.asarray(X)
    y = np.asarray(y)
    if len(X) == 0:
        raise InvalidInputError("cannot evaluate on an empty split")
    if len(X) != len(y):
        raise ContractError(f"{len(X)} inputs but {len(y)} labels")
    pred = predict(model, X, batch_size, graph)
    return MetricsReport.from_predictions(y, pred, model.spec.num_classes, class_names)


def model_state(model):
    """Copies of every parameter and buffer, keyed by name."""
    state = {f"param:{n}": p.value.copy() for n, p in model.named_parameters()}
    state.update({f"buffer:{n}": b.copy() for n, b in model.named_buffers()})
    return state


def load_state(model, state):
    targets = {f"param:{n}": p.value for n, p in model.named_parameters()}
    targets.update({f"buffer:{n}": b for n, b in model.named_buffers()})
    for name, target in targets.items():
        target[...] = state[name]


@dataclass
class TrainResult:
    model: PointManifoldNet
    log: list
    best_epoch: int
    best_state: dict
    final_metrics: MetricsReport
    best_metrics: MetricsReport

    def best_model(self):
        """A fresh model holding the parameters of the best epoch."""
        m = PointManifoldNet(self.model.spec, self.model.augmentation, seed=0, dtype=self.model.dtype)
        load_state(m, self.best_state)
        return m


def write_epoch_log(path, log):
    """CSV with header ``epoch,lr,train_loss,test_oa,test_ma`` (floats in repr form)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LOG_COLUMNS)
        for row in log:
            w.writerow([row["epoch"]] + [repr(float(row[c])) for c in LOG_COLUMNS[1:]])


def read_epoch_log(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{"epoch": int(r["epoch"]), **{c: float(r[c]) for c in LOG_COLUMNS[1:]}} for r in rows]


def train(dataset, config, spec=None, augmentation="none", *, cache=None, require_cache=False,
          checkpoint_path=None, checkpoint_extra=None, features=None, callback=None):
    """Train a classifier on the ``train`` split, evaluating on ``test`` each epoch.

    Parameters
    ----------
    dataset : Dataset or None
        Needs non-empty ``train`` and ``test`` splits of equal-size clouds.
        May be ``None`` when ``features`` is given.
    config : TrainConfig
    spec : ArchitectureSpec, optional
        Defaults to ``config.architecture(len(dataset.class_names))``.
    augmentation : {"none", "lle", "mp", "lle+mp"}
    cache, require_cache
        Passed to :func:`prepare_features` for the LLE paths.
    checkpoint_path : str, optional
        Rewritten whenever the test oA improves on the best so far.
    checkpoint_extra : dict, optional
        JSON-able entries stored in every checkpoint next to the epoch and
        its test metrics.
    features : tuple, optional
        Precomputed ``(X_train, y_train, X_test, y_test)``; skips preparation.
    callback : callable, optional
        Called with each epoch's log row.

    Returns
    -------
    TrainResult
        The final-epoch model and metrics, plus the best epoch by test oA.

    Raises
    ------
    NumericalError
        If a batch loss is not finite; the message names epoch, batch and lr.
    """
    if features is None:
        if dataset is None:
            raise InvalidInputError("either a dataset or precomputed features are required")
        dataset.require_splits()
        train_clouds, test_clouds = dataset.subset("train"), dataset.subset("test")
        X_train = prepare_features(train_clouds, augmentation, config.k_lle, cache, require_cache)
        X_test = prepare_features(test_clouds, augmentation, config.k_lle, cache, require_cache)
        y_train, y_test = labels_of(train_clouds), labels_of(test_clouds)
    else:
        X_train, y_train, X_test, y_test = features
    y_train = np.asarray(y_train, dtype=np.int64)
    y_test = np.asarray(y_test, dtype=np.int64)
    class_names = dataset.class_names if dataset is not None else None
    if spec is None:
        n_classes = len(class_names) if class_names else int(max(y_train.max(), y_test.max())) + 1
        spec = config.architecture(n_classes)
    if len(X_train) < config.batch_size:
        raise InvalidInputError(
            f"training split has {len(X_train)} clouds, fewer than one batch of {config.batch_size}"
        )
    dtype = np.dtype(config.dtype)
    X_train = np.asarray(X_train, dtype=dtype)
    X_test = np.asarray(X_test, dtype=dtype)

    init_seed, shuffle_seed, dropout_seed = np.random.SeedSequence(config.seed).spawn(3)
    model = PointManifoldNet(spec, augmentation, seed=np.random.default_rng(init_seed), dtype=dtype)
    shuffle_rng = np.random.default_rng(shuffle_seed)
    dropout_rng = np.random.default_rng(dropout_seed)
    params = [p.value for p in model.parameters()]
    grads = [p.grad for p in model.parameters()]
    velocity = [np.zeros_like(p) for p in params]

    # the first layer's graph is fixed per cloud unless the gate feeds it
    train_graph = input_graphs(model, X_train)
    test_graph = input_graphs(model, X_test)

    log = []
    best = None
    for epoch in range(config.epochs):
        lr = cosine_lr(epoch, config.epochs, config.lr0, config.lr_min_ratio)
        losses = []
        for b, idx in enumerate(iterate_batches(len(X_train), config.batch_size, shuffle_rng, drop_last=True)):
            model.zero_grad()
            graph = None if train_graph is None else train_graph[idx]
            logits = model.forward(X_train[idx], train=True, rng=dropout_rng, graph=graph)
            loss, g = softmax_cross_entropy(logits, y_train[idx])
            if not np.isfinite(loss):
                raise NumericalError(f"non-finite training loss {loss} at epoch {epoch}, batch {b}, lr {lr:.6g}")
            model.backward(g.astype(dtype, copy=False))
            sgd_momentum_step(params, grads, velocity, lr, config.momentum)
            losses.append(loss)
        metrics = evaluate(model, X_test, y_test, class_names, config.eval_batch_size, test_graph)
        row = {"epoch": epoch, "lr": lr, "train_loss": float(np.mean(losses)),
               "test_oa": metrics.oA, "test_ma": metrics.mA}
        log.append(row)
        if callback is not None:
            callback(row)
        if best is None or metrics.oA > best[1].oA:
            best = (epoch, metrics, model_state(model))
            if checkpoint_path is not None:
                extra = dict(checkpoint_extra or {})
                extra.update(epoch=epoch, test_oa=metrics.oA, test_ma=metrics.mA)
                save_checkpoint(checkpoint_path, model, extra=extra)
    return TrainResult(model, log, best[0], best[2], metrics, best[1])
