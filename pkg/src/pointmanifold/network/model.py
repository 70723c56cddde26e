"""Channel-controlled EdgeConv classifier with optional manifold features."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import hashlib

import numpy as np

from ..errors import ContractError, InvalidInputError
from ..neighbors import batched_knn
from .edgeconv import EdgeConv
from .layers import BatchNorm, Dropout, GlobalMaxPool, LeakyReLU, Layer, Linear
from .mp import MPGate

AUGMENTATIONS = ("none", "lle", "mp", "lle+mp")


@dataclass(frozen=True)
class ArchitectureSpec:
    """Base widths are multiplied by ``t`` everywhere except the logits layer."""

    t: int = 1
    edgeconv_widths: tuple = (64, 64, 128, 256)
    embedding_width: int = 1024
    head_widths: tuple = (512, 256)
    k: int = 20
    num_classes: int = 40
    dropout_rate: float = 0.5
    mp_planes: int = 3
    mp_hidden: int = 16
    dynamic_graph: bool = True

    def __post_init__(self):
        if isinstance(self.t, bool) or not isinstance(self.t, (int, np.integer)) or self.t < 1:
            raise InvalidInputError(f"channel multiplier t must be an integer >= 1, got {self.t!r}")
        if self.mp_planes not in (1, 3):
            raise InvalidInputError(f"mp_planes must be 1 or 3, got {self.mp_planes}")
        if len(self.edgeconv_widths) != 4:
            raise InvalidInputError("edgeconv_widths needs exactly four entries")
        if min(self.edgeconv_widths) < 1 or min(self.head_widths) < 1 or self.embedding_width < 1:
            raise InvalidInputError("layer widths must be positive")
        if self.k < 1 or self.mp_hidden < 1:
            raise InvalidInputError("k and mp_hidden must be positive")
        if len(self.head_widths) != 2:
            raise InvalidInputError("head_widths needs exactly two entries")
        if self.num_classes < 2:
            raise InvalidInputError("num_classes must be >= 2")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidInputError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        object.__setattr__(self, "edgeconv_widths", tuple(int(w) for w in self.edgeconv_widths))
        object.__setattr__(self, "head_widths", tuple(int(w) for w in self.head_widths))

    @classmethod
    def toy(cls, **overrides):
        """Small profile used by tests and the desk-scale benchmark."""
        base = dict(edgeconv_widths=(16, 16, 32, 64), embedding_width=128, head_widths=(64, 32))
        base.update(overrides)
        return cls(**base)

    @property
    def scaled_edgeconv_widths(self):
        return tuple(w * self.t for w in self.edgeconv_widths)

    @property
    def scaled_embedding_width(self):
        return self.embedding_width * self.t

    @property
    def scaled_head_widths(self):
        return tuple(w * self.t for w in self.head_widths)

    @property
    def plane_indices(self):
        # a single plane is z = 0
        return (2,) if self.mp_planes == 1 else (0, 1, 2)

    def data_width(self, augmentation):
        """Channels the caller supplies: xyz, plus LLE coordinates if used."""
        _check_augmentation(augmentation)
        return 5 if "lle" in augmentation else 3

    def input_width(self, augmentation):
        """Channels entering the first EdgeConv layer."""
        width = self.data_width(augmentation)
        if "mp" in augmentation:
            width += 2 * self.mp_planes
        return width

    def to_dict(self):
        d = asdict(self)
        d["edgeconv_widths"] = list(self.edgeconv_widths)
        d["head_widths"] = list(self.head_widths)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["edgeconv_widths"] = tuple(d["edgeconv_widths"])
        d["head_widths"] = tuple(d["head_widths"])
        return cls(**d)


def _check_augmentation(augmentation):
    if augmentation not in AUGMENTATIONS:
        raise InvalidInputError(f"unknown augmentation {augmentation!r}; expected one of {AUGMENTATIONS}")


class PointManifoldNet(Layer):
    """EdgeConv x4 -> concat -> shared perceptron -> max pool -> 3-layer head.

    ``forward`` takes a ``(B, n, c)`` batch where ``c`` is
    ``spec.data_width(augmentation)`` and returns ``(B, num_classes)`` logits.
    """

    name = "model"

    def __init__(self, spec, augmentation="none", seed=0, dtype=np.float64):
        _check_augmentation(augmentation)
        self.spec = spec
        self.augmentation = augmentation
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        self.mp = MPGate(spec.plane_indices, spec.mp_hidden, rng=rng, dtype=dtype) if "mp" in augmentation else None
        widths = spec.scaled_edgeconv_widths
        c_in = spec.input_width(augmentation)
        self.edgeconvs = []
        for i, w in enumerate(widths):
            self.edgeconvs.append(EdgeConv(c_in, w, k=spec.k, rng=rng, dtype=dtype, name=f"edgeconv{i}"))
            c_in = w
        emb = spec.scaled_embedding_width
        h1, h2 = spec.scaled_head_widths
        self.embed = Linear(sum(widths), emb, bias=False, rng=rng, dtype=dtype, name="embed")
        self.embed_bn = BatchNorm(emb, dtype=dtype, name="embed_bn")
        self.embed_act = LeakyReLU(name="embed_act")
        self.pool = GlobalMaxPool()
        self.fc1 = Linear(emb, h1, bias=False, rng=rng, dtype=dtype, name="fc1")
        self.bn1 = BatchNorm(h1, dtype=dtype, name="bn1")
        self.act1 = LeakyReLU(name="act1")
        self.drop1 = Dropout(spec.dropout_rate, name="drop1")
        self.fc2 = Linear(h1, h2, bias=False, rng=rng, dtype=dtype, name="fc2")
        self.bn2 = BatchNorm(h2, dtype=dtype, name="bn2")
        self.act2 = LeakyReLU(name="act2")
        self.drop2 = Dropout(spec.dropout_rate, name="drop2")
        self.logits = Linear(h2, spec.num_classes, bias=True, rng=rng, dtype=dtype, name="logits")
        self._widths = None

    # -- structure ---------------------------------------------------------

    def layer_widths(self):
        """Output width of every layer in order, logits last."""
        return (
            [ec.out_features for ec in self.edgeconvs]
            + [self.embed.out_features, self.fc1.out_features, self.fc2.out_features, self.logits.out_features]
        )

    def parameter_count(self):
        return int(sum(p.value.size for p in self.parameters()))

    def margin(self):
        """Smallest distance of the last forward from a kink, max tie or kNN swap.

        Only meaningful after a forward with margin tracking switched on.
        """
        vals = [self.embed_act.kink_margin, self.act1.kink_margin, self.act2.kink_margin, self.pool.tie_margin]
        for ec in self.edgeconvs:
            vals += [ec.kink_margin, ec.tie_margin, ec.knn_margin]
        if self.mp is not None:
            vals.append(self.mp.kink_margin)
        return float(min(vals))

    def activation_pattern(self):
        """Digest of every discrete choice made by the last forward.

        Covers activation signs, max winners, neighbor sets and pooled
        argmaxes. Two inputs with the same digest lie in the same smooth piece
        of the network, which is what finite-difference checks require.
        """
        digest = hashlib.sha256()
        parts = [self.embed_act.pattern(), self.act1.pattern(), self.act2.pattern(), self.pool.pattern()]
        for ec in self.edgeconvs:
            parts.append(ec.pattern())
        if self.mp is not None:
            parts += [self.mp.act1.pattern(), self.mp.act2.pattern()]
        for part in parts:
            digest.update(np.ascontiguousarray(part).tobytes())
        return digest.hexdigest()

    # -- computation -------------------------------------------------------

    @property
    def fixed_input_graph(self):
        """Whether the first layer's graph depends on the input batch alone.

        True unless the learnable projection gate feeds the first layer.
        """
        return self.mp is None or not self.spec.dynamic_graph

    def input_graph(self, x):
        """Neighbor indices the first EdgeConv layer would compute for ``x``.

        Lets callers compute the graph once per cloud and pass it back to
        :meth:`forward`; only valid when :attr:`fixed_input_graph` is true.
        """
        if not self.fixed_input_graph:
            raise ContractError("model: the first-layer graph depends on learnable gates")
        x = self._check_input(x)
        return batched_knn(x if self.spec.dynamic_graph else x[..., :3], self.spec.k)

    def _check_input(self, x):
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim != 3:
            raise ContractError(f"model: expected (B, n, c) batch, got shape {x.shape}")
        expected = self.spec.data_width(self.augmentation)
        if x.shape[-1] != expected:
            raise ContractError(
                f"model[{self.augmentation}]: expected {expected} input channels, got {x.shape[-1]}"
            )
        return x

    def forward(self, x, train=False, rng=None, graph=None):
        """Logits for a ``(B, n, c)`` batch.

        ``graph`` optionally supplies :meth:`input_graph` for this batch.
        """
        x = self._check_input(x)
        if graph is not None and not self.fixed_input_graph:
            raise ContractError("model: a precomputed graph needs a fixed first-layer input")
        if self.mp is not None:
            gated = self.mp.forward(x[..., :3])
            feats = np.concatenate([x, gated[..., 3:]], axis=-1)
        else:
            feats = x
        shared = None
        if not self.spec.dynamic_graph:
            shared = graph if graph is not None else batched_knn(x[..., :3], self.spec.k)
        outs = []
        h = feats
        for i, ec in enumerate(self.edgeconvs):
            layer_graph = shared
            if i == 0 and graph is not None:
                layer_graph = graph
            h = ec.forward(h, graph=layer_graph, train=train)
            outs.append(h)
        self._widths = [o.shape[-1] for o in outs]
        h = np.concatenate(outs, axis=-1)
        h = self.embed_act.forward(self.embed_bn.forward(self.embed.forward(h), train=train))
        h = self.pool.forward(h)
        h = self.drop1.forward(self.act1.forward(self.bn1.forward(self.fc1.forward(h), train=train)), train, rng)
        h = self.drop2.forward(self.act2.forward(self.bn2.forward(self.fc2.forward(h), train=train)), train, rng)
        return self.logits.forward(h)

    def backward(self, grad):
        """Backpropagate ``d loss / d logits``; returns the gradient for the input batch."""
        g = self.logits.backward(grad)
        g = self.fc2.backward(self.bn2.backward(self.act2.backward(self.drop2.backward(g))))
        g = self.fc1.backward(self.bn1.backward(self.act1.backward(self.drop1.backward(g))))
        g = self.pool.backward(g)
        g = self.embed.backward(self.embed_bn.backward(self.embed_act.backward(g)))
        splits = np.cumsum(self._widths)[:-1]
        pieces = np.split(g, splits, axis=-1)
        carry = np.zeros_like(pieces[-1])
        for ec, piece in zip(reversed(self.edgeconvs), reversed(pieces)):
            carry = ec.backward(piece + carry)
        if self.mp is None:
            return carry
        width = self.spec.data_width(self.augmentation)
        g_x = carry[..., :width].copy()
        g_mp = np.concatenate([np.zeros_like(carry[..., :3]), carry[..., width:]], axis=-1)
        g_x[..., :3] += self.mp.backward(g_mp)
        return g_x

    def predict_logits(self, x, batch_size=64, graph=None):
        """Eval-mode logits in chunks; ``graph`` as in :meth:`forward`, for all of ``x``."""
        x = np.asarray(x)
        chunks = []
        for i in range(0, len(x), batch_size):
            g = None if graph is None else graph[i:i + batch_size]
            chunks.append(self.forward(x[i:i + batch_size], train=False, graph=g))
        return np.concatenate(chunks)


def build_model(spec, augmentation="none", seed=0, dtype=np.float64):
    return PointManifoldNet(spec, augmentation, seed=seed, dtype=dtype)
