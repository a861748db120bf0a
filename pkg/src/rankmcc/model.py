"""Instance-class scoring models.

The pipeline: an instance encoder maps features to an embedding h, a constant
1 is appended (folding the bias into the weights), every class owns a row of
an embedding table, and an interaction head turns (instance embedding, class
embedding) pairs into scores. The ``dot`` head makes this exactly the usual
dense classification layer — :func:`from_classical` packages that identity —
while the MLP heads (elementwise product or concatenation followed by a small
MLP) strictly generalize it.

All parameters are autodiff leaves; scoring builds a graph that losses can
backpropagate through.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, parameter

__all__ = [
    "InstanceEncoder",
    "ClassEmbeddingTable",
    "InteractionHead",
    "RankingModel",
    "INTERACTION_KINDS",
    "MLP_WIDTHS",
    "encode",
    "class_embed",
    "interact",
    "score_all",
    "score_matrix",
    "from_classical",
    "build_model",
    "save_checkpoint",
    "load_checkpoint",
]

INTERACTION_KINDS = ("dot", "lc_mlp", "concat_mlp")
MLP_WIDTHS = (64, 128, 256, 512)

CHECKPOINT_FORMAT = "rankmcc-checkpoint"
CHECKPOINT_VERSION = 1

_ACTIVATIONS = {"relu": ad.relu, "tanh": ad.tanh, "identity": lambda t: t}


def _uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _rng(seed_parts) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed_parts)))


def _sub_seed(seed, tag: int) -> list[int]:
    """Append a stream tag to an int-or-list seed, keeping entropy flat."""
    if isinstance(seed, (list, tuple)):
        return [*seed, tag]
    return [seed, tag]


@dataclass
class InstanceEncoder:
    """An MLP mapping raw features to an embedding, bias coordinate appended.

    ``layer_sizes`` is [d0, ..., dL]; with a single entry the encoder is the
    identity. Hidden layers use ``activation``; the final layer is linear.
    The forward output always carries a trailing constant-1 coordinate, so its
    width is dL + 1.
    """

    layer_sizes: list[int]
    activation: str
    weights: list[Tensor] = field(default_factory=list)
    biases: list[Tensor] = field(default_factory=list)

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @classmethod
    def init(cls, layer_sizes, activation: str = "relu", seed=0) -> "InstanceEncoder":
        rng = _rng(seed)
        enc = cls(list(layer_sizes), activation)
        for d_in, d_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            enc.weights.append(parameter(_uniform_init(rng, (d_out, d_in), d_in)))
            enc.biases.append(parameter(_uniform_init(rng, (d_out,), d_in)))
        return enc

    @classmethod
    def identity(cls, d0: int) -> "InstanceEncoder":
        return cls([d0], "identity")

    @property
    def out_dim(self) -> int:
        """Embedding width including the appended bias coordinate."""
        return self.layer_sizes[-1] + 1

    def forward(self, x: Tensor) -> Tensor:
        """[N, d0] -> [N, dL + 1]; the last column is exactly 1."""
        if x.shape[-1] != self.layer_sizes[0]:
            raise ValueError(
                f"encoder expects width {self.layer_sizes[0]}, got {x.shape[-1]}"
            )
        h = x
        act = _ACTIVATIONS[self.activation]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = ad.affine(h, w, b)
            if i != last:
                h = act(h)
        ones = np.ones((h.shape[0], 1))
        return ad.concat([h, Tensor(ones)], axis=1)

    def parameters(self) -> list[Tensor]:
        return [*self.weights, *self.biases]


@dataclass
class ClassEmbeddingTable:
    """One embedding row per class; row i scores class i."""

    table: Tensor

    def __post_init__(self):
        if self.table.ndim != 2 or self.table.shape[0] < 2:
            raise ValueError("class table must be [n, d+1] with n >= 2")

    @property
    def n_classes(self) -> int:
        return self.table.shape[0]

    @property
    def dim(self) -> int:
        return self.table.shape[1]


@dataclass
class InteractionHead:
    """Scores an (instance embedding, class embedding) pair.

    ``dot`` is parameter-free. The MLP kinds run two relu hidden layers of
    equal ``width`` and a linear scalar output; ``lc_mlp`` consumes the
    elementwise product of the embeddings, ``concat_mlp`` their concatenation.
    """

    kind: str
    width: int | None = None
    weights: list[Tensor] = field(default_factory=list)
    biases: list[Tensor] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in INTERACTION_KINDS:
            raise ValueError(
                f"unknown interaction {self.kind!r}; valid kinds: {', '.join(INTERACTION_KINDS)}"
            )

    @classmethod
    def init(cls, kind: str, embed_dim: int, width: int = 64, seed=0) -> "InteractionHead":
        if kind == "dot":
            return cls("dot")
        in_dim = embed_dim if kind == "lc_mlp" else 2 * embed_dim
        rng = _rng(seed)
        head = cls(kind, width)
        for d_in, d_out in ((in_dim, width), (width, width), (width, 1)):
            head.weights.append(parameter(_uniform_init(rng, (d_out, d_in), d_in)))
            head.biases.append(parameter(_uniform_init(rng, (d_out,), d_in)))
        return head

    def _mlp(self, z: Tensor) -> Tensor:
        h = z
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = ad.affine(h, w, b)
            if i != len(self.weights) - 1:
                h = ad.relu(h)
        return h

    def score_pairs(self, h_prime: Tensor, table: Tensor) -> Tensor:
        """[N, d+1] instance embeddings x [n, d+1] class table -> [N, n] scores."""
        n = table.shape[0]
        if self.kind == "dot":
            tt = Tensor(table.data.T, _parents=(table,))
            tt._pullback = lambda g: (g.T,)
            return h_prime @ tt
        batch = h_prime.shape[0]
        h_rep = ad.repeat_rows(h_prime, n)
        c_rep = ad.tile_rows(table, batch)
        if self.kind == "lc_mlp":
            z = h_rep * c_rep
        else:
            z = ad.concat([h_rep, c_rep], axis=1)
        return self._mlp(z).reshape(batch, n)

    def parameters(self) -> list[Tensor]:
        return [*self.weights, *self.biases]


@dataclass
class RankingModel:
    """Encoder + class embedding table + interaction head."""

    encoder: InstanceEncoder
    classes: ClassEmbeddingTable
    head: InteractionHead

    def __post_init__(self):
        expect = self.encoder.out_dim
        if self.classes.dim != expect:
            raise ValueError(
                f"class embedding width {self.classes.dim} does not match encoder output {expect}"
            )

    @property
    def n_classes(self) -> int:
        return self.classes.n_classes

    def forward(self, x: Tensor) -> Tensor:
        """[N, d0] features -> [N, n] class scores, differentiable."""
        h_prime = self.encoder.forward(x)
        return self.head.score_pairs(h_prime, self.classes.table)

    def parameters(self) -> list[Tensor]:
        return [*self.encoder.parameters(), self.classes.table, *self.head.parameters()]

    def state_arrays(self) -> list[np.ndarray]:
        return [p.data.copy() for p in self.parameters()]

    def load_state_arrays(self, arrays: list[np.ndarray]) -> None:
        params = self.parameters()
        if len(arrays) != len(params):
            raise ValueError("state array count does not match parameter count")
        for p, a in zip(params, arrays):
            if p.data.shape != a.shape:
                raise ValueError("state array shape mismatch")
            p.data = a.copy()


# -- functional operations ----------------------------------------------------


def encode(x, encoder: InstanceEncoder) -> Tensor:
    """Embed one feature vector (or an [N, d0] batch), bias coordinate last."""
    t = x if isinstance(x, Tensor) else Tensor(x)
    if t.ndim == 1:
        return encoder.forward(t.reshape(1, -1)).reshape(-1)
    return encoder.forward(t)


def class_embed(i: int, table: ClassEmbeddingTable) -> np.ndarray:
    """Row i of the class embedding table."""
    if not 0 <= i < table.n_classes:
        raise IndexError(f"class index {i} out of range [0, {table.n_classes})")
    return table.table.data[i].copy()


def interact(h_prime, c, head: InteractionHead) -> Tensor:
    """Score one (instance embedding, class embedding) pair."""
    h = h_prime if isinstance(h_prime, Tensor) else Tensor(h_prime)
    ct = c if isinstance(c, Tensor) else Tensor(c)
    if h.shape != ct.shape or h.ndim != 1:
        raise ValueError(f"embedding widths differ: {h.shape} vs {ct.shape}")
    return head.score_pairs(h.reshape(1, -1), ct.reshape(1, -1)).reshape(())


def score_all(x, model: RankingModel) -> Tensor:
    """Scores for every class given one feature vector (or a batch)."""
    t = x if isinstance(x, Tensor) else Tensor(x)
    if t.ndim == 1:
        return model.forward(t.reshape(1, -1)).reshape(-1)
    return model.forward(t)


def score_matrix(model: RankingModel, features: np.ndarray, chunk: int = 512) -> np.ndarray:
    """Forward-only scores for a feature matrix, chunked to bound graph size."""
    parts = []
    for start in range(0, features.shape[0], chunk):
        parts.append(model.forward(Tensor(features[start : start + chunk])).data)
    return np.concatenate(parts, axis=0)


def from_classical(w: np.ndarray, encoder: InstanceEncoder) -> RankingModel:
    """View a dense classification layer as a dot-interaction ranking model.

    The rows of ``w`` become the class embeddings, so scoring reproduces
    w @ [h, 1] exactly: same scores, same gradients, same argmax.
    """
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[1] != encoder.out_dim:
        raise ValueError(
            f"weight matrix {w.shape} does not match encoder output width {encoder.out_dim}"
        )
    return RankingModel(encoder, ClassEmbeddingTable(parameter(w.copy())), InteractionHead("dot"))


def build_model(
    n_classes: int,
    d0: int,
    embed_dim: int = 16,
    encoder_hidden: tuple[int, ...] = (32,),
    activation: str = "relu",
    head_kind: str = "dot",
    width: int = 64,
    seed: int = 0,
) -> RankingModel:
    """Freshly initialized model; all randomness derives from ``seed``."""
    encoder = InstanceEncoder.init(
        [d0, *encoder_hidden, embed_dim], activation, seed=_sub_seed(seed, 0)
    )
    table = ClassEmbeddingTable(
        parameter(_uniform_init(_rng(_sub_seed(seed, 1)),
                                (n_classes, embed_dim + 1), embed_dim + 1))
    )
    head = InteractionHead.init(head_kind, embed_dim + 1, width=width,
                                seed=_sub_seed(seed, 2))
    return RankingModel(encoder, table, head)


# -- checkpoint file format ----------------------------------------------------
#
# JSON with arrays stored as little-endian float64 bytes in base64:
#   {"format": "rankmcc-checkpoint", "version": 1,
#    "encoder": {"layer_sizes": [...], "activation": "...",
#                "weights": [ARR, ...], "biases": [ARR, ...]},
#    "classes": ARR,
#    "head": {"kind": "...", "width": W|null,
#             "weights": [ARR, ...], "biases": [ARR, ...]}}
# where ARR = {"shape": [...], "data": "<base64 of C-order <f8 bytes>"}.
# Round-trips are bit-exact.


def _pack(arr: np.ndarray) -> dict:
    le = np.ascontiguousarray(arr, dtype="<f8")
    return {"shape": list(arr.shape), "data": base64.b64encode(le.tobytes()).decode("ascii")}


def _unpack(obj: dict) -> np.ndarray:
    raw = base64.b64decode(obj["data"])
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(obj["shape"])


def save_checkpoint(model: RankingModel, path) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "encoder": {
            "layer_sizes": list(model.encoder.layer_sizes),
            "activation": model.encoder.activation,
            "weights": [_pack(w.data) for w in model.encoder.weights],
            "biases": [_pack(b.data) for b in model.encoder.biases],
        },
        "classes": _pack(model.classes.table.data),
        "head": {
            "kind": model.head.kind,
            "width": model.head.width,
            "weights": [_pack(w.data) for w in model.head.weights],
            "biases": [_pack(b.data) for b in model.head.biases],
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_checkpoint(path) -> RankingModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a {CHECKPOINT_FORMAT} file: {path}")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    enc_doc = doc["encoder"]
    encoder = InstanceEncoder(list(enc_doc["layer_sizes"]), enc_doc["activation"])
    encoder.weights = [parameter(_unpack(a)) for a in enc_doc["weights"]]
    encoder.biases = [parameter(_unpack(a)) for a in enc_doc["biases"]]
    table = ClassEmbeddingTable(parameter(_unpack(doc["classes"])))
    head_doc = doc["head"]
    head = InteractionHead(head_doc["kind"], head_doc["width"])
    head.weights = [parameter(_unpack(a)) for a in head_doc["weights"]]
    head.biases = [parameter(_unpack(a)) for a in head_doc["biases"]]
    return RankingModel(encoder, table, head)
