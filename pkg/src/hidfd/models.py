"""Fully connected networks: feature extractors, classifier heads, the
ADC-GAN discriminator and the conditional generator, plus checkpoint I/O.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensor as T
from .tensor import DimensionError, Tensor

ACTIVATIONS = ("relu", "linear")


class ConfigurationError(ValueError):
    """Networks were wired with incompatible dimensions."""


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


@dataclass
class Layer:
    weight: Tensor
    bias: Tensor
    activation: str = "relu"

    def __call__(self, x: Tensor) -> Tensor:
        h = T.add(T.matmul(x, self.weight), self.bias)
        return T.relu(h) if self.activation == "relu" else h


class FeatureNetwork:
    """A stack of dense layers; the output of the last layer is the feature."""

    def __init__(self, layers: list[Layer]):
        if not layers:
            raise ConfigurationError("a feature network needs at least one layer")
        self.layers = layers

    @classmethod
    def build(cls, dims, rng, activations=None) -> "FeatureNetwork":
        """``dims = [in, h1, ..., out]``; all layers use ReLU unless told otherwise."""
        n = len(dims) - 1
        acts = list(activations) if activations is not None else ["relu"] * n
        if len(acts) != n:
            raise ConfigurationError(f"{n} layers but {len(acts)} activations")
        layers = []
        for i in range(n):
            if acts[i] not in ACTIVATIONS:
                raise ConfigurationError(f"unknown activation {acts[i]!r}")
            w = Tensor(glorot(rng, dims[i], dims[i + 1]), requires_grad=True)
            b = Tensor(np.zeros(dims[i + 1]), requires_grad=True)
            layers.append(Layer(w, b, acts[i]))
        return cls(layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.layers[-1].weight.shape[1]

    @property
    def dims(self) -> list[int]:
        return [self.in_dim] + [layer.weight.shape[1] for layer in self.layers]

    @property
    def activations(self) -> list[str]:
        return [layer.activation for layer in self.layers]

    def __call__(self, x) -> Tensor:
        x = x if isinstance(x, Tensor) else Tensor._wrap(np.asarray(x, dtype=np.float64))
        if x.data.ndim != 2 or x.shape[1] != self.in_dim:
            raise DimensionError(f"feature network expects (B, {self.in_dim}), got {x.shape}")
        for layer in self.layers:
            x = layer(x)
        return x

    forward = __call__

    def parameters(self) -> list[Tensor]:
        out = []
        for layer in self.layers:
            out += [layer.weight, layer.bias]
        return out

    def copy(self) -> "FeatureNetwork":
        return FeatureNetwork([
            Layer(Tensor(l.weight.data, requires_grad=l.weight.requires_grad),
                  Tensor(l.bias.data, requires_grad=l.bias.requires_grad),
                  l.activation)
            for l in self.layers])


def forward_features(net: FeatureNetwork, x) -> Tensor:
    return net(x)


class ClassifierHead:
    def __init__(self, weight: Tensor, bias: Tensor | None = None):
        self.weight = weight
        self.bias = bias

    @classmethod
    def build(cls, feature_dim, num_classes, rng, bias=True) -> "ClassifierHead":
        w = Tensor(glorot(rng, feature_dim, num_classes), requires_grad=True)
        b = Tensor(np.zeros(num_classes), requires_grad=True) if bias else None
        return cls(w, b)

    @property
    def feature_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def num_classes(self) -> int:
        return self.weight.shape[1]

    def __call__(self, features: Tensor) -> Tensor:
        out = T.matmul(features, self.weight)
        return T.add(out, self.bias) if self.bias is not None else out

    def parameters(self) -> list[Tensor]:
        return [self.weight] + ([self.bias] if self.bias is not None else [])


def share_classifier(teacher: ClassifierHead, feature_dim: int | None = None) -> ClassifierHead:
    """Frozen, bit-identical copy of a teacher head for use by a student."""
    if feature_dim is not None and feature_dim != teacher.feature_dim:
        raise ConfigurationError(
            f"student feature_dim {feature_dim} != teacher feature_dim {teacher.feature_dim}")
    w = Tensor(teacher.weight.data.copy())
    b = Tensor(teacher.bias.data.copy()) if teacher.bias is not None else None
    return ClassifierHead(w, b)


class Classifier:
    """Feature extractor followed by a linear head (teacher, student, baseline)."""

    def __init__(self, phi: FeatureNetwork, head: ClassifierHead):
        if phi.feature_dim != head.feature_dim:
            raise ConfigurationError(
                f"head expects {head.feature_dim} features, extractor gives {phi.feature_dim}")
        self.phi = phi
        self.head = head

    @classmethod
    def build(cls, dims, num_classes, rng) -> "Classifier":
        phi = FeatureNetwork.build(dims, rng)
        return cls(phi, ClassifierHead.build(phi.feature_dim, num_classes, rng))

    @property
    def num_classes(self) -> int:
        return self.head.num_classes

    def features(self, x) -> Tensor:
        return self.phi(x)

    def __call__(self, x) -> Tensor:
        return self.head(self.phi(x))

    def predict(self, x) -> np.ndarray:
        with T.no_grad():
            return np.argmax(self(x).data, axis=1)

    def probabilities(self, x) -> np.ndarray:
        with T.no_grad():
            return np.exp(T.log_softmax(self(x)).data)

    def parameters(self) -> list[Tensor]:
        return self.phi.parameters() + self.head.parameters()

    def trainable(self) -> list[Tensor]:
        return [p for p in self.parameters() if p.requires_grad]

    def freeze(self) -> "Classifier":
        for p in self.parameters():
            p.requires_grad = False
        return self


class AdcDiscriminator:
    """Shared extractor with a real/fake score and a 2C-way (class, real/fake) classifier."""

    def __init__(self, phi: FeatureNetwork, adv_head: ClassifierHead,
                 class_real: Tensor, class_fake: Tensor):
        f = phi.feature_dim
        if adv_head.feature_dim != f or adv_head.num_classes != 1:
            raise ConfigurationError("adversarial head must map features to one score")
        if class_real.shape != class_fake.shape or class_real.shape[1] != f:
            raise ConfigurationError("class embeddings must both be (C, feature_dim)")
        self.phi = phi
        self.adv_head = adv_head
        self.class_real = class_real
        self.class_fake = class_fake

    @classmethod
    def build(cls, dims, num_classes, rng) -> "AdcDiscriminator":
        phi = FeatureNetwork.build(dims, rng)
        f = phi.feature_dim
        adv = ClassifierHead.build(f, 1, rng)
        real = Tensor(glorot(rng, num_classes, f), requires_grad=True)
        fake = Tensor(glorot(rng, num_classes, f), requires_grad=True)
        return cls(phi, adv, real, fake)

    @property
    def num_classes(self) -> int:
        return self.class_real.shape[0]

    def features(self, x) -> Tensor:
        return self.phi(x)

    def adv_logits(self, features: Tensor) -> Tensor:
        """Pre-sigmoid real/fake score per example, shape (B,)."""
        s = self.adv_head(features)
        return T.take(s, np.zeros(s.shape[0], dtype=np.int64))

    def class_logits(self, features: Tensor) -> Tensor:
        """(B, 2C) logits: first C columns real classes, last C fake classes."""
        emb = T.concat([self.class_real, self.class_fake], axis=0)
        return T.matmul(features, T.transpose(emb))

    def parameters(self) -> list[Tensor]:
        return self.phi.parameters() + self.adv_head.parameters() + [self.class_real, self.class_fake]


def adc_class_probs(d: AdcDiscriminator, x) -> np.ndarray:
    with T.no_grad():
        return np.exp(T.log_softmax(d.class_logits(d.features(x))).data)


class ConditionalGenerator:
    """Maps (z, y) to a data point; y enters through a learned embedding concatenated to z."""

    def __init__(self, embedding: Tensor, body: FeatureNetwork, z_dim: int):
        if body.in_dim != z_dim + embedding.shape[1]:
            raise ConfigurationError(
                f"body input {body.in_dim} != z_dim {z_dim} + embed {embedding.shape[1]}")
        self.embedding = embedding
        self.body = body
        self.z_dim = z_dim

    @classmethod
    def build(cls, num_classes, z_dim, embed_dim, hidden, data_dim, rng) -> "ConditionalGenerator":
        emb = Tensor(glorot(rng, num_classes, embed_dim), requires_grad=True)
        hidden = list(hidden)
        dims = [z_dim + embed_dim] + hidden + [data_dim]
        body = FeatureNetwork.build(dims, rng, ["relu"] * len(hidden) + ["linear"])
        return cls(emb, body, z_dim)

    @property
    def num_classes(self) -> int:
        return self.embedding.shape[0]

    @property
    def data_dim(self) -> int:
        return self.body.feature_dim

    def __call__(self, z, y) -> Tensor:
        y = np.asarray(y, dtype=np.int64)
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")
        z = z if isinstance(z, Tensor) else Tensor._wrap(np.asarray(z, dtype=np.float64))
        if z.data.ndim != 2 or z.shape[1] != self.z_dim or z.shape[0] != y.shape[0]:
            raise DimensionError(f"generator expects z of shape ({y.shape[0]}, {self.z_dim}), got {z.shape}")
        h = T.concat([z, T.gather_rows(self.embedding, y)], axis=1)
        return self.body(h)

    def parameters(self) -> list[Tensor]:
        return [self.embedding] + self.body.parameters()


def generate(g: ConditionalGenerator, z, y) -> Tensor:
    return g(z, y)


# -- checkpoints -----------------------------------------------------------

def _ints(s: str) -> list[int]:
    return [int(v) for v in s.split(",") if v]


def describe(net) -> dict[str, str]:
    """Architecture metadata sufficient to rebuild ``net`` before loading weights."""
    if isinstance(net, Classifier):
        return {"kind": "classifier", "phi_dims": ",".join(map(str, net.phi.dims)),
                "phi_acts": ",".join(net.phi.activations),
                "num_classes": str(net.num_classes),
                "head_bias": str(int(net.head.bias is not None)),
                "feature_dim": str(net.phi.feature_dim)}
    if isinstance(net, AdcDiscriminator):
        return {"kind": "discriminator", "phi_dims": ",".join(map(str, net.phi.dims)),
                "phi_acts": ",".join(net.phi.activations),
                "num_classes": str(net.num_classes), "feature_dim": str(net.phi.feature_dim)}
    if isinstance(net, ConditionalGenerator):
        return {"kind": "generator", "body_dims": ",".join(map(str, net.body.dims)),
                "body_acts": ",".join(net.body.activations),
                "num_classes": str(net.num_classes), "z_dim": str(net.z_dim),
                "embed_dim": str(net.embedding.shape[1])}
    raise TypeError(f"cannot describe {type(net).__name__}")


def _rebuild(meta: dict[str, str]):
    rng = np.random.default_rng(0)
    kind = meta["kind"]
    c = int(meta["num_classes"])
    if kind == "classifier":
        phi = FeatureNetwork.build(_ints(meta["phi_dims"]), rng, meta["phi_acts"].split(","))
        head = ClassifierHead.build(phi.feature_dim, c, rng, bias=meta["head_bias"] == "1")
        return Classifier(phi, head)
    if kind == "discriminator":
        phi = FeatureNetwork.build(_ints(meta["phi_dims"]), rng, meta["phi_acts"].split(","))
        f = phi.feature_dim
        return AdcDiscriminator(phi, ClassifierHead.build(f, 1, rng),
                                Tensor(np.zeros((c, f)), requires_grad=True),
                                Tensor(np.zeros((c, f)), requires_grad=True))
    if kind == "generator":
        dims = _ints(meta["body_dims"])
        body = FeatureNetwork.build(dims, rng, meta["body_acts"].split(","))
        emb = Tensor(np.zeros((c, int(meta["embed_dim"]))), requires_grad=True)
        return ConditionalGenerator(emb, body, int(meta["z_dim"]))
    raise ValueError(f"unknown network kind {kind!r}")


def flat_parameters(net) -> np.ndarray:
    return np.concatenate([p.data.ravel() for p in net.parameters()])


def parameter_digest(net) -> str:
    return hashlib.sha256(flat_parameters(net).astype("<f8").tobytes()).hexdigest()


def save_checkpoint(net, directory, name: str, **extra) -> Path:
    """Write ``name.manifest`` (key=value text) and ``name.f64`` (little-endian float64)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    flat = flat_parameters(net).astype("<f8")
    meta = describe(net)
    meta["param_shapes"] = ";".join("x".join(map(str, p.shape)) for p in net.parameters())
    meta["param_count"] = str(flat.size)
    meta["sha256"] = hashlib.sha256(flat.tobytes()).hexdigest()
    for k, v in extra.items():
        meta[k] = str(v)
    lines = [f"{k}={v}" for k, v in meta.items()]
    (directory / f"{name}.manifest").write_text("\n".join(lines) + "\n")
    (directory / f"{name}.f64").write_bytes(flat.tobytes())
    return directory / f"{name}.manifest"


def read_manifest(path) -> dict[str, str]:
    meta = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        meta[key.strip()] = value.strip()
    return meta


class CheckpointError(ValueError):
    """Missing, truncated or corrupted checkpoint."""


def load_checkpoint(directory, name: str):
    directory = Path(directory)
    mpath = directory / f"{name}.manifest"
    if not mpath.is_file() or not (directory / f"{name}.f64").is_file():
        raise CheckpointError(f"checkpoint {name!r} not found in {directory}")
    meta = read_manifest(mpath)
    net = _rebuild(meta)
    flat = np.frombuffer((directory / f"{name}.f64").read_bytes(), dtype="<f8")
    if flat.size != int(meta["param_count"]):
        raise CheckpointError(f"{name}: expected {meta['param_count']} values, found {flat.size}")
    if hashlib.sha256(flat.tobytes()).hexdigest() != meta["sha256"]:
        raise CheckpointError(f"{name}: checksum mismatch")
    offset = 0
    for p in net.parameters():
        n = p.data.size
        p.data = flat[offset:offset + n].astype(np.float64).reshape(p.shape)
        offset += n
    return net
