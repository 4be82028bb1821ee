"""Teacher-guided conditional GAN training.

The discriminator minimises the ADC-GAN loss plus feature blending and
feature transfer against the frozen teacher; the generator minimises the
ADC-GAN generator loss plus a class-balance regulariser weighted by
smoothed class frequencies of what it currently produces.

Sign conventions: the discriminator maximises the log-likelihood of
real examples under the real-class columns and of fakes under the fake
columns, so its minimisation form negates both. The generator loss is
used exactly as written, including the saturating log(1 - D(x_hat)) term.
"""
from __future__ import annotations

import contextlib
from dataclasses import asdict, dataclass, field

import numpy as np

from . import tensor as T
from .data import Dataset, batches
from .models import AdcDiscriminator, Classifier, ConditionalGenerator, FeatureNetwork
from .optim import Adam, guard
from .tensor import Tape, Tensor

FREQ_EPS = 1e-6


def _const(a) -> Tensor:
    return Tensor._wrap(np.asarray(a, dtype=np.float64))


def _phi(net) -> FeatureNetwork:
    return net.phi if isinstance(net, (Classifier, AdcDiscriminator)) else net


def _features_const(net, x) -> Tensor:
    with T.no_grad():
        return _const(_phi(net)(x).data)


@contextlib.contextmanager
def frozen(params):
    """Temporarily stop gradient tracking for ``params``."""
    saved = [p.requires_grad for p in params]
    for p in params:
        p.requires_grad = False
    try:
        yield
    finally:
        for p, s in zip(params, saved):
            p.requires_grad = s


# -- ADC-GAN ---------------------------------------------------------------

def _nonempty(n: int, what: str) -> None:
    if n == 0:
        raise ValueError(f"{what}: empty batch")


def adc_d_terms(d: AdcDiscriminator, real_feats: Tensor, real_y, fake_feats: Tensor, fake_y):
    """(adversarial, classification) parts of the discriminator loss."""
    c = d.num_classes
    s_real = d.adv_logits(real_feats)
    s_fake = d.adv_logits(fake_feats)
    adv = -(T.mean(T.log_sigmoid(s_real)) + T.mean(T.log_sigmoid(-s_fake)))
    lp_real = T.log_softmax(d.class_logits(real_feats))
    lp_fake = T.log_softmax(d.class_logits(fake_feats))
    cls = -(T.mean(T.take(lp_real, real_y)) + T.mean(T.take(lp_fake, np.asarray(fake_y) + c)))
    return adv, cls


def loss_adc_d(d: AdcDiscriminator, real_x, real_y, fake_x, fake_y) -> Tensor:
    _nonempty(len(real_y), "loss_adc_d")
    _nonempty(len(fake_y), "loss_adc_d")
    adv, cls = adc_d_terms(d, d.features(real_x), real_y, d.features(fake_x), fake_y)
    return adv + cls


def adc_g_terms(d: AdcDiscriminator, fake_feats: Tensor, fake_y):
    """(adversarial, classification) parts of the generator loss."""
    c = d.num_classes
    y = np.asarray(fake_y)
    adv = T.mean(T.log_sigmoid(-d.adv_logits(fake_feats)))
    lp = T.log_softmax(d.class_logits(fake_feats))
    cls = T.mean(T.take(lp, y + c)) - T.mean(T.take(lp, y))
    return adv, cls


def loss_adc_g(d: AdcDiscriminator, fake_x, fake_y) -> Tensor:
    _nonempty(len(fake_y), "loss_adc_g")
    adv, cls = adc_g_terms(d, d.features(fake_x), fake_y)
    return adv + cls


# -- feature integration ---------------------------------------------------

def blend_gate(p: float, q: float, invert: bool = False) -> bool:
    """Indicator I(p > q); ``invert`` fires on p < q instead."""
    return p < q if invert else p > q


def _blend(t_real: Tensor, t_fake: Tensor, d_real: Tensor, d_fake: Tensor) -> Tensor:
    return T.mean(T.distance(t_real, d_fake) + T.distance(t_fake, d_real))


def _trans(t_real: Tensor, t_fake: Tensor, d_real: Tensor, d_fake: Tensor) -> Tensor:
    return T.mean(T.distance(t_real, d_real) + T.distance(t_fake, d_fake))


def _pair_check(real_x, fake_x) -> None:
    if np.shape(real_x)[0] != np.shape(fake_x)[0]:
        raise ValueError(f"real batch of {np.shape(real_x)[0]} cannot pair with fake batch "
                         f"of {np.shape(fake_x)[0]}")


def _data(x):
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def loss_blend(teacher, d: AdcDiscriminator, real_x, fake_x, p: float, q: float,
               invert: bool = False) -> Tensor:
    """Cross real/fake feature matching, applied when the gate fires, else exactly 0."""
    _pair_check(_data(real_x), _data(fake_x))
    if not blend_gate(p, q, invert):
        return _const(0.0)
    t_real = _features_const(teacher, _data(real_x))
    t_fake = _features_const(teacher, _data(fake_x))
    return _blend(t_real, t_fake, d.features(real_x), d.features(fake_x))


def loss_trans(teacher, d: AdcDiscriminator, real_x, fake_x) -> Tensor:
    """Match discriminator features to teacher features on the same inputs."""
    _pair_check(_data(real_x), _data(fake_x))
    t_real = _features_const(teacher, _data(real_x))
    t_fake = _features_const(teacher, _data(fake_x))
    return _trans(t_real, t_fake, d.features(real_x), d.features(fake_x))


# -- category frequency smoothing -----------------------------------------

@dataclass
class ClassFrequencyTracker:
    n: np.ndarray
    gamma: float = 0.5
    t: int = 0

    def __post_init__(self):
        self.n = np.array(self.n, dtype=np.float64)
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if (self.n < 0).any():
            raise ValueError("frequencies must be non-negative")

    @classmethod
    def uniform(cls, num_classes: int, value: float, gamma: float = 0.5) -> "ClassFrequencyTracker":
        return cls(np.full(num_classes, float(value)), gamma)

    def update(self, counts) -> "ClassFrequencyTracker":
        counts = np.asarray(counts, dtype=np.float64)
        if counts.shape != self.n.shape:
            raise ValueError(f"expected {self.n.size} class counts, got {counts.shape}")
        self.n = (1.0 - self.gamma) * self.n + self.gamma * counts
        self.t += 1
        return self

    def normalized(self) -> np.ndarray:
        return normalized_frequencies(self)


def update_frequency(tracker: ClassFrequencyTracker, predicted_labels) -> ClassFrequencyTracker:
    """Return a new tracker advanced by one EMA step on the label counts."""
    counts = np.bincount(np.asarray(predicted_labels, dtype=np.int64), minlength=tracker.n.size)
    new = ClassFrequencyTracker(tracker.n.copy(), tracker.gamma, tracker.t)
    return new.update(counts)


def normalized_frequencies(tracker: ClassFrequencyTracker) -> np.ndarray:
    total = tracker.n.sum()
    if not total > 0:
        raise ValueError("class frequencies are all zero; normalisation undefined")
    return tracker.n / total


def loss_reg(teacher: Classifier, fake_x, n_hat) -> Tensor:
    """sum_c p_c log p_c / n_hat_c with p the batch-mean teacher softmax."""
    _nonempty(np.shape(_data(fake_x))[0], "loss_reg")
    w = 1.0 / np.maximum(np.asarray(n_hat, dtype=np.float64), FREQ_EPS)
    p = T.mean(T.softmax(teacher(fake_x)), axis=0)
    return T.sum(T.mul(T.mul(p, T.log(p)), _const(w)))


def entropy(counts) -> float:
    c = np.asarray(counts, dtype=np.float64)
    p = c[c > 0] / c.sum()
    return float(-(p * np.log(p)).sum())


# -- training --------------------------------------------------------------

@dataclass
class GanTrainConfig:
    lambda_d: float = 0.1
    lambda_g: float = 0.1
    q: float = 0.7
    gamma: float = 0.5
    lr_g: float = 1e-4
    lr_d: float = 4e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epochs: int = 500
    batch_size: int = 32
    seed: int = 0
    z_dim: int = 8
    embed_dim: int = 8
    gen_hidden: tuple[int, ...] = (64, 64)
    disc_hidden: tuple[int, ...] = (64,)
    freq_init: float | None = None  # None: batch_size / C
    freq_source: str = "teacher"  # or "labels"
    disable_blend: bool = False
    disable_trans: bool = False
    disable_reg: bool = False
    invert_blend_gate: bool = False

    def __post_init__(self):
        if self.lambda_d < 0 or self.lambda_g < 0:
            raise ValueError("trade-off weights must be non-negative")
        if not (0 <= self.q <= 1 and 0 <= self.gamma <= 1):
            raise ValueError("q and gamma must lie in [0, 1]")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be positive")
        if self.freq_source not in ("teacher", "labels"):
            raise ValueError(f"freq_source must be 'teacher' or 'labels', got {self.freq_source!r}")


@dataclass
class GanResult:
    generator: ConditionalGenerator
    discriminator: AdcDiscriminator
    metrics: list[dict] = field(default_factory=list)
    tracker: ClassFrequencyTracker | None = None

    def __iter__(self):
        return iter((self.generator, self.discriminator, self.metrics))


def build_gan(config: GanTrainConfig, num_classes: int, data_dim: int, feature_dim: int,
              rng: np.random.Generator):
    g = ConditionalGenerator.build(num_classes, config.z_dim, config.embed_dim,
                                   config.gen_hidden, data_dim, rng)
    d = AdcDiscriminator.build([data_dim, *config.disc_hidden, feature_dim], num_classes, rng)
    return g, d


def train_gan(config: GanTrainConfig, teacher: Classifier, collected: Dataset,
              log=None) -> GanResult:
    """Alternate discriminator and generator Adam steps over the collected data.

    ``log`` receives one metrics dict per epoch.
    """
    if len(collected) == 0:
        raise ValueError("collected dataset is empty")
    rng = np.random.default_rng(config.seed)
    C = collected.num_classes
    g, d = build_gan(config, C, collected.dim, teacher.phi.feature_dim, rng)
    opt_g = Adam(g.parameters(), config.lr_g, (config.beta1, config.beta2))
    opt_d = Adam(d.parameters(), config.lr_d, (config.beta1, config.beta2))
    B = min(config.batch_size, len(collected))
    init = B / C if config.freq_init is None else config.freq_init
    tracker = ClassFrequencyTracker.uniform(C, init, config.gamma)
    use_blend = config.lambda_d > 0 and not config.disable_blend
    use_trans = config.lambda_d > 0 and not config.disable_trans
    use_reg = config.lambda_g > 0 and not config.disable_reg
    metrics = []
    teacher_params = teacher.parameters()

    with frozen(teacher_params):
        for epoch in range(config.epochs):
            sums: dict[str, float] = {}
            hist = np.zeros(C, dtype=np.int64)
            real_hits = fake_hits = seen = 0
            steps = 0
            for idx in batches(len(collected), B, rng):
                b = idx.size
                xr, yr = collected.x[idx], collected.y[idx]
                z = rng.standard_normal((b, config.z_dim))
                yf = rng.integers(0, C, size=b)
                p = float(rng.random())

                with T.no_grad():
                    xf = g(z, yf).data
                    tr = _const(teacher.phi(xr).data)
                    tf_feats = teacher.phi(xf)
                    tf = _const(tf_feats.data)
                    pred = np.argmax(teacher.head(tf_feats).data, axis=1)

                # discriminator step
                with Tape() as tape:
                    fr, ff = d.features(xr), d.features(xf)
                    adv_d, cls_d = adc_d_terms(d, fr, yr, ff, yf)
                    adc_d = adv_d + cls_d
                    gate = blend_gate(p, config.q, config.invert_blend_gate)
                    blend = _blend(tr, tf, fr, ff) if gate else _const(0.0)
                    trans = _trans(tr, tf, fr, ff)
                    loss_d = adc_d
                    extra = None
                    if use_blend and gate:
                        extra = blend
                    if use_trans:
                        extra = trans if extra is None else extra + trans
                    if extra is not None:
                        loss_d = adc_d + config.lambda_d * extra
                if loss_d.requires_grad:
                    opt_d.step(T.backward(tape, loss_d))

                with T.no_grad():
                    s_real = d.adv_logits(d.features(xr)).data
                    s_fake = d.adv_logits(d.features(xf)).data
                real_hits += int((s_real > 0).sum())
                fake_hits += int((s_fake < 0).sum())
                seen += b

                # class frequency smoothing
                counted = pred if config.freq_source == "teacher" else yf
                tracker.update(np.bincount(counted, minlength=C))
                hist += np.bincount(pred, minlength=C)
                n_hat = tracker.normalized()

                # generator step
                with frozen(d.parameters()), Tape() as tape:
                    fake = g(z, yf)
                    adv_g, cls_g = adc_g_terms(d, d.features(fake), yf)
                    adc_g = adv_g + cls_g
                    reg = loss_reg(teacher, fake, n_hat)
                    loss_g = adc_g + config.lambda_g * reg if use_reg else adc_g
                opt_g.step(T.backward(tape, loss_g))

                row = {"loss_adc_d": adc_d.item(), "loss_adc_d_adv": adv_d.item(),
                       "loss_adc_d_cls": cls_d.item(), "loss_blend": blend.item(),
                       "loss_trans": trans.item(), "loss_d": loss_d.item(),
                       "loss_adc_g": adc_g.item(), "loss_adc_g_adv": adv_g.item(),
                       "loss_adc_g_cls": cls_g.item(), "loss_reg": reg.item(),
                       "loss_g": loss_g.item()}
                guard("train-gan", epoch, **row)
                for k, v in row.items():
                    sums[k] = sums.get(k, 0.0) + v
                steps += 1

            freq = hist / hist.sum()
            m = {"phase": "gan", "epoch": epoch}
            m.update({k: v / steps for k, v in sums.items()})
            m.update({"hist_entropy": entropy(hist), "hist_min_freq": float(freq.min()),
                      "d_real_acc": real_hits / seen, "d_fake_acc": fake_hits / seen})
            metrics.append(m)
            if log is not None:
                log(m)
    return GanResult(g, d, metrics, tracker)


def generate_synthetic(generator: ConditionalGenerator, per_class_counts, seed: int,
                       batch_size: int = 512) -> Dataset:
    """Labels are the conditioning labels, in class order."""
    counts = np.asarray(per_class_counts, dtype=np.int64)
    if counts.size != generator.num_classes or (counts < 0).any():
        raise ValueError("need one non-negative count per class")
    rng = np.random.default_rng(seed)
    y = np.repeat(np.arange(counts.size), counts)
    z = rng.standard_normal((y.size, generator.z_dim))
    parts = []
    with T.no_grad():
        for i in range(0, y.size, batch_size):
            parts.append(generator(z[i:i + batch_size], y[i:i + batch_size]).data)
    x = np.concatenate(parts) if parts else np.zeros((0, generator.data_dim))
    return Dataset(x, y, generator.num_classes, "synthetic")


def teacher_agreement(teacher: Classifier, ds: Dataset) -> float:
    if len(ds) == 0:
        raise ValueError("empty dataset")
    return float(np.mean(teacher.predict(ds.x) == ds.y))


def class_histogram(teacher: Classifier, ds: Dataset) -> np.ndarray:
    """Teacher-predicted class counts on a dataset."""
    return np.bincount(teacher.predict(ds.x), minlength=teacher.num_classes)


def config_dict(config: GanTrainConfig) -> dict:
    return asdict(config)
