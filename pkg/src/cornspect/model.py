"""The binary kernel classifier: three conv blocks, a dense head, sigmoid output.

Each block is conv(3x3, stride 1, pad k//2) -> relu -> maxpool(2). The
flattened features feed Dense -> relu -> Dense(1) -> sigmoid, and the
decision rule sends probabilities <= 0.5 to Abnormal.

Parameters live in a plain ordered dict of named float64 arrays; forward
and backward are pure functions so a frozen parameter set is safe to
share across threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import ops
from .errors import DimensionError, UsageError, ValidationError

BCE_EPS = 1e-7
PARAM_NAMES = (
    "conv1_w", "conv1_b", "conv2_w", "conv2_b", "conv3_w", "conv3_b",
    "dense1_w", "dense1_b", "dense2_w", "dense2_b",
)


class KernelLabel(enum.Enum):
    """Classification outcome; encodes Normal -> 1.0, Abnormal -> 0.0."""

    NORMAL = "Normal"
    ABNORMAL = "Abnormal"

    def encode(self) -> float:
        return 1.0 if self is KernelLabel.NORMAL else 0.0

    @staticmethod
    def decode(value: float) -> "KernelLabel":
        if value == 1.0:
            return KernelLabel.NORMAL
        if value == 0.0:
            return KernelLabel.ABNORMAL
        raise ValidationError(f"label encoding must be 0.0 or 1.0, got {value}")

    @staticmethod
    def from_name(name: str) -> "KernelLabel":
        try:
            return KernelLabel(name)
        except ValueError:
            raise ValidationError(f"unknown label name {name!r}") from None


@dataclass(frozen=True)
class ModelConfig:
    """Architecture knobs for the 3-block classifier."""

    input_height: int = 64
    input_width: int = 64
    input_channels: int = 3
    conv_filters: tuple[int, int, int] = (16, 32, 64)
    kernel_size: int = 3
    dense_units: int = 64
    seed: int = 42

    def __post_init__(self):
        if self.input_height % 8 or self.input_width % 8:
            raise ValidationError(
                f"input {self.input_height}x{self.input_width} must be divisible by 8 "
                "(three pool halvings)"
            )
        if len(self.conv_filters) != 3 or min(self.conv_filters) < 1:
            raise ValidationError(f"need exactly 3 positive filter counts, got {self.conv_filters}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValidationError(f"kernel size must be odd and positive, got {self.kernel_size}")
        if self.dense_units < 1 or self.input_channels < 1:
            raise ValidationError("dense_units and input_channels must be positive")

    @property
    def flat_dim(self) -> int:
        return self.conv_filters[2] * (self.input_height // 8) * (self.input_width // 8)

    def conv_specs(self) -> tuple[ops.ConvSpec, ops.ConvSpec, ops.ConvSpec]:
        k = self.kernel_size
        chans = (self.input_channels,) + tuple(self.conv_filters)
        return tuple(
            ops.ConvSpec(chans[i], chans[i + 1], k, k, stride=1, padding=k // 2)
            for i in range(3)
        )

    def to_dict(self) -> dict:
        return {
            "input_height": self.input_height,
            "input_width": self.input_width,
            "input_channels": self.input_channels,
            "conv_filters": list(self.conv_filters),
            "kernel_size": self.kernel_size,
            "dense_units": self.dense_units,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "ModelConfig":
        d = dict(d)
        d["conv_filters"] = tuple(d["conv_filters"])
        return ModelConfig(**d)


def _he_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def _glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def build_model(config: ModelConfig) -> dict[str, np.ndarray]:
    """Initialize parameters: He-uniform into relu layers, Glorot at the output.

    Deterministic for a fixed config.seed (PCG64 stream); biases start at zero.
    """
    rng = np.random.Generator(np.random.PCG64(config.seed))
    k = config.kernel_size
    f1, f2, f3 = config.conv_filters
    c = config.input_channels
    params: dict[str, np.ndarray] = {}
    params["conv1_w"] = _he_uniform(rng, (f1, c, k, k), c * k * k)
    params["conv1_b"] = np.zeros(f1)
    params["conv2_w"] = _he_uniform(rng, (f2, f1, k, k), f1 * k * k)
    params["conv2_b"] = np.zeros(f2)
    params["conv3_w"] = _he_uniform(rng, (f3, f2, k, k), f2 * k * k)
    params["conv3_b"] = np.zeros(f3)
    params["dense1_w"] = _he_uniform(rng, (config.flat_dim, config.dense_units), config.flat_dim)
    params["dense1_b"] = np.zeros(config.dense_units)
    params["dense2_w"] = _glorot_uniform(rng, (config.dense_units, 1), config.dense_units, 1)
    params["dense2_b"] = np.zeros(1)
    return params


def parameter_count(config: ModelConfig) -> int:
    k2 = config.kernel_size**2
    f1, f2, f3 = config.conv_filters
    c = config.input_channels
    return (
        f1 * c * k2 + f1
        + f2 * f1 * k2 + f2
        + f3 * f2 * k2 + f3
        + config.flat_dim * config.dense_units + config.dense_units
        + config.dense_units + 1
    )


@dataclass
class ForwardCache:
    """Everything backward needs, keyed to the parameter set that made it."""

    params_id: int
    batch: np.ndarray
    conv_caches: list
    relu_inputs: list
    pool_caches: list
    flat: np.ndarray
    dense1_pre: np.ndarray
    hidden: np.ndarray
    probabilities: np.ndarray


def forward(
    params: dict[str, np.ndarray], batch: np.ndarray, config: ModelConfig
) -> tuple[np.ndarray, ForwardCache]:
    """Run the classifier on a batch (N,C,H,W); returns probabilities (N,)."""
    batch = np.ascontiguousarray(batch, dtype=np.float64)
    expected = (config.input_channels, config.input_height, config.input_width)
    if batch.ndim != 4 or batch.shape[1:] != expected:
        raise DimensionError(f"batch shape {batch.shape} != (N, {', '.join(map(str, expected))})")

    specs = config.conv_specs()
    x = batch
    conv_caches, relu_inputs, pool_caches = [], [], []
    for i, spec in enumerate(specs, start=1):
        x, ccache = ops.conv2d_forward(x, params[f"conv{i}_w"], params[f"conv{i}_b"], spec)
        conv_caches.append(ccache)
        relu_inputs.append(x)
        x = ops.relu(x)
        x, pcache = ops.maxpool2x2(x)
        pool_caches.append(pcache)

    n = batch.shape[0]
    flat = x.reshape(n, -1)
    dense1_pre = ops.matmul(flat, params["dense1_w"]) + params["dense1_b"]
    hidden = ops.relu(dense1_pre)
    logits = ops.matmul(hidden, params["dense2_w"]) + params["dense2_b"]
    probs = ops.sigmoid(logits[:, 0])
    cache = ForwardCache(
        id(params), batch, conv_caches, relu_inputs, pool_caches, flat, dense1_pre, hidden, probs
    )
    return probs, cache


def bce_loss(probabilities: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Binary cross-entropy and its gradient wrt the probabilities.

    Probabilities are clipped to [eps, 1-eps]; the gradient is exact for
    the clipped loss (zero where the clip is active).
    """
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if p.shape != y.shape:
        raise DimensionError(f"probabilities {p.shape} and targets {y.shape} differ")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValidationError("targets must be exactly 0.0 or 1.0")
    pc = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    loss = float(-np.mean(y * np.log(pc) + (1.0 - y) * np.log1p(-pc)))
    grad = np.where(
        (p > BCE_EPS) & (p < 1.0 - BCE_EPS),
        ((1.0 - y) / (1.0 - pc) - y / pc) / p.size,
        0.0,
    )
    return loss, grad


def backward(
    params: dict[str, np.ndarray], cache: ForwardCache, loss_grad: np.ndarray
) -> dict[str, np.ndarray]:
    """Gradients of the loss wrt every parameter, given d(loss)/d(probabilities)."""
    if cache.params_id != id(params):
        raise UsageError("cache was produced by a different parameter set")
    loss_grad = np.asarray(loss_grad, dtype=np.float64)
    if loss_grad.shape != cache.probabilities.shape:
        raise DimensionError(
            f"loss_grad shape {loss_grad.shape} != probabilities {cache.probabilities.shape}"
        )

    grads: dict[str, np.ndarray] = {}
    dz = ops.sigmoid_backward(cache.probabilities, loss_grad)[:, None]
    grads["dense2_w"] = ops.matmul(cache.hidden.T, dz)
    grads["dense2_b"] = dz.sum(axis=0)
    dhidden = ops.matmul(dz, params["dense2_w"].T)
    dpre = ops.relu_backward(cache.dense1_pre, dhidden)
    grads["dense1_w"] = ops.matmul(cache.flat.T, dpre)
    grads["dense1_b"] = dpre.sum(axis=0)
    dx = ops.matmul(dpre, params["dense1_w"].T)

    n = cache.batch.shape[0]
    pooled_shape = (
        n,
        cache.conv_caches[2].spec.out_channels,
        cache.pool_caches[2].argmax.shape[2],
        cache.pool_caches[2].argmax.shape[3],
    )
    dx = dx.reshape(pooled_shape)
    for i in (3, 2, 1):
        dx = ops.maxpool2x2_backward(cache.pool_caches[i - 1], dx)
        dx = ops.relu_backward(cache.relu_inputs[i - 1], dx)
        dx, dw, db = ops.conv2d_backward(cache.conv_caches[i - 1], dx)
        grads[f"conv{i}_w"] = dw
        grads[f"conv{i}_b"] = db
    return {name: grads[name] for name in PARAM_NAMES}


@dataclass(frozen=True)
class OptimizerConfig:
    """Update rule selection; Adam uses beta1=0.9, beta2=0.999, eps=1e-8."""

    kind: str = "adam"
    learning_rate: float = 1e-3

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValidationError(f"optimizer kind must be 'sgd' or 'adam', got {self.kind!r}")
        if self.learning_rate < 0:
            raise ValidationError("learning rate must be non-negative")


@dataclass
class OptimizerState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def optimizer_step(
    params: dict[str, np.ndarray],
    gradients: dict[str, np.ndarray],
    state: OptimizerState,
    config: OptimizerConfig,
) -> None:
    """Apply one in-place update; the training loop owns params exclusively."""
    if set(gradients) != set(params):
        missing = set(params).symmetric_difference(gradients)
        raise UsageError(f"gradient keys do not match parameters: {sorted(missing)}")
    lr = config.learning_rate
    if config.kind == "sgd":
        for name, p in params.items():
            p -= lr * gradients[name]
        state.step += 1
        return
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = gradients[name]
        if g.shape != p.shape:
            raise UsageError(f"gradient shape {g.shape} != parameter {p.shape} for {name!r}")
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)


def classify(probability: float) -> KernelLabel:
    """Decision rule: probability <= 0.5 is Abnormal, above 0.5 is Normal."""
    p = float(probability)
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"probability must lie in [0, 1], got {p}")
    return KernelLabel.ABNORMAL if p <= 0.5 else KernelLabel.NORMAL


def accuracy(predictions: list[KernelLabel], actuals: list[KernelLabel]) -> float:
    """Fraction of exact label matches."""
    if not predictions or len(predictions) != len(actuals):
        raise ValidationError(
            f"need equal-length non-empty lists, got {len(predictions)} vs {len(actuals)}"
        )
    hits = sum(1 for p, a in zip(predictions, actuals) if p is a)
    return hits / len(predictions)
