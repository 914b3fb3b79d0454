"""Classifier assembly, the training loop, and prediction.

Two architectures share the same convolutional front end
(conv -> batchnorm -> relu -> maxpool per block):

* ``rcnn`` feeds the conv features, read as a sequence, into an LSTM and
  classifies from its final hidden state;
* ``cnn`` flattens the conv features into a dense hidden layer instead.

Both end in dropout and a dense layer producing 8 class logits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .engine import (
    Activation,
    BatchNorm1d,
    Conv1d,
    Dense,
    Dropout,
    Flatten,
    Lstm,
    MaxPool1d,
    TakeLastStep,
    ToSequence,
    sgd_step,
    softmax,
)
from .engine.activations import sigmoid
from .engine.loss import per_example_ce, softmax_cross_entropy
from .errors import BadArchitecture, ShapeMismatch
from .labels import N_CLASSES, ClassLabel
from .synth import Dataset

EVAL_BATCH = 512


@dataclass(frozen=True)
class ModelConfig:
    """Architecture description; everything the parameter shapes depend on."""

    arch: str = "rcnn"
    input_length: int = 96
    conv_blocks: tuple[tuple[int, int, int], ...] = ((16, 5, 2), (32, 5, 2))
    lstm_hidden: int = 64
    dense_hidden: int = 64
    n_classes: int = 8
    dropout_rate: float = 0.2
    use_batchnorm: bool = True

    def __post_init__(self):
        object.__setattr__(
            self, "conv_blocks", tuple(tuple(int(v) for v in block) for block in self.conv_blocks)
        )
        if self.arch not in ("rcnn", "cnn"):
            raise BadArchitecture(f"arch must be 'rcnn' or 'cnn', got {self.arch!r}")
        if self.n_classes != N_CLASSES:
            raise BadArchitecture(f"n_classes must be {N_CLASSES}, got {self.n_classes}")
        if not self.conv_blocks:
            raise BadArchitecture("at least one conv block is required")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise BadArchitecture(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.lstm_hidden < 1 or self.dense_hidden < 1 or self.input_length < 1:
            raise BadArchitecture("sizes must be positive")
        self.conv_stack_lengths()  # raises BadArchitecture when the stack collapses

    def conv_stack_lengths(self) -> list[int]:
        """Sequence length after each conv block (conv stride 1, valid)."""
        length = self.input_length
        out = []
        for filters, kernel, pool in self.conv_blocks:
            if filters < 1 or kernel < 1 or pool < 1:
                raise BadArchitecture(f"bad conv block ({filters}, {kernel}, {pool})")
            if length < kernel:
                raise BadArchitecture(
                    f"input length {length} too short for kernel {kernel} "
                    f"(input_length={self.input_length}, blocks={self.conv_blocks})"
                )
            length = length - kernel + 1
            if length < pool:
                raise BadArchitecture(
                    f"length {length} too short for pool window {pool} "
                    f"(input_length={self.input_length}, blocks={self.conv_blocks})"
                )
            length //= pool
            out.append(length)
        return out

    def to_dict(self) -> dict:
        return {
            "arch": self.arch,
            "input_length": self.input_length,
            "conv_blocks": [list(b) for b in self.conv_blocks],
            "lstm_hidden": self.lstm_hidden,
            "dense_hidden": self.dense_hidden,
            "n_classes": self.n_classes,
            "dropout_rate": self.dropout_rate,
            "use_batchnorm": self.use_batchnorm,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            arch=str(d["arch"]),
            input_length=int(d["input_length"]),
            conv_blocks=tuple(tuple(int(v) for v in b) for b in d["conv_blocks"]),
            lstm_hidden=int(d["lstm_hidden"]),
            dense_hidden=int(d["dense_hidden"]),
            n_classes=int(d["n_classes"]),
            dropout_rate=float(d["dropout_rate"]),
            use_batchnorm=bool(d["use_batchnorm"]),
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr: float = 0.01
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 2:
            raise ValueError(f"batch_size must be >= 2, got {self.batch_size}")
        if not self.lr > 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if not (isinstance(self.seed, int) and self.seed >= 0):
            raise ValueError("seed must be a non-negative integer")


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    train_acc: float
    test_loss: float
    test_acc: float


@dataclass
class TrainingHistory:
    records: list[EpochStats] = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("epoch,train_loss,train_acc,test_loss,test_acc\n")
            for r in self.records:
                fh.write(f"{r.epoch},{r.train_loss!r},{r.train_acc!r},{r.test_loss!r},{r.test_acc!r}\n")


class Model:
    """A built classifier: ordered layers plus the config that shaped them."""

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.training_meta: dict | None = None
        rng = np.random.default_rng(seed)
        layers: list[tuple[str, object]] = []
        channels = 1
        for bi, (filters, kernel, pool) in enumerate(config.conv_blocks, start=1):
            # bias is dropped when batchnorm follows: the normalization would
            # cancel it, leaving a parameter with an exactly-flat loss direction
            conv = Conv1d(channels, filters, kernel, stride=1,
                          bias=not config.use_batchnorm, rng=rng)
            layers.append((f"conv{bi}", conv))
            if config.use_batchnorm:
                layers.append((f"bn{bi}", BatchNorm1d(filters)))
            layers.append((f"relu{bi}", Activation("relu")))
            layers.append((f"pool{bi}", MaxPool1d(pool)))
            channels = filters
        final_len = config.conv_stack_lengths()[-1]
        if config.arch == "rcnn":
            layers.append(("to_seq", ToSequence()))
            layers.append(("lstm", Lstm(channels, config.lstm_hidden, rng=rng)))
            layers.append(("last", TakeLastStep()))
            layers.append(("dropout", Dropout(config.dropout_rate)))
            layers.append(("out", Dense(config.lstm_hidden, config.n_classes, "identity", rng=rng)))
        else:
            layers.append(("flatten", Flatten()))
            layers.append(("fc1", Dense(channels * final_len, config.dense_hidden, "relu", rng=rng)))
            layers.append(("dropout", Dropout(config.dropout_rate)))
            layers.append(("out", Dense(config.dense_hidden, config.n_classes, "identity", rng=rng)))
        self._layers = layers

    # -- forward / backward ------------------------------------------------

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        """[batch, 1, L] -> [batch, n_classes] logits."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[1] != 1 or x.shape[2] != self.config.input_length:
            raise ShapeMismatch(
                f"model expects [batch, 1, {self.config.input_length}], got {x.shape}"
            )
        for _, layer in self._layers:
            x = layer.forward(x, train)
        return x

    def backward(self, grad_logits: np.ndarray) -> np.ndarray:
        g = grad_logits
        for _, layer in reversed(self._layers):
            g = layer.backward(g)
        return g

    # -- parameter access ----------------------------------------------------

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        """Trainable arrays, named ``layer.param``, in a fixed order."""
        out = []
        for lname, layer in self._layers:
            for pname, arr in layer.params():
                out.append((f"{lname}.{pname}", arr))
        return out

    def gradients(self) -> list[np.ndarray]:
        """Gradient arrays aligned with ``parameters()``."""
        out = []
        for _, layer in self._layers:
            for _, arr in layer.grads():
                out.append(arr)
        return out

    def persistent_arrays(self) -> list[tuple[str, np.ndarray]]:
        """Everything a checkpoint must carry: parameters plus running stats."""
        out = list(self.parameters())
        for lname, layer in self._layers:
            for sname, arr in layer.state():
                out.append((f"{lname}.{sname}", arr))
        return out

    def set_dropout_seed(self, seed: int) -> None:
        for _, layer in self._layers:
            if isinstance(layer, Dropout):
                layer.seed = seed

    # -- losses --------------------------------------------------------------

    def loss_and_gradients(self, x, targets) -> tuple[float, list[np.ndarray]]:
        logits = self.forward(x, train=True)
        loss, grad_logits = softmax_cross_entropy(logits, targets)
        self.backward(grad_logits)
        return loss, self.gradients()

    def loss_only(self, x, targets) -> float:
        logits = self.forward(x, train=True)
        loss, _ = softmax_cross_entropy(logits, targets)
        return loss

    # -- inference -----------------------------------------------------------

    def eval_logits(self, features: np.ndarray, workspace: Workspace | None = None) -> np.ndarray:
        """[n, L] feature rows -> [n, n_classes] logits via the inference plan.

        The returned array is a view into ``workspace`` when one is passed;
        copy it out before the next call on the same workspace.
        """
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 2 or features.shape[1] != self.config.input_length:
            raise ShapeMismatch(
                f"expected [n, {self.config.input_length}] features, got {features.shape}"
            )
        return _InferencePlan(self).logits(features, workspace or Workspace())

    def predict_proba(self, features: np.ndarray, workspace: Workspace | None = None) -> np.ndarray:
        """[n, L] feature rows -> [n, n_classes] class probabilities (eval mode)."""
        return softmax(self.eval_logits(features, workspace))

    def predict(self, features) -> tuple[ClassLabel, np.ndarray]:
        """One feature vector -> (label, probabilities); argmax ties go to the
        lowest class index."""
        features = np.asarray(features, dtype=np.float64)
        if features.ndim != 1 or features.size != self.config.input_length:
            raise ShapeMismatch(
                f"expected {self.config.input_length} features, got shape {features.shape}"
            )
        probs = self.predict_proba(features[None, :])[0]
        return ClassLabel(int(probs.argmax())), probs


class Workspace:
    """Named scratch buffers reused across calls.

    Fresh multi-megabyte allocations cost more in page faults than the
    arithmetic they hold, so bulk prediction keeps one workspace per worker
    thread.  Buffers grow on demand and are handed out as shaped views."""

    def __init__(self):
        self._bufs: dict[str, np.ndarray] = {}

    def take(self, name: str, shape: tuple[int, ...]) -> np.ndarray:
        n = int(np.prod(shape))
        buf = self._bufs.get(name)
        if buf is None or buf.size < n:
            buf = np.empty(n)
            self._bufs[name] = buf
        return buf[:n].reshape(shape)


class _InferencePlan:
    """Precomputed eval-mode forward pass built for bulk prediction.

    Differences from the layer-by-layer path (same math, fewer passes):
    batch-norm scale/shift is folded into the conv kernels, data stays in
    channels-last [batch, L, C] layout so no transposes are needed between
    blocks, relu runs in place on the conv output, intermediates live in a
    reusable workspace, and the LSTM keeps only the rolling hidden state.
    Built fresh from the current parameters on every call and writes no
    shared state, so concurrent callers are safe.
    """

    def __init__(self, model: "Model"):
        self.config = model.config
        layers = dict(model._layers)
        self.blocks = []
        for bi, (filters, kernel, pool) in enumerate(self.config.conv_blocks, start=1):
            conv = layers[f"conv{bi}"]
            if self.config.use_batchnorm:
                bn = layers[f"bn{bi}"]
                scale = bn.gamma / np.sqrt(bn.running_var + bn.epsilon)
                shift = bn.beta - bn.running_mean * scale
                kernels = conv.kernels * scale[:, None, None]
            else:
                kernels = conv.kernels
                shift = conv.bias
            # [F, C, k] -> [k*C, F]: column j*C + c is kernel tap j of channel
            # c, matching the tap-major im2col fill below
            w2 = np.ascontiguousarray(kernels.transpose(0, 2, 1).reshape(filters, -1).T)
            self.blocks.append((kernel, conv.stride, pool, filters, w2, shift))
        if self.config.arch == "rcnn":
            lstm = layers["lstm"]
            w_x, w_h, b = lstm._stacked()
            # sigmoid(x) = 0.5 + 0.5*tanh(x/2): fold the /2 into the three
            # sigmoid-gate rows so one tanh over the full gate block suffices
            half = np.concatenate(
                [np.full(3 * lstm.hidden_size, 0.5), np.ones(lstm.hidden_size)]
            )
            self.lstm_w_x_t = np.ascontiguousarray((w_x * half[:, None]).T)
            self.lstm_w_h_t = np.ascontiguousarray((w_h * half[:, None]).T)
            self.lstm_b = b * half
            self.hidden = lstm.hidden_size
        else:
            fc1 = layers["fc1"]
            self.fc1_w_t = np.ascontiguousarray(fc1.weights.T)
            self.fc1_b = fc1.bias
        out = layers["out"]
        self.out_w_t = np.ascontiguousarray(out.weights.T)
        self.out_b = out.bias

    def logits(self, features: np.ndarray, ws: Workspace) -> np.ndarray:
        batch = features.shape[0]
        cur = features[:, :, None]  # [batch, L, 1], channels-last
        for bi, (kernel, stride, pool, filters, w2, shift) in enumerate(self.blocks):
            length, channels = cur.shape[1], cur.shape[2]
            l_out = (length - kernel) // stride + 1
            cols = ws.take(f"cols{bi}", (batch, l_out, kernel * channels))
            for j in range(kernel):
                cols[:, :, j * channels : (j + 1) * channels] = \
                    cur[:, j : j + stride * l_out : stride, :]
            out = ws.take(f"conv{bi}", (batch, l_out, filters))
            np.matmul(cols.reshape(batch * l_out, -1), w2,
                      out=out.reshape(batch * l_out, filters))
            if shift is not None:
                out += shift
            np.maximum(out, 0.0, out=out)
            n = l_out // pool
            xw = out[:, : n * pool].reshape(batch, n, pool, filters)
            pooled = ws.take(f"pool{bi}", (batch, n, filters))
            np.copyto(pooled, xw[:, :, 0])
            for j in range(1, pool):
                np.maximum(pooled, xw[:, :, j], out=pooled)
            cur = pooled
        if self.config.arch == "rcnn":
            steps, channels = cur.shape[1], cur.shape[2]
            hidden = self.hidden
            # step-major input layout keeps every per-step slice contiguous
            seq = ws.take("seq", (steps, batch, channels))
            seq[...] = cur.transpose(1, 0, 2)
            ax = ws.take("ax", (steps, batch, 4 * hidden))
            np.matmul(seq.reshape(steps * batch, channels), self.lstm_w_x_t,
                      out=ax.reshape(steps * batch, 4 * hidden))
            ax += self.lstm_b
            h = ws.take("h", (batch, hidden))
            c = ws.take("c", (batch, hidden))
            h[...] = 0.0
            c[...] = 0.0
            a = ws.take("a", (batch, 4 * hidden))
            tmp = ws.take("tmp", (batch, hidden))
            for t in range(steps):
                np.matmul(h, self.lstm_w_h_t, out=a)
                a += ax[t]
                np.tanh(a, out=a)  # sigmoid gates were pre-scaled by 1/2
                s = a[:, : 3 * hidden]
                s *= 0.5
                s += 0.5
                f = a[:, :hidden]
                i = a[:, hidden : 2 * hidden]
                o = a[:, 2 * hidden : 3 * hidden]
                g = a[:, 3 * hidden :]
                c *= f
                np.multiply(i, g, out=tmp)
                c += tmp
                np.tanh(c, out=tmp)
                np.multiply(o, tmp, out=h)
            feats = h
        else:
            # flatten in the training path's [batch, C, L] order
            steps, channels = cur.shape[1], cur.shape[2]
            flat = ws.take("flat", (batch, channels, steps))
            flat[...] = cur.transpose(0, 2, 1)
            flat = flat.reshape(batch, channels * steps)
            feats = ws.take("fc1", (batch, self.fc1_b.size))
            np.matmul(flat, self.fc1_w_t, out=feats)
            feats += self.fc1_b
            np.maximum(feats, 0.0, out=feats)
        logits = ws.take("logits", (batch, self.out_b.size))
        np.matmul(feats, self.out_w_t, out=logits)
        logits += self.out_b
        return logits


def build_model(config: ModelConfig, seed: int = 0) -> Model:
    """Construct a model with seed-deterministic initial parameters."""
    return Model(config, seed)


def _one_hot(labels: np.ndarray) -> np.ndarray:
    return np.eye(N_CLASSES)[labels]


def _eval_loss_acc(model: Model, features: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Mean cross-entropy and accuracy over a feature matrix, eval mode, batched."""
    losses = []
    correct = 0
    ws = Workspace()
    for start in range(0, features.shape[0], EVAL_BATCH):
        fb = features[start : start + EVAL_BATCH]
        yb = labels[start : start + EVAL_BATCH]
        logits = model.eval_logits(fb, ws)
        losses.append(per_example_ce(logits, yb))
        correct += int((logits.argmax(axis=1) == yb).sum())
    losses = np.concatenate(losses)
    return float(losses.mean()), correct / features.shape[0]


def train(model: Model, train_set: Dataset, test_set: Dataset,
          tc: TrainConfig) -> tuple[Model, TrainingHistory]:
    """Mini-batch SGD; returns the trained model and per-epoch history.

    Seed streams (all derived from ``tc.seed``):
    * shuffle order for epoch e: ``default_rng([seed, 1, e])``
    * dropout masks: one integer per step from ``default_rng([seed, 2])``
    Identical configs, data and seeds therefore reproduce training bit for bit.
    """
    x_train = train_set.features_matrix()
    y_train = train_set.labels_array()
    x_test = test_set.features_matrix()
    y_test = test_set.labels_array()
    for name, x in (("train", x_train), ("test", x_test)):
        if x.shape[0] == 0:
            raise ValueError(f"{name} set is empty")
        if x.shape[1] != model.config.input_length:
            raise ShapeMismatch(
                f"{name} features have length {x.shape[1]}, model expects "
                f"{model.config.input_length}"
            )
    targets = _one_hot(y_train)
    n = x_train.shape[0]
    n_batches = math.ceil(n / tc.batch_size)
    dropout_rng = np.random.default_rng([tc.seed, 2])
    params = [arr for _, arr in model.parameters()]
    history = TrainingHistory()
    for epoch in range(1, tc.epochs + 1):
        if tc.shuffle:
            order = np.random.default_rng([tc.seed, 1, epoch]).permutation(n)
        else:
            order = np.arange(n)
        for step in range(n_batches):
            idx = order[step * tc.batch_size : (step + 1) * tc.batch_size]
            model.set_dropout_seed(int(dropout_rng.integers(2**63)))
            logits = model.forward(x_train[idx][:, None, :], train=True)
            _, grad_logits = softmax_cross_entropy(logits, targets[idx])
            model.backward(grad_logits)
            sgd_step(params, model.gradients(), tc.lr)
        train_loss, train_acc = _eval_loss_acc(model, x_train, y_train)
        test_loss, test_acc = _eval_loss_acc(model, x_test, y_test)
        history.records.append(EpochStats(epoch, train_loss, train_acc, test_loss, test_acc))
    last = history.records[-1]
    model.training_meta = {
        "epochs": tc.epochs,
        "train_loss": last.train_loss,
        "train_acc": last.train_acc,
        "test_loss": last.test_loss,
        "test_acc": last.test_acc,
    }
    return model, history
