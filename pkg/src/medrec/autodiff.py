"""Dense float64 tensors with reverse-mode gradients.

Provides the small set of primitives the graph models need (matmul,
broadcasting arithmetic, activations, reductions, row gather/concat and
batch normalization built from primitives), an Adam optimizer, a 2-layer
MLP block and a finite-difference gradient checker.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import DivergenceError, ShapeError

__all__ = [
    "Tensor",
    "Tape",
    "Mlp",
    "Adam",
    "grad_check",
    "init_weight",
    "save_checkpoint",
    "load_checkpoint",
]

BN_EPS = 1e-8
CHECKPOINT_VERSION = 1


class Tensor:
    """A node in the computation graph: float64 value plus gradient slot."""

    __slots__ = ("value", "grad", "_parents", "_backward")

    def __init__(self, value, parents=(), backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += g


def _unbroadcast(g, shape):
    """Sum a broadcast gradient back down to the original shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, (gd, sd) in enumerate(zip(g.shape, shape)):
        if sd == 1 and gd != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


class Tape:
    """Records primitive ops in forward order; backward replays them reversed."""

    def __init__(self):
        self._nodes = []
        self._params = {}

    # -- node creation -------------------------------------------------

    def _record(self, t):
        self._nodes.append(t)
        return t

    def _lift(self, x):
        if isinstance(x, Tensor):
            return x
        return Tensor(x)

    def leaf(self, value):
        return self._record(Tensor(value))

    def param(self, name, value):
        """Lift a named parameter array; repeated lifts share one leaf."""
        if name not in self._params:
            self._params[name] = self._record(Tensor(value))
        return self._params[name]

    def grad(self, name):
        """Gradient of the last backward pass w.r.t. a named parameter."""
        t = self._params[name]
        if t.grad is None:
            return np.zeros_like(t.value)
        return t.grad

    def param_grads(self):
        return {name: self.grad(name) for name in self._params}

    # -- elementwise arithmetic ---------------------------------------

    def add(self, a, b):
        a, b = self._lift(a), self._lift(b)
        out = Tensor(a.value + b.value, (a, b))

        def backward(g):
            a._accumulate(_unbroadcast(g, a.value.shape))
            b._accumulate(_unbroadcast(g, b.value.shape))

        out._backward = backward
        return self._record(out)

    def sub(self, a, b):
        a, b = self._lift(a), self._lift(b)
        out = Tensor(a.value - b.value, (a, b))

        def backward(g):
            a._accumulate(_unbroadcast(g, a.value.shape))
            b._accumulate(_unbroadcast(-g, b.value.shape))

        out._backward = backward
        return self._record(out)

    def mul(self, a, b):
        a, b = self._lift(a), self._lift(b)
        out = Tensor(a.value * b.value, (a, b))

        def backward(g):
            a._accumulate(_unbroadcast(g * b.value, a.value.shape))
            b._accumulate(_unbroadcast(g * a.value, b.value.shape))

        out._backward = backward
        return self._record(out)

    def div(self, a, b):
        a, b = self._lift(a), self._lift(b)
        out = Tensor(a.value / b.value, (a, b))

        def backward(g):
            a._accumulate(_unbroadcast(g / b.value, a.value.shape))
            b._accumulate(_unbroadcast(-g * a.value / (b.value ** 2), b.value.shape))

        out._backward = backward
        return self._record(out)

    def neg(self, a):
        a = self._lift(a)
        out = Tensor(-a.value, (a,))

        def backward(g):
            a._accumulate(-g)

        out._backward = backward
        return self._record(out)

    # -- linear algebra ------------------------------------------------

    def matmul(self, a, b):
        a, b = self._lift(a), self._lift(b)
        if a.value.shape[-1] != b.value.shape[0]:
            raise ShapeError(
                f"matmul mismatch: {a.value.shape} @ {b.value.shape}"
            )
        out = Tensor(a.value @ b.value, (a, b))

        def backward(g):
            a._accumulate(g @ b.value.T)
            b._accumulate(a.value.T @ g)

        out._backward = backward
        return self._record(out)

    def gather_rows(self, a, idx):
        a = self._lift(a)
        idx = np.asarray(idx, dtype=np.intp)
        out = Tensor(a.value[idx], (a,))

        def backward(g):
            acc = np.zeros_like(a.value)
            np.add.at(acc, idx, g)
            a._accumulate(acc)

        out._backward = backward
        return self._record(out)

    def concat_cols(self, parts):
        parts = [self._lift(p) for p in parts]
        out = Tensor(np.concatenate([p.value for p in parts], axis=1), tuple(parts))
        widths = [p.value.shape[1] for p in parts]

        def backward(g):
            start = 0
            for p, w in zip(parts, widths):
                p._accumulate(g[:, start : start + w])
                start += w

        out._backward = backward
        return self._record(out)

    # -- nonlinearities ------------------------------------------------

    def relu(self, a):
        a = self._lift(a)
        mask = a.value > 0
        out = Tensor(np.where(mask, a.value, 0.0), (a,))

        def backward(g):
            a._accumulate(g * mask)

        out._backward = backward
        return self._record(out)

    def leaky_relu(self, a, slope=0.01):
        a = self._lift(a)
        mask = a.value > 0
        out = Tensor(np.where(mask, a.value, slope * a.value), (a,))

        def backward(g):
            a._accumulate(g * np.where(mask, 1.0, slope))

        out._backward = backward
        return self._record(out)

    def sigmoid(self, a):
        a = self._lift(a)
        s = 1.0 / (1.0 + np.exp(-np.clip(a.value, -500, 500)))
        out = Tensor(s, (a,))

        def backward(g):
            a._accumulate(g * s * (1.0 - s))

        out._backward = backward
        return self._record(out)

    def softplus(self, a):
        """log(1 + exp(x)), computed overflow-safe; gradient is sigmoid(x)."""
        a = self._lift(a)
        v = np.maximum(a.value, 0.0) + np.log1p(np.exp(-np.abs(a.value)))
        out = Tensor(v, (a,))
        s = 1.0 / (1.0 + np.exp(-np.clip(a.value, -500, 500)))

        def backward(g):
            a._accumulate(g * s)

        out._backward = backward
        return self._record(out)

    def log(self, a):
        a = self._lift(a)
        out = Tensor(np.log(a.value), (a,))

        def backward(g):
            a._accumulate(g / a.value)

        out._backward = backward
        return self._record(out)

    def sqrt(self, a):
        a = self._lift(a)
        r = np.sqrt(a.value)
        out = Tensor(r, (a,))

        def backward(g):
            a._accumulate(g * 0.5 / r)

        out._backward = backward
        return self._record(out)

    def square(self, a):
        a = self._lift(a)
        out = Tensor(a.value ** 2, (a,))

        def backward(g):
            a._accumulate(g * 2.0 * a.value)

        out._backward = backward
        return self._record(out)

    # -- reductions ----------------------------------------------------

    def sum(self, a):
        a = self._lift(a)
        out = Tensor(a.value.sum(), (a,))

        def backward(g):
            a._accumulate(np.full_like(a.value, float(g)))

        out._backward = backward
        return self._record(out)

    def mean(self, a):
        a = self._lift(a)
        n = a.value.size
        out = Tensor(a.value.mean(), (a,))

        def backward(g):
            a._accumulate(np.full_like(a.value, float(g) / n))

        out._backward = backward
        return self._record(out)

    def mean_rows(self, a):
        """Mean over axis 0, keepdims; used by batch normalization."""
        a = self._lift(a)
        n = a.value.shape[0]
        out = Tensor(a.value.mean(axis=0, keepdims=True), (a,))

        def backward(g):
            a._accumulate(np.broadcast_to(g / n, a.value.shape).copy())

        out._backward = backward
        return self._record(out)

    # -- composite helpers --------------------------------------------

    def batch_norm(self, x, gamma, beta, eps=BN_EPS):
        """Normalize over the row (node) dimension, then scale and shift."""
        mu = self.mean_rows(x)
        xc = self.sub(x, mu)
        var = self.mean_rows(self.square(xc))
        xhat = self.div(xc, self.sqrt(self.add(var, eps)))
        return self.add(self.mul(xhat, gamma), beta)

    def mse(self, pred, target):
        return self.mean(self.square(self.sub(pred, target)))

    def bce_with_logits(self, logits, targets):
        """Mean binary cross-entropy from raw scores; overflow-safe."""
        t = self._lift(targets)
        return self.mean(self.sub(self.softplus(logits), self.mul(t, logits)))

    def rowdot(self, a, b):
        """Per-row inner product, returns an (n, 1) tensor."""
        prod = self.mul(a, b)
        ones = np.ones((prod.value.shape[1], 1))
        return self.matmul(prod, ones)

    # -- backward ------------------------------------------------------

    def backward(self, loss):
        if loss.value.size != 1:
            raise ShapeError("backward expects a scalar loss")
        for node in self._nodes:
            node.grad = None
        loss.grad = np.ones_like(loss.value)
        for node in reversed(self._nodes):
            if node.grad is None or node._backward is None:
                continue
            node._backward(node.grad)


# ---------------------------------------------------------------------
# parameter init / MLP / optimizer
# ---------------------------------------------------------------------


def init_weight(rng, fan_in, fan_out):
    """Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]."""
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class Mlp:
    """Stack of linear layers with optional batch norm and an activation.

    ``activation`` applies after every layer when ``final_activation`` is
    set, otherwise the last layer stays linear.  Batch norm sits between
    the linear map and the activation and keeps running statistics for
    inference mode.
    """

    def __init__(
        self,
        dims,
        rng,
        activation="relu",
        batch_norm=False,
        final_activation=True,
        name="mlp",
    ):
        self.dims = list(dims)
        self.activation = activation
        self.batch_norm = batch_norm
        self.final_activation = final_activation
        self.name = name
        self.weights = []
        self.biases = []
        self.bn_gamma = []
        self.bn_beta = []
        self.bn_mean = []
        self.bn_var = []
        self.bn_momentum = 0.9
        for i in range(len(dims) - 1):
            self.weights.append(init_weight(rng, dims[i], dims[i + 1]))
            if not batch_norm:
                # under batch norm a bias is a no-op (the mean subtraction
                # cancels it), so normalized layers go without one
                self.biases.append(np.zeros((1, dims[i + 1])))
            if batch_norm:
                # positive shift keeps post-norm activations inside the
                # ReLU's linear region at init; a zero shift is a saddle
                # on graphs whose node rows are symmetric
                self.bn_gamma.append(np.ones((1, dims[i + 1])))
                self.bn_beta.append(np.ones((1, dims[i + 1])))
                self.bn_mean.append(np.zeros((1, dims[i + 1])))
                self.bn_var.append(np.ones((1, dims[i + 1])))

    def parameters(self):
        out = {}
        for i in range(len(self.weights)):
            out[f"{self.name}.w{i}"] = self.weights[i]
            if self.batch_norm:
                out[f"{self.name}.gamma{i}"] = self.bn_gamma[i]
                out[f"{self.name}.beta{i}"] = self.bn_beta[i]
            else:
                out[f"{self.name}.b{i}"] = self.biases[i]
        return out

    def _activate(self, tape, x):
        if self.activation == "relu":
            return tape.relu(x)
        if self.activation == "leaky_relu":
            return tape.leaky_relu(x)
        if self.activation == "linear":
            return x
        raise ValueError(f"unknown activation {self.activation!r}")

    def forward(self, tape, x, training=False):
        h = tape._lift(x)
        if h.value.ndim != 2 or h.value.shape[1] != self.dims[0]:
            raise ShapeError(
                f"{self.name}: input shape {h.value.shape} does not match "
                f"expected width {self.dims[0]}"
            )
        last = len(self.weights) - 1
        for i in range(len(self.weights)):
            w = tape.param(f"{self.name}.w{i}", self.weights[i])
            h = tape.matmul(h, w)
            if not self.batch_norm:
                b = tape.param(f"{self.name}.b{i}", self.biases[i])
                h = tape.add(h, b)
            if self.batch_norm:
                if training:
                    mu = h.value.mean(axis=0, keepdims=True)
                    var = h.value.var(axis=0, keepdims=True)
                    m = self.bn_momentum
                    self.bn_mean[i][:] = m * self.bn_mean[i] + (1 - m) * mu
                    self.bn_var[i][:] = m * self.bn_var[i] + (1 - m) * var
                    gamma = tape.param(f"{self.name}.gamma{i}", self.bn_gamma[i])
                    beta = tape.param(f"{self.name}.beta{i}", self.bn_beta[i])
                    h = tape.batch_norm(h, gamma, beta)
                else:
                    gamma = tape.param(f"{self.name}.gamma{i}", self.bn_gamma[i])
                    beta = tape.param(f"{self.name}.beta{i}", self.bn_beta[i])
                    scale = 1.0 / np.sqrt(self.bn_var[i] + BN_EPS)
                    h = tape.add(
                        tape.mul(tape.mul(tape.sub(h, self.bn_mean[i]), scale), gamma),
                        beta,
                    )
            if i < last or self.final_activation:
                h = self._activate(tape, h)
        return h

    def predict(self, x):
        """Inference-mode forward on a throwaway tape."""
        tape = Tape()
        return self.forward(tape, x, training=False).value

    def calibrate_bn(self):
        """Make the next training-mode forward write exact batch statistics.

        Call once, then run one forward pass with ``training=True``;
        afterwards inference mode reproduces that pass bit-for-bit even
        when the running averages lag the final parameters.
        """
        self.bn_momentum = 0.0


def mlp_forward(mlp, x, training=False):
    """Functional wrapper over Mlp.forward returning a plain array."""
    tape = Tape()
    return mlp.forward(tape, x, training=training).value


class Adam:
    """Bias-corrected Adam over a named parameter dict, updated in place."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads):
        for k, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise DivergenceError(f"non-finite gradient for {k!r}")
        self.step_count += 1
        t = self.step_count
        for k, p in self.params.items():
            g = grads.get(k)
            if g is None:
                continue
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g ** 2
            mhat = self.m[k] / (1 - self.beta1 ** t)
            vhat = self.v[k] / (1 - self.beta2 ** t)
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)


def grad_check(loss_fn, params, h=1e-5):
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn(tape, leaves)`` must build a scalar loss from the leaf dict.
    Error per component is |analytic - diff| / (|analytic| + |diff| + 1e-12).
    """
    tape = Tape()
    leaves = {k: tape.param(k, v) for k, v in params.items()}
    loss = loss_fn(tape, leaves)
    tape.backward(loss)
    analytic = {k: tape.grad(k) for k in params}

    def eval_loss():
        t = Tape()
        lv = {k: t.param(k, v) for k, v in params.items()}
        return float(loss_fn(t, lv).value)

    worst = 0.0
    for k, p in params.items():
        flat = p.reshape(-1)
        ga = analytic[k].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            lp = eval_loss()
            flat[i] = orig - h
            lm = eval_loss()
            flat[i] = orig
            num = (lp - lm) / (2 * h)
            diff = abs(ga[i] - num)
            if diff < 1e-8:  # both effectively zero: relative error is noise
                continue
            worst = max(worst, diff / (abs(ga[i]) + abs(num) + 1e-12))
    return worst


# ---------------------------------------------------------------------
# checkpoint container
# ---------------------------------------------------------------------


def save_checkpoint(path, params, meta=None):
    """Write named arrays plus a JSON metadata block to one .npz file."""
    payload = dict(params)
    meta = dict(meta or {})
    meta["format_version"] = CHECKPOINT_VERSION
    payload["_meta_json"] = np.array(json.dumps(meta, sort_keys=True))
    np.savez(path, **payload)


def load_checkpoint(path):
    """Return (params dict, meta dict) from a checkpoint file."""
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["_meta_json"]))
        params = {
            k: np.array(data[k], dtype=np.float64)
            for k in data.files
            if k != "_meta_json"
        }
    if meta.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version: {meta.get('format_version')}")
    return params, meta
