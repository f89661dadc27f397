"""Dense Q-network with hand-rolled backprop and Adam.

Everything is plain float64 numpy: a [window+1, 64, 64, 3] multilayer
perceptron (rectified-linear hidden layers, identity output, one output per
action), the Huber temporal-difference loss with its analytic gradients, and
an adaptive-moment optimizer. No autograd framework is involved, which keeps
the arithmetic reproducible bit for bit under fixed seeds and lets the test
suite check gradients against finite differences directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .env import Observation

#: Hidden layer widths of the default architecture.
HIDDEN_DIMS = (64, 64)
#: One output node per action.
ACTION_COUNT = 3


@dataclass(eq=False)
class QNetwork:
    """Layer parameters of the Q-function approximator.

    ``weights[k]`` has shape (fan_in, fan_out); activations flow left to
    right through rectified-linear hidden layers onto a linear output of
    width 3 (the per-action Q-values).
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def parameters(self) -> list[np.ndarray]:
        """All parameter arrays, interleaved [W0, b0, W1, b1, ...]."""
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def clone(self) -> "QNetwork":
        return QNetwork([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def init_network(window_hours: int, seed: int, hidden_dims: tuple[int, ...] = HIDDEN_DIMS) -> QNetwork:
    """Fresh network for a given observation window, deterministic per seed.

    Weights are uniform in +/-sqrt(6/fan_in), biases zero.
    """
    if window_hours < 1:
        raise ValueError(f"window_hours must be >= 1, got {window_hours}")
    dims = (window_hours + 1, *hidden_dims, ACTION_COUNT)
    rng = np.random.default_rng(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = math.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return QNetwork(weights, biases)


@dataclass(frozen=True)
class ObservationNormalizer:
    """Input scaling frozen at training start and stored in checkpoints.

    Prices are standardized by the training series' mean/std; charge is
    scaled to [0, 1] by the battery capacity. Raw cents and kWh sit on very
    different scales, which would skew early learning.
    """

    price_mean: float
    price_std: float
    charge_scale: float

    @classmethod
    def from_series(cls, prices_cents: np.ndarray, capacity_kwh: float) -> "ObservationNormalizer":
        mean = float(np.mean(prices_cents))
        std = float(np.std(prices_cents))
        # a constant series rounds to a tiny but nonzero std; dividing by it
        # would blow inputs up by ~1e15, so treat vanishing spread as unit
        if not math.isfinite(std) or std <= 1e-12 * max(1.0, abs(mean)):
            std = 1.0
        return cls(mean, std, capacity_kwh)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Normalize an input vector (L+1,) or batch (B, L+1)."""
        out = np.array(x, dtype=np.float64)
        out[..., :-1] -= self.price_mean
        out[..., :-1] /= self.price_std
        out[..., -1] /= self.charge_scale
        return out


def forward_batch(net: QNetwork, x: np.ndarray) -> np.ndarray:
    """Q-values (B, 3) for a batch of already-normalized inputs (B, L+1)."""
    if x.ndim != 2 or x.shape[1] != net.input_dim:
        raise ValueError(f"input shape {x.shape} does not match network input {net.input_dim}")
    h = x
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w + b
        if k != last:
            h = np.maximum(h, 0.0)
    return h


def forward(net: QNetwork, obs: Observation, norm: ObservationNormalizer) -> np.ndarray:
    """Q-values (3,) for one raw observation."""
    vec = norm.apply(obs.vector())
    if vec.shape[0] != net.input_dim:
        raise ValueError(
            f"observation width {vec.shape[0]} does not match network input {net.input_dim}"
        )
    return forward_batch(net, vec[None, :])[0]


def td_loss_and_grads(
    net: QNetwork,
    x: np.ndarray,
    action_idx: np.ndarray,
    targets: np.ndarray,
) -> tuple[float, list[np.ndarray]]:
    """Huber loss between Q(s, a) and fixed targets, with analytic gradients.

    ``x`` is the normalized input batch, ``action_idx`` the taken actions,
    ``targets`` the (already computed, gradient-free) TD targets. Returns the
    mean loss over the batch and gradients aligned with ``net.parameters()``.
    The Huber transition point is at unit error, so single outlier prices
    cannot blow up an update.
    """
    batch = x.shape[0]
    if batch == 0:
        raise ValueError("empty batch")

    # Forward, caching pre-activations for the backward sweep.
    pre: list[np.ndarray] = []
    act: list[np.ndarray] = [x]
    h = x
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if k != last else z
        act.append(h)

    q = act[-1]
    rows = np.arange(batch)
    err = q[rows, action_idx] - targets
    abs_err = np.abs(err)
    loss = float(np.mean(np.where(abs_err <= 1.0, 0.5 * err * err, abs_err - 0.5)))

    # d loss / d q_taken, spread onto the taken-action outputs only.
    dq = np.zeros_like(q)
    dq[rows, action_idx] = np.clip(err, -1.0, 1.0) / batch

    grads: list[np.ndarray] = [np.empty(0)] * (2 * len(net.weights))
    delta = dq
    for k in range(last, -1, -1):
        grads[2 * k] = act[k].T @ delta
        grads[2 * k + 1] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ net.weights[k].T) * (pre[k - 1] > 0.0)
    return loss, grads


@dataclass(eq=False)
class AdamState:
    """Adaptive-moment optimizer state for one network."""

    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: list[np.ndarray] = field(default_factory=list)
    second_moment: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_network(cls, net: QNetwork, learning_rate: float = 1e-4) -> "AdamState":
        params = net.parameters()
        return cls(
            learning_rate=learning_rate,
            first_moment=[np.zeros_like(p) for p in params],
            second_moment=[np.zeros_like(p) for p in params],
        )

    def clone(self) -> "AdamState":
        return AdamState(
            self.learning_rate,
            self.beta1,
            self.beta2,
            self.epsilon,
            self.step_count,
            [m.copy() for m in self.first_moment],
            [v.copy() for v in self.second_moment],
        )


def adam_update(opt: AdamState, net: QNetwork, grads: list[np.ndarray]) -> None:
    """Apply one bias-corrected adaptive-moment step in place."""
    opt.step_count += 1
    t = opt.step_count
    c1 = 1.0 - opt.beta1**t
    c2 = 1.0 - opt.beta2**t
    for p, g, m, v in zip(net.parameters(), grads, opt.first_moment, opt.second_moment):
        m *= opt.beta1
        m += (1.0 - opt.beta1) * g
        v *= opt.beta2
        v += (1.0 - opt.beta2) * g * g
        p -= opt.learning_rate * (m / c1) / (np.sqrt(v / c2) + opt.epsilon)
