"""Residual reservoir construction and dynamics.

A reservoir layer updates its state as

    h(t) = alpha * O @ h(t-1) + beta * tanh(W_h @ h(t-1) + W_x @ x(t) + b)

with O orthogonal (random, cyclic-permutation, or identity). Stacking layers
gives a deep reservoir where layer l > 1 is driven by the state of layer
l - 1 at the same time step. The classic leaky echo state network is the
identity case with alpha = 1 - tau and beta = tau; a single layer with a
generic O is the shallow residual network.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .numerics import RngStream, rescale_to_rho, spectral_radius, uniform_matrix

# Module-level activation so tests can probe the dynamics with a linear map.
# The supported model is tanh; this is not a configuration surface.
_activation = np.tanh

# Fresh draws attempted when W_h comes out with zero spectral radius.
_NILPOTENT_RETRIES = 3


class StateOverflowError(ArithmeticError):
    """Raised when reservoir states stop being finite."""


class ResidualKind(enum.Enum):
    RANDOM_ORTHOGONAL = "random_orthogonal"
    CYCLIC = "cyclic"
    IDENTITY = "identity"


@dataclass(frozen=True)
class LayerConfig:
    """Hyperparameters of one reservoir layer."""

    hidden_size: int
    spectral_radius: float
    input_scaling: float
    bias_scaling: float
    alpha: float
    beta: float
    residual: ResidualKind = ResidualKind.RANDOM_ORTHOGONAL

    def __post_init__(self):
        if self.hidden_size < 1:
            raise ValueError("hidden_size must be >= 1")
        if self.spectral_radius <= 0:
            raise ValueError("spectral_radius must be > 0")
        if self.input_scaling < 0 or self.bias_scaling < 0:
            raise ValueError("scalings must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")


@dataclass
class Layer:
    """One instantiated reservoir layer."""

    w_x: np.ndarray
    w_h: np.ndarray
    b: np.ndarray
    o: np.ndarray
    alpha: float
    beta: float
    kind: ResidualKind

    @property
    def size(self) -> int:
        return self.w_h.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_x.shape[1]


@dataclass
class DeepReservoir:
    """Ordered stack of reservoir layers plus the feature-assembly policy."""

    layers: list[Layer]
    concat: bool = False

    def __post_init__(self):
        if not self.layers:
            raise ValueError("a reservoir needs at least one layer")
        for l in range(1, len(self.layers)):
            got = self.layers[l].input_dim
            want = self.layers[l - 1].size
            if got != want:
                raise ValueError(
                    f"layer {l + 1} expects input dim {got}, layer {l} emits {want}"
                )

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].input_dim

    def zero_state(self) -> list[np.ndarray]:
        return [np.zeros(layer.size) for layer in self.layers]


@dataclass
class StateTrajectory:
    """Per-layer hidden states over time; washout marks the warm-up boundary."""

    states: list[np.ndarray]  # one (T, N_h) array per layer
    washout: int

    def __post_init__(self):
        lengths = {s.shape[0] for s in self.states}
        if len(lengths) != 1:
            raise ValueError("all layers must cover the same number of steps")
        if not 0 <= self.washout < self.steps:
            raise ValueError(f"washout {self.washout} must be < steps {self.steps}")

    @property
    def steps(self) -> int:
        return self.states[0].shape[0]

    @property
    def n_layers(self) -> int:
        return len(self.states)


def build_residual(kind: ResidualKind, n: int, rng: RngStream | None = None) -> np.ndarray:
    """Orthogonal matrix for the temporal residual branch.

    Cyclic is the permutation with ones on the sub-diagonal and in the
    top-right corner; identity and cyclic are deterministic, the random
    kind consumes the stream.
    """
    if n < 1:
        raise ValueError("residual matrix dimension must be >= 1")
    if kind is ResidualKind.IDENTITY:
        return np.eye(n)
    if kind is ResidualKind.CYCLIC:
        c = np.zeros((n, n))
        c[0, n - 1] = 1.0
        for i in range(1, n):
            c[i, i - 1] = 1.0
        return c
    if rng is None:
        raise ValueError("random orthogonal residual needs an RngStream")
    from .numerics import qr_orthogonal

    return qr_orthogonal(n, rng)


def build_layer(config: LayerConfig, input_dim: int, rng: RngStream,
                o_override: np.ndarray | None = None) -> Layer:
    """Instantiate a layer's weights from its config.

    Draw order is fixed (W_x, W_h, b, O) so a seed pins the full network.
    Input and bias weights are drawn in [-1, 1) and scaled, which keeps the
    stream consumption identical when a scaling is zero. A recurrent draw
    with zero spectral radius (never seen in practice) is retried a few
    times before failing.
    """
    if input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    n = config.hidden_size
    w_x = uniform_matrix(n, input_dim, -1.0, 1.0, rng) * config.input_scaling

    w_h = None
    for _ in range(1 + _NILPOTENT_RETRIES):
        raw = uniform_matrix(n, n, -1.0, 1.0, rng)
        if spectral_radius(raw) > 0.0:
            w_h = rescale_to_rho(raw, config.spectral_radius)
            break
    if w_h is None:
        raise ValueError("recurrent matrix draw has zero spectral radius after retries")

    b = rng.uniform(-1.0, 1.0, n) * config.bias_scaling
    if o_override is not None:
        if o_override.shape != (n, n):
            raise ValueError("shared residual matrix does not match the layer size")
        o = o_override
    else:
        o = build_residual(config.residual, n, rng)
    return Layer(w_x=w_x, w_h=w_h, b=b, o=o, alpha=config.alpha, beta=config.beta,
                 kind=config.residual)


def build_deep_reservoir(configs: list[LayerConfig], input_dim: int, rng: RngStream,
                         concat: bool = False, shared_residual: bool = False) -> DeepReservoir:
    """Build a layer stack; layer l > 1 takes layer l-1's state as input.

    With shared_residual the first layer's residual matrix is reused by all
    layers (they must then share a hidden size); by default each layer draws
    its own.
    """
    if not configs:
        raise ValueError("need at least one layer config")
    if shared_residual and len({c.hidden_size for c in configs}) != 1:
        raise ValueError("shared residual matrix requires equal layer sizes")
    layers: list[Layer] = []
    dim = input_dim
    shared_o = None
    for i, cfg in enumerate(configs):
        layer = build_layer(cfg, dim, rng, o_override=shared_o)
        if shared_residual and i == 0:
            shared_o = layer.o
        layers.append(layer)
        dim = cfg.hidden_size
    return DeepReservoir(layers=layers, concat=concat)


def _apply_residual(layer: Layer, h: np.ndarray) -> np.ndarray:
    # identity and cyclic short-cuts are exact (permutation rows sum a
    # single product), not approximations of the matmul
    if layer.kind is ResidualKind.IDENTITY:
        return h
    if layer.kind is ResidualKind.CYCLIC:
        return np.roll(h, 1)
    return layer.o @ h


def step_layer(layer: Layer, h_prev: np.ndarray, x_t: np.ndarray) -> np.ndarray:
    """One state update of a single layer."""
    h_prev = np.asarray(h_prev, dtype=float)
    x_t = np.asarray(x_t, dtype=float)
    if h_prev.shape != (layer.size,):
        raise ValueError(f"state has shape {h_prev.shape}, layer expects ({layer.size},)")
    if x_t.shape != (layer.input_dim,):
        raise ValueError(f"input has shape {x_t.shape}, layer expects ({layer.input_dim},)")
    z = layer.w_h @ h_prev + layer.w_x @ x_t + layer.b
    h = layer.alpha * _apply_residual(layer, h_prev) + layer.beta * _activation(z)
    if not np.all(np.isfinite(h)):
        raise StateOverflowError("layer state became non-finite")
    return h


def step(deep: DeepReservoir, h_prev: list[np.ndarray], x_t: np.ndarray) -> list[np.ndarray]:
    """One global update: every layer advances once, layer l > 1 fed by the
    fresh state of layer l - 1."""
    if len(h_prev) != deep.n_layers:
        raise ValueError("global state must have one vector per layer")
    out: list[np.ndarray] = []
    drive = np.asarray(x_t, dtype=float)
    for layer, h in zip(deep.layers, h_prev):
        new = step_layer(layer, h, drive)
        out.append(new)
        drive = new
    return out


def forward(deep: DeepReservoir, inputs: np.ndarray, washout: int = 0,
            h0: list[np.ndarray] | None = None, check_every: int = 100) -> StateTrajectory:
    """Run the stack over an input sequence.

    inputs is (T, N_x) or (T,) for scalar series. The trajectory keeps every
    step; washout only marks the boundary later used by feature extraction.
    States are checked for finiteness every check_every steps (1 = every
    step).
    """
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs[:, None]
    t_total = inputs.shape[0]
    if t_total == 0:
        raise ValueError("input sequence is empty")
    if inputs.shape[1] != deep.input_dim:
        raise ValueError(
            f"input dim {inputs.shape[1]} does not match reservoir input {deep.input_dim}"
        )
    if not 0 <= washout < t_total:
        raise ValueError(f"washout {washout} must be < sequence length {t_total}")
    if check_every < 1:
        raise ValueError("check_every must be >= 1")
    if h0 is None:
        h0 = deep.zero_state()

    phi = _activation
    drive = inputs
    all_states: list[np.ndarray] = []
    for layer, h_init in zip(deep.layers, h0):
        h = np.array(h_init, dtype=float)
        if h.shape != (layer.size,):
            raise ValueError("initial state does not match layer size")
        n = layer.size
        pre = drive @ layer.w_x.T + layer.b  # input drive for every step at once
        states = np.empty((t_total, n))
        alpha, beta, w_h, kind, o = layer.alpha, layer.beta, layer.w_h, layer.kind, layer.o
        z = np.empty(n)
        for t in range(t_total):
            np.dot(w_h, h, out=z)
            z += pre[t]
            z = phi(z, out=z) if phi is np.tanh else phi(z)
            new = states[t]
            # h(t) = alpha * (O h) + beta * phi(z), written into the
            # trajectory row to avoid per-step allocations
            if kind is ResidualKind.IDENTITY:
                np.multiply(h, alpha, out=new)
            elif kind is ResidualKind.CYCLIC:
                new[0] = alpha * h[n - 1]
                np.multiply(h[: n - 1], alpha, out=new[1:])
            else:
                np.dot(o, h, out=new)
                new *= alpha
            z *= beta
            new += z
            h = new
            if t % check_every == 0 and not np.all(np.isfinite(h)):
                raise StateOverflowError(f"non-finite state at step {t}")
        if not np.all(np.isfinite(h)):
            raise StateOverflowError("non-finite state at the end of the run")
        all_states.append(states)
        drive = states
    return StateTrajectory(states=all_states, washout=washout)


def allocate_units(total: int, n_layers: int, concat: bool) -> list[int]:
    """Per-layer hidden sizes for a given total unit budget.

    Concatenated readouts split the budget evenly (remainder to the first
    layer) so the trainable parameter count stays fixed; otherwise every
    layer gets the full budget.
    """
    if n_layers < 1:
        raise ValueError("need at least one layer")
    if not concat:
        if total < 1:
            raise ValueError("total units must be >= 1")
        return [total] * n_layers
    if total < n_layers:
        raise ValueError(f"cannot split {total} units across {n_layers} layers")
    base = total // n_layers
    sizes = [base] * n_layers
    sizes[0] += total - base * n_layers
    return sizes


def readout_features(traj: StateTrajectory, concat: bool, mode: str = "per-step") -> np.ndarray:
    """Assemble the feature matrix the readout consumes.

    per-step gives one row per post-washout time step; last-step gives a
    single row holding the final states. concat stacks all layers
    horizontally, otherwise only the last layer contributes.
    """
    if mode not in ("per-step", "last-step"):
        raise ValueError(f"unknown readout mode: {mode!r}")
    kept = traj.states if concat else traj.states[-1:]
    if mode == "last-step":
        return np.concatenate([s[-1] for s in kept])[None, :]
    if traj.washout >= traj.steps:
        raise ValueError("washout consumes every step, no features left")
    return np.hstack([s[traj.washout:] for s in kept])
