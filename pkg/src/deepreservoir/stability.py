"""Stability analysis of deep residual reservoirs.

Covers the linearized view (per-layer and global Jacobians, spectral
radii) and the contraction view (layer Lipschitz coefficients, empirical
convergence of trajectories from different initial states). The global
Jacobian of the stack is block lower-triangular because a layer never
depends on the states of deeper layers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import reservoir as _res
from .numerics import RngStream, eigenvalues, operator_norm_2, spectral_radius
from .reservoir import DeepReservoir, Layer


@dataclass
class StabilityReport:
    """Spectral radii and contraction coefficients of an instantiated stack.

    esp_necessary_ok is the zero-state linearization test (global spectral
    radius < 1, necessary for the echo state property); contractive is the
    sufficient condition (global Lipschitz coefficient < 1). Configurations
    can pass the first and fail the second.
    """

    per_layer_rho: list[float]
    global_rho: float
    per_layer_c: list[float]
    global_c: float
    esp_necessary_ok: bool
    contractive: bool

    def to_dict(self) -> dict:
        return {
            "per_layer_rho": self.per_layer_rho,
            "global_rho": self.global_rho,
            "per_layer_c": self.per_layer_c,
            "global_c": self.global_c,
            "esp_necessary_ok": self.esp_necessary_ok,
            "contractive": self.contractive,
        }


def _tanh_derivative(z: np.ndarray) -> np.ndarray:
    t = np.tanh(z)
    return 1.0 - t * t


def layer_block_jacobian(layer: Layer, h_prev: np.ndarray, layer_input: np.ndarray) -> np.ndarray:
    """Derivative of one layer's update with respect to its own previous state.

    Equals alpha * O + beta * diag(tanh'(z)) @ W_h with the pre-activation z
    evaluated at (h_prev, layer_input); the bias is part of z.
    """
    h_prev = np.asarray(h_prev, dtype=float)
    layer_input = np.asarray(layer_input, dtype=float)
    if h_prev.shape != (layer.size,) or layer_input.shape != (layer.input_dim,):
        raise ValueError("state or input dimension does not match the layer")
    z = layer.w_h @ h_prev + layer.w_x @ layer_input + layer.b
    d = _tanh_derivative(z)
    return layer.alpha * layer.o + layer.beta * (d[:, None] * layer.w_h)


def _layer_chain(deep: DeepReservoir, global_state: list[np.ndarray], x: np.ndarray):
    """Advance one global step, returning each layer's input and tanh' vector."""
    inputs: list[np.ndarray] = []
    derivs: list[np.ndarray] = []
    drive = np.asarray(x, dtype=float)
    for layer, h in zip(deep.layers, global_state):
        h = np.asarray(h, dtype=float)
        z = layer.w_h @ h + layer.w_x @ drive + layer.b
        inputs.append(drive)
        derivs.append(_tanh_derivative(z))
        drive = layer.alpha * _res._apply_residual(layer, h) + layer.beta * np.tanh(z)
    return inputs, derivs


def global_jacobian(deep: DeepReservoir, global_state: list[np.ndarray],
                    x: np.ndarray) -> np.ndarray:
    """Jacobian of the one-step global map at (global_state, x).

    Diagonal blocks are the per-layer Jacobians; the block at (i, j), i > j,
    chains the input coupling beta_i * diag(tanh') @ W_x through every layer
    between j and i. Blocks above the diagonal are zero.
    """
    if len(global_state) != deep.n_layers:
        raise ValueError("global state must have one vector per layer")
    inputs, derivs = _layer_chain(deep, global_state, x)

    sizes = [layer.size for layer in deep.layers]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    total = int(offsets[-1])
    jac = np.zeros((total, total))

    diag_blocks: list[np.ndarray] = []
    input_couplings: list[np.ndarray] = []  # beta_l diag(tanh') W_x per layer
    for layer, d in zip(deep.layers, derivs):
        diag_blocks.append(layer.alpha * layer.o + layer.beta * (d[:, None] * layer.w_h))
        input_couplings.append(layer.beta * (d[:, None] * layer.w_x))

    for j in range(deep.n_layers):
        block = diag_blocks[j]
        jac[offsets[j]:offsets[j + 1], offsets[j]:offsets[j + 1]] = block
        running = block
        for i in range(j + 1, deep.n_layers):
            running = input_couplings[i] @ running
            jac[offsets[i]:offsets[i + 1], offsets[j]:offsets[j + 1]] = running
    return jac


def necessary_esp(deep: DeepReservoir) -> tuple[float, bool]:
    """Global spectral radius at zero state and input, and whether it is < 1.

    The radius is the max over layers of rho(alpha * O + beta * W_h); a value
    below one is necessary (not sufficient) for the echo state property.
    """
    rho = max(per_layer_spectral_radii(deep))
    return rho, rho < 1.0


def per_layer_spectral_radii(deep: DeepReservoir) -> list[float]:
    return [spectral_radius(layer.alpha * layer.o + layer.beta * layer.w_h)
            for layer in deep.layers]


def contraction_coefficients(deep: DeepReservoir) -> tuple[list[float], float]:
    """Layer Lipschitz coefficients and their maximum.

    C(1) = alpha + beta * ||W_h||, and deeper layers add the input coupling
    scaled by the previous coefficient:
    C(l) = alpha + beta * (||W_h|| + C(l-1) * ||W_x||). A maximum below one
    is sufficient for the echo state property on bounded state spaces.
    """
    coeffs: list[float] = []
    prev_c = 0.0
    for l, layer in enumerate(deep.layers):
        c = layer.alpha + layer.beta * operator_norm_2(layer.w_h)
        if l > 0:
            c += layer.beta * prev_c * operator_norm_2(layer.w_x)
        coeffs.append(c)
        prev_c = c
    return coeffs, max(coeffs)


def max_metric(state_a: list[np.ndarray], state_b: list[np.ndarray]) -> float:
    """Distance between global states: max over layers of the L2 distance."""
    return max(float(np.linalg.norm(a - b)) for a, b in zip(state_a, state_b))


def esp_convergence_test(deep: DeepReservoir, input_seq: np.ndarray,
                         h: list[np.ndarray], h_prime: list[np.ndarray]) -> np.ndarray:
    """Per-step distance between two trajectories driven by the same input.

    Entry 0 is the initial distance; entry t the distance after t steps. A
    contraction with coefficient C bounds the trace by C**t times entry 0.
    """
    input_seq = np.asarray(input_seq, dtype=float)
    if input_seq.ndim == 1:
        input_seq = input_seq[:, None]
    a = [np.asarray(v, dtype=float) for v in h]
    b = [np.asarray(v, dtype=float) for v in h_prime]
    trace = np.empty(input_seq.shape[0] + 1)
    trace[0] = max_metric(a, b)
    for t in range(input_seq.shape[0]):
        a = _res.step(deep, a, input_seq[t])
        b = _res.step(deep, b, input_seq[t])
        trace[t + 1] = max_metric(a, b)
    return trace


def eigenspectrum_report(deep: DeepReservoir, h: list[np.ndarray],
                         x: np.ndarray) -> list[np.ndarray]:
    """Eigenvalues of each layer's diagonal Jacobian block at (h, x)."""
    inputs, derivs = _layer_chain(deep, h, x)
    out = []
    for layer, d in zip(deep.layers, derivs):
        out.append(eigenvalues(layer.alpha * layer.o + layer.beta * (d[:, None] * layer.w_h)))
    return out


def random_probe(deep: DeepReservoir, rng: RngStream) -> tuple[list[np.ndarray], np.ndarray]:
    """Random hidden state and input, both uniform in (-1, 1)."""
    h = [rng.uniform(-1.0, 1.0, layer.size) for layer in deep.layers]
    x = rng.uniform(-1.0, 1.0, deep.input_dim)
    return h, x


def stability_report(deep: DeepReservoir) -> StabilityReport:
    per_rho = per_layer_spectral_radii(deep)
    per_c, global_c = contraction_coefficients(deep)
    global_rho = max(per_rho)
    return StabilityReport(
        per_layer_rho=per_rho,
        global_rho=global_rho,
        per_layer_c=per_c,
        global_c=global_c,
        esp_necessary_ok=global_rho < 1.0,
        contractive=global_c < 1.0,
    )


def eigenvalue_rows(per_layer: list[np.ndarray]) -> list[tuple[float, float, int]]:
    """Flatten per-layer eigenvalues into (re, im, layer) rows for CSV dumps."""
    rows = []
    for l, eigs in enumerate(per_layer, start=1):
        for lam in eigs:
            rows.append((float(lam.real), float(lam.imag), l))
    return rows
