"""Finite-width fully-connected network with exact backpropagation.

Two parametrisations are supported:

* ``ntk``: raw parameters are unit Gaussians; the forward pass applies the
  1/sqrt(fan_in) and sigma_b multipliers and scales activations by
  sqrt(c_phi).  This is the parametrisation under which the empirical NTK
  converges to the analytic kernel as width grows.
* ``standard``: He-scaled weights are baked into W, biases are drawn from
  N(0, sigma_b^2), and the forward pass is the plain affine map.  This
  mirrors the training experiments.

Layer Norm stages carry no parameters.  Its backward pass uses the exact
Jacobian

    J = (1/sigma) * (I - (1/n) 1 1^T - (1/n) zt zt^T),

which is symmetric, annihilates the constant direction (mean invariance)
and zt itself (scale invariance).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arch import ArchSpec
from .errors import ConfigError, DimensionMismatch, LNZeroSigma
from .numerics import RngStream
from .validation import as_vector

_LN_SIGMA_FLOOR = 1e-30


@dataclass
class ForwardCache:
    """Batched intermediates from the last forward pass (rows = samples)."""

    x: np.ndarray
    pre: list           # z^(i) per linear map
    post_ln: list       # z-tilde^(i) (same object as pre when no LN)
    activ: list         # xi^(i) per hidden layer
    ln_sigma: list      # per-row sigma for LN stages (None elsewhere)
    out: np.ndarray


@dataclass
class FiniteNet:
    """Parameter tensors plus the cache of the last forward pass.

    The cache makes a net single-writer: share nets across threads only
    read-only, and give each worker its own instance (seed-parallel code
    should construct one net per seed from its own RngStream).
    """

    arch: ArchSpec
    parametrisation: str
    weights: list
    biases: list
    cache: ForwardCache | None = field(default=None, repr=False)

    @property
    def dims(self) -> tuple:
        return (self.arch.input_dim,) + self.arch.hidden_widths + (1,)

    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))


def init_net(arch: ArchSpec, parametrisation: str, stream: RngStream) -> FiniteNet:
    """Draw parameters for the given parametrisation from the stream."""
    if parametrisation not in ("ntk", "standard"):
        raise ConfigError(f"unknown parametrisation {parametrisation!r}")
    dims = (arch.input_dim,) + arch.hidden_widths + (1,)
    weights, biases = [], []
    for i in range(1, len(dims)):
        fan_in, fan_out = dims[i - 1], dims[i]
        w = stream.normal(fan_out * fan_in).reshape(fan_out, fan_in)
        b = stream.normal(fan_out)
        if parametrisation == "standard":
            w *= np.sqrt(2.0 / fan_in)
            b *= arch.sigma_b
        weights.append(w)
        biases.append(b)
    return FiniteNet(arch=arch, parametrisation=parametrisation,
                     weights=weights, biases=biases)


def _layer_norm_rows(z: np.ndarray):
    mu = np.mean(z, axis=1, keepdims=True)
    sigma = np.sqrt(np.mean((z - mu) ** 2, axis=1, keepdims=True))
    if np.any(sigma < _LN_SIGMA_FLOOR):
        raise LNZeroSigma("layer norm saw a (near-)constant pre-activation vector")
    return (z - mu) / sigma, sigma[:, 0]


def forward_batch(net: FiniteNet, X: np.ndarray) -> np.ndarray:
    """Scalar outputs for a batch of inputs; caches all intermediates."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != net.arch.input_dim:
        raise DimensionMismatch(
            f"input dim {X.shape[1]} does not match arch {net.arch.input_dim}")
    arch = net.arch
    ntk_mode = net.parametrisation == "ntk"
    act = arch.activation
    act_scale = np.sqrt(act.c_phi) if ntk_mode else 1.0

    xi = X
    pre, post_ln, activ, ln_sigma = [], [], [], []
    n_linear = arch.depth + 1
    for i in range(1, n_linear + 1):
        w, b = net.weights[i - 1], net.biases[i - 1]
        if ntk_mode:
            z = xi @ w.T / np.sqrt(w.shape[1]) + arch.sigma_b * b
        else:
            z = xi @ w.T + b
        pre.append(z)
        if (i - 1) in arch.ln_positions:
            zt, sig = _layer_norm_rows(z)
            ln_sigma.append(sig)
        else:
            zt, sig = z, None
            ln_sigma.append(None)
        post_ln.append(zt)
        if i <= arch.depth:
            xi = act_scale * act.phi(zt)
            activ.append(xi)
    out = post_ln[-1][:, 0]
    net.cache = ForwardCache(x=X, pre=pre, post_ln=post_ln, activ=activ,
                             ln_sigma=ln_sigma, out=out)
    return out


def forward(net: FiniteNet, x) -> float:
    """Scalar output for a single input; caches intermediates."""
    return float(forward_batch(net, as_vector(x).reshape(1, -1))[0])


def _backward_batch(net: FiniteNet, dout: np.ndarray):
    """Parameter gradients given d(loss)/d(output) per sample.

    Returns (grad_weights, grad_biases) lists matching net.weights/biases.
    """
    if net.cache is None:
        raise ValueError("run forward before backward")
    arch = net.arch
    cache = net.cache
    ntk_mode = net.parametrisation == "ntk"
    act = arch.activation
    act_scale = np.sqrt(act.c_phi) if ntk_mode else 1.0
    n_linear = arch.depth + 1

    grad_w = [None] * n_linear
    grad_b = [None] * n_linear
    # delta = d(loss)/d(z-tilde) at the current linear map's output
    delta = dout[:, None]
    for i in range(n_linear, 0, -1):
        if cache.ln_sigma[i - 1] is not None:
            zt = cache.post_ln[i - 1]
            n = zt.shape[1]
            # J is symmetric: delta_z = (d - mean(d) - zt * <zt, d>/n) / sigma
            mean_d = np.mean(delta, axis=1, keepdims=True)
            proj = np.sum(zt * delta, axis=1, keepdims=True) / n
            delta = (delta - mean_d - zt * proj) / cache.ln_sigma[i - 1][:, None]
        xi_in = cache.x if i == 1 else cache.activ[i - 2]
        w = net.weights[i - 1]
        if ntk_mode:
            grad_w[i - 1] = delta.T @ xi_in / np.sqrt(w.shape[1])
            grad_b[i - 1] = arch.sigma_b * np.sum(delta, axis=0)
        else:
            grad_w[i - 1] = delta.T @ xi_in
            grad_b[i - 1] = np.sum(delta, axis=0)
        if i > 1:
            g = delta @ w
            if ntk_mode:
                g = g / np.sqrt(w.shape[1])
            delta = g * act_scale * act.phi_dot(cache.post_ln[i - 2])
    return grad_w, grad_b


def grad_params(net: FiniteNet, x) -> np.ndarray:
    """Exact gradient of the scalar output w.r.t. every parameter, flattened
    in (W1, b1, ..., W_{L+1}, b_{L+1}) order."""
    forward(net, x)
    gw, gb = _backward_batch(net, np.ones(1))
    return np.concatenate([np.concatenate([w.ravel(), b.ravel()])
                           for w, b in zip(gw, gb)])


def loss_grads(net: FiniteNet, X: np.ndarray, y: np.ndarray):
    """Mean-squared-error loss and its parameter gradients over a batch."""
    y = np.asarray(y, dtype=float)
    out = forward_batch(net, X)
    resid = out - y
    loss = float(np.mean(resid ** 2))
    gw, gb = _backward_batch(net, 2.0 * resid / len(y))
    return loss, gw, gb


def empirical_ntk(net: FiniteNet, x, x_prime) -> float:
    """<grad f(x), grad f(x')> over all parameters."""
    return float(grad_params(net, x) @ grad_params(net, x_prime))


def empirical_ntk_gram(net: FiniteNet, xs) -> np.ndarray:
    """Pairwise empirical NTK over a list of inputs (gradients cached)."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    grads = np.stack([grad_params(net, x) for x in xs])
    return grads @ grads.T


def empirical_ntk_grid(builder, xs, seeds) -> np.ndarray:
    """Seed-averaged empirical NTK Gram over the grid.

    builder(seed) must return a fresh FiniteNet; results are averaged in
    seed order so output is deterministic.
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    total = np.zeros((len(xs), len(xs)))
    for seed in sorted(seeds):
        net = builder(seed)
        total += empirical_ntk_gram(net, xs)
    avg = total / len(list(seeds))
    return 0.5 * (avg + avg.T)


def params_flat(net: FiniteNet) -> np.ndarray:
    return np.concatenate([np.concatenate([w.ravel(), b.ravel()])
                           for w, b in zip(net.weights, net.biases)])


def set_params_flat(net: FiniteNet, theta: np.ndarray) -> None:
    pos = 0
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        net.weights[i] = theta[pos:pos + w.size].reshape(w.shape).copy()
        pos += w.size
        net.biases[i] = theta[pos:pos + b.size].copy()
        pos += b.size
    net.cache = None
