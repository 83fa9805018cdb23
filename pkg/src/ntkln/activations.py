"""Activation catalogue with homogeneity metadata and dual functions.

Each activation phi carries:

* its positive-homogeneity degree n (relu family, gelu, swish, identity: 1;
  tanh, sigmoid: 0),
* the large-scale limit function phi_hat(x) = lim phi(lambda*x)/lambda^n,
* the normalisation constant c_phi = 1/khat(1) with khat(1) = E[basis(x)^2],
* the dual functions kappa(rho) = c_phi * E[basis(u) basis(v)] and
  kappa_dot(rho) = c_phi * E[basis'(u) basis'(v)] for unit-variance
  correlated Gaussians (u, v).

"basis" is phi_hat for degree > 0.5 and phi itself for the 0-homogeneous
tanh/sigmoid, whose limit function degenerates to a step; their duals are
evaluated from phi under quadrature instead.

For the relu family the duals have closed arc-cosine forms.  Writing
J(rho) = E[relu(u) relu(v)] = (sqrt(1-rho^2) + rho*(pi - arccos rho))/(2*pi)
and Q(rho) = P(u > 0, v > 0) = (pi - arccos rho)/(2*pi), a parametric relu
phi(x) = max(alpha*x, x) decomposes as relu(x) - alpha*relu(-x), giving

    khat(rho)     = (1 + alpha^2) J(rho) - 2 alpha J(-rho),
    khat_dot(rho) = (1 + alpha^2) Q(rho) + 2 alpha Q(-rho),
    khat(1)       = (1 + alpha^2) / 2.

These forms are validated against quadrature and Monte Carlo oracles in the
test suite before being trusted anywhere else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit, ndtr

from .errors import DegenerateActivation, OrderOutOfRange, RhoOutOfRange
from .numerics import (
    QuadratureRule,
    bivariate_gaussian_expect,
    gauss_hermite,
    gaussian_expect,
)

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _clamp_rho(rho):
    arr = np.asarray(rho, dtype=float)
    if np.any(np.abs(arr) > 1.0 + 1e-12):
        raise RhoOutOfRange("correlation outside [-1, 1] beyond tolerance")
    return np.clip(arr, -1.0, 1.0)


def _j(rho):
    """E[relu(u) relu(v)] for unit-variance Gaussians with correlation rho."""
    rho = np.clip(rho, -1.0, 1.0)
    return (np.sqrt(1.0 - rho * rho) + rho * (math.pi - np.arccos(rho))) / (2.0 * math.pi)


def _q(rho):
    """P(u > 0, v > 0) for unit-variance Gaussians with correlation rho."""
    rho = np.clip(rho, -1.0, 1.0)
    return (math.pi - np.arccos(rho)) / (2.0 * math.pi)


@dataclass(frozen=True)
class Activation:
    """One catalogue entry; construct via the factory functions below."""

    name: str
    homogeneity_degree: float
    phi: Callable[[np.ndarray], np.ndarray]
    phi_dot: Callable[[np.ndarray], np.ndarray]
    phi_hat: Callable[[np.ndarray], np.ndarray]
    phi_hat_dot: Callable[[np.ndarray], np.ndarray]
    c_phi: float
    exactly_homogeneous: bool
    kinks: tuple = ()
    param: float | None = None
    # alpha of the equivalent parametric relu when the duals have closed
    # forms; None means the duals are evaluated by quadrature.
    _arccos_alpha: float | None = field(default=None, repr=False)

    @property
    def kappa_hat_1(self) -> float:
        """khat(1) = E[basis^2] = 1/c_phi."""
        return 1.0 / self.c_phi

    def basis(self) -> tuple[Callable, Callable, tuple]:
        """(function, derivative, kinks) used for kappa and Hermite work."""
        if self.homogeneity_degree > 0.5:
            return self.phi_hat, self.phi_hat_dot, self.kinks
        return self.phi, self.phi_dot, self.kinks

    def kappa(self, rho):
        """kappa(rho), vectorised over rho; kappa(1) = 1."""
        rho = _clamp_rho(rho)
        if self.name == "identity":
            return rho
        if self._arccos_alpha is not None:
            a = self._arccos_alpha
            return ((1.0 + a * a) * _j(rho) - 2.0 * a * _j(-rho)) \
                / ((1.0 + a * a) / 2.0)
        return _kappa_by_quadrature(self, rho, derivative=False)

    def kappa_dot(self, rho):
        """kappa_dot(rho), vectorised over rho."""
        rho = _clamp_rho(rho)
        if self.name == "identity":
            return np.ones_like(rho)
        if self._arccos_alpha is not None:
            a = self._arccos_alpha
            return ((1.0 + a * a) * _q(rho) + 2.0 * a * _q(-rho)) \
                / ((1.0 + a * a) / 2.0)
        return _kappa_by_quadrature(self, rho, derivative=True)


def _kappa_by_quadrature(act: Activation, rho, derivative: bool, order: int = 128):
    f, fdot, kinks = act.basis()
    g = fdot if derivative else f
    rule = gauss_hermite(order)
    scalar = np.isscalar(rho) or np.asarray(rho).ndim == 0
    out = [act.c_phi * bivariate_gaussian_expect(
        lambda x, y: g(x) * g(y), float(r), rule, kinks_x=kinks, kinks_y=kinks)
        for r in np.atleast_1d(np.asarray(rho, dtype=float))]
    return out[0] if scalar else np.asarray(out)


def _c_phi_from(basis: Callable, kinks: Sequence[float]) -> float:
    second = gaussian_expect(lambda x: basis(x) ** 2, order=128, kinks=kinks)
    if second < 1e-14:
        raise DegenerateActivation("basis function has vanishing second moment")
    return 1.0 / second


def _relu(x):
    return np.maximum(x, 0.0)


def _step(x):
    # phi_dot(relu, 0) := 0 by convention (a.e. derivative choice).
    return np.where(np.asarray(x) > 0, 1.0, 0.0)


def prelu(alpha: float) -> Activation:
    """Parametric relu max(alpha*x, x) with alpha in [0, 1)."""
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"prelu alpha must be in [0, 1), got {alpha}")
    phi = lambda x: np.maximum(alpha * x, x)
    phi_dot = lambda x: np.where(np.asarray(x) > 0, 1.0, np.where(np.asarray(x) < 0, alpha, 0.0))
    name = "relu" if alpha == 0.0 else "prelu"
    return Activation(
        name=name, homogeneity_degree=1.0,
        phi=phi, phi_dot=phi_dot, phi_hat=phi, phi_hat_dot=phi_dot,
        c_phi=2.0 / (1.0 + alpha * alpha), exactly_homogeneous=True,
        kinks=(0.0,), param=None if alpha == 0.0 else alpha, _arccos_alpha=alpha)


def relu() -> Activation:
    return prelu(0.0)


def leaky_relu(alpha: float = 0.01) -> Activation:
    import dataclasses
    return dataclasses.replace(prelu(alpha), name="leaky_relu", param=alpha)


def gelu() -> Activation:
    """x * Phi(x); asymptotically 1-homogeneous with limit function relu."""
    phi = lambda x: x * ndtr(x)
    phi_dot = lambda x: ndtr(x) + x * np.exp(-0.5 * np.asarray(x) ** 2) / _SQRT_2PI
    return Activation(
        name="gelu", homogeneity_degree=1.0,
        phi=phi, phi_dot=phi_dot, phi_hat=_relu, phi_hat_dot=_step,
        c_phi=_c_phi_from(_relu, (0.0,)), exactly_homogeneous=False,
        kinks=(0.0,), _arccos_alpha=0.0)


def swish(beta: float = 1.0) -> Activation:
    """x * sigmoid(beta*x); asymptotically 1-homogeneous with limit relu."""
    if beta <= 0:
        raise ValueError("swish beta must be positive")

    def phi(x):
        return x * expit(beta * x)

    def phi_dot(x):
        s = expit(beta * np.asarray(x))
        return s + beta * np.asarray(x) * s * (1.0 - s)

    return Activation(
        name="swish", homogeneity_degree=1.0,
        phi=phi, phi_dot=phi_dot, phi_hat=_relu, phi_hat_dot=_step,
        c_phi=_c_phi_from(_relu, (0.0,)), exactly_homogeneous=False,
        kinks=(0.0,), param=beta, _arccos_alpha=0.0)


def tanh() -> Activation:
    """0-homogeneous; duals evaluated from phi itself (see module docs)."""
    phi = np.tanh
    phi_dot = lambda x: 1.0 - np.tanh(x) ** 2
    phi_hat = np.sign
    return Activation(
        name="tanh", homogeneity_degree=0.0,
        phi=phi, phi_dot=phi_dot, phi_hat=phi_hat,
        phi_hat_dot=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        c_phi=_c_phi_from(phi, ()), exactly_homogeneous=False, kinks=())


def sigmoid() -> Activation:
    """0-homogeneous; duals evaluated from phi itself (see module docs)."""
    phi = expit
    phi_dot = lambda x: expit(x) * (1.0 - expit(x))
    phi_hat = lambda x: 0.5 * (np.sign(x) + 1.0)
    return Activation(
        name="sigmoid", homogeneity_degree=0.0,
        phi=phi, phi_dot=phi_dot, phi_hat=phi_hat,
        phi_hat_dot=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        c_phi=_c_phi_from(phi, ()), exactly_homogeneous=False, kinks=())


def identity() -> Activation:
    one = lambda x: np.ones_like(np.asarray(x, dtype=float))
    ident = lambda x: np.asarray(x, dtype=float)
    return Activation(
        name="identity", homogeneity_degree=1.0,
        phi=ident, phi_dot=one, phi_hat=ident, phi_hat_dot=one,
        c_phi=1.0, exactly_homogeneous=True, kinks=())


_FACTORIES = {
    "relu": relu,
    "leaky_relu": leaky_relu,
    "prelu": prelu,
    "gelu": gelu,
    "swish": swish,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "identity": identity,
}


def activation(name: str, param: float | None = None) -> Activation:
    """Look up a catalogue entry by name, e.g. 'relu' or 'prelu' with alpha.

    Accepts 'name:param' shorthand, e.g. 'leaky_relu:0.05'.
    """
    if ":" in name:
        name, raw = name.split(":", 1)
        param = float(raw)
    if name not in _FACTORIES:
        raise ValueError(f"unknown activation {name!r}; known: {sorted(_FACTORIES)}")
    factory = _FACTORIES[name]
    if param is None:
        if name == "prelu":
            raise ValueError("prelu requires an alpha parameter")
        return factory()
    if name not in ("prelu", "leaky_relu", "swish"):
        raise ValueError(f"activation {name!r} takes no parameter")
    return factory(param)


def phi(act: Activation, x):
    return act.phi(np.asarray(x, dtype=float))


def phi_dot(act: Activation, x):
    return act.phi_dot(np.asarray(x, dtype=float))


def c_phi(act: Activation) -> float:
    return act.c_phi


def kappa(act: Activation, rho):
    return act.kappa(rho)


def kappa_dot(act: Activation, rho):
    return act.kappa_dot(rho)


@dataclass(frozen=True)
class HermiteExpansion:
    """Coefficients a_n of the kernel basis in probabilists' Hermite basis.

    kappa_hat_1 is the truncated sum(a_n^2 n!); second_moment is the exact
    E[basis^2] used to normalise the series so that it matches kappa (the
    truncated sum lags the exact moment by the series tail, which for the
    relu family decays only like n^-5/2).
    """

    coeffs: np.ndarray
    kappa_hat_1: float
    second_moment: float


def hermite_polynomials(max_order: int, x: np.ndarray) -> np.ndarray:
    """He_0..He_N at the given points via the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    out = np.zeros((max_order + 1,) + x.shape)
    out[0] = 1.0
    if max_order >= 1:
        out[1] = x
    for n in range(1, max_order):
        out[n + 1] = x * out[n] - n * out[n - 1]
    return out


def hermite_coeffs(act: Activation, max_order: int, order: int = 160) -> HermiteExpansion:
    """Expansion a_n = E[basis(x) He_n(x)] / n! computed by quadrature."""
    if not 0 <= max_order <= 60:
        raise OrderOutOfRange(f"max_order must be in [0, 60], got {max_order}")
    f, _, kinks = act.basis()
    edges = list(kinks) if kinks else []
    from .numerics import _panel_nodes  # shared panel construction
    if edges:
        x, w = _panel_nodes(edges, order)
        dens = np.exp(-0.5 * x * x) / _SQRT_2PI
        w = w * dens
    else:
        rule = gauss_hermite(min(order, 256))
        x = math.sqrt(2.0) * rule.nodes
        w = rule.weights / math.sqrt(math.pi)
    he = hermite_polynomials(max_order, x)
    fx = f(x)
    raw = he @ (w * fx)  # raw[n] = E[basis * He_n] = a_n * n!
    log_fact = np.concatenate([[0.0], np.cumsum(np.log(np.arange(1, max_order + 1)))]) \
        if max_order >= 1 else np.zeros(1)
    coeffs = raw / np.exp(log_fact)
    kappa_hat_1 = float(np.sum(coeffs ** 2 * np.exp(log_fact)))
    second = gaussian_expect(lambda t: f(t) ** 2, order=128, kinks=kinks)
    return HermiteExpansion(coeffs=coeffs, kappa_hat_1=kappa_hat_1, second_moment=second)


def kappa_series(exp: HermiteExpansion, rho: float) -> float:
    """Truncated Hermite series sum(a_n^2 n! rho^n) / khat(1)."""
    n = np.arange(len(exp.coeffs))
    log_fact = np.concatenate([[0.0], np.cumsum(np.log(np.arange(1, len(n))))]) \
        if len(n) > 1 else np.zeros(1)
    terms = exp.coeffs ** 2 * np.exp(log_fact) * np.power(float(rho), n)
    return float(np.sum(terms) / exp.second_moment)


def hermite_cross_moment(n: int, m: int, rho: float, order: int = 64) -> float:
    """E[He_n(x) He_m(y)] for correlated standard normals, by quadrature."""
    if n > 10 or m > 10 or n < 0 or m < 0:
        raise OrderOutOfRange("cross moments supported for n, m <= 10")
    rule = gauss_hermite(order)

    def f(x, y):
        return hermite_polynomials(n, np.asarray(x))[n] * \
            hermite_polynomials(m, np.asarray(y))[m]

    return bivariate_gaussian_expect(f, rho, rule)


def homogeneity_limit_check(act: Activation, x: float, lambdas: Sequence[float],
                            derivative: bool = False) -> list[float]:
    """phi(lambda*x)/lambda^n per lambda (or phi_dot with exponent n-1).

    The sequence converges to phi_hat(x) (resp. phi_hat_dot(x)) for the
    asymptotically homogeneous catalogue entries.
    """
    lam = np.asarray(list(lambdas), dtype=float)
    if np.any(lam <= 0) or np.any(np.diff(lam) <= 0):
        raise ValueError("lambdas must be positive and increasing")
    n = act.homogeneity_degree
    if derivative:
        return list(act.phi_dot(lam * x) / lam ** (n - 1.0))
    return list(act.phi(lam * x) / lam ** n)


CATALOGUE = ("relu", "leaky_relu", "gelu", "swish", "tanh", "sigmoid", "identity")


def catalogue() -> list[Activation]:
    """One instance of every catalogued activation (default parameters)."""
    return [activation(name) for name in CATALOGUE]
