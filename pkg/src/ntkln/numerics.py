"""Dense linear algebra, Gaussian quadrature, and deterministic RNG streams.

Quadrature conventions
----------------------
``gauss_hermite`` returns the physicists' Gauss-Hermite rule, i.e. nodes and
weights for

    integral exp(-t^2) g(t) dt  ~=  sum_i w_i g(t_i),

so that a standard-normal expectation is evaluated through the change of
variables x = sqrt(2) t:

    E_{x~N(0,1)}[f(x)]  ~=  sum_i (w_i / sqrt(pi)) f(sqrt(2) t_i).

Plain Gauss-Hermite converges only algebraically for integrands with kinks
(e.g. anything built from ReLU), which is far too slow for the accuracy this
package needs.  ``gaussian_expect`` and ``bivariate_gaussian_expect``
therefore accept the kink locations and, when given any, switch to composite
Gauss-Legendre panels split at the kinks with the Gaussian density folded
into the integrand.  Each panel integrand is then smooth and the result is
accurate to near machine precision.

All functions are pure; values are safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.hermite import hermgauss
from numpy.polynomial.legendre import leggauss

from .errors import NonFinite, NotPositiveDefinite, OrderOutOfRange, RhoOutOfRange
from .validation import check_square_symmetric

# Integration window for the panel scheme: the standard normal density at
# |x| = 13 is ~1e-37, below any tolerance used in this package.
_TAIL = 13.0

# |rho| may exceed 1 by rounding when computed as sxy/sqrt(sxx*syy).
RHO_CLAMP_TOL = 1e-12


@dataclass(frozen=True)
class QuadratureRule:
    """Physicists' Gauss-Hermite nodes/weights of a given order."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int


def gauss_hermite(order: int) -> QuadratureRule:
    """Return the physicists' Gauss-Hermite rule of the given order.

    Exact for polynomials of degree <= 2*order - 1 under the weight
    exp(-t^2); weights sum to sqrt(pi).
    """
    if not 1 <= order <= 256:
        raise OrderOutOfRange(f"order must be in [1, 256], got {order}")
    nodes, weights = hermgauss(order)
    return QuadratureRule(nodes=nodes, weights=weights, order=order)


def _panel_nodes(kinks: Sequence[float], order: int):
    """Gauss-Legendre nodes/weights on [-T, T] split at the given kinks."""
    edges = [-_TAIL]
    for k in sorted(set(float(k) for k in kinks)):
        if -_TAIL < k < _TAIL:
            edges.append(k)
    edges.append(_TAIL)
    xg, wg = leggauss(order)
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        xs.append(mid + half * xg)
        ws.append(half * wg)
    return np.concatenate(xs), np.concatenate(ws)


def gaussian_expect(f: Callable[[np.ndarray], np.ndarray], order: int = 128,
                    kinks: Sequence[float] = ()) -> float:
    """E_{x~N(0,1)}[f(x)] by quadrature.

    Without kinks this is the plain Gauss-Hermite evaluation; with kinks the
    integral is split into Gauss-Legendre panels so that piecewise-smooth
    integrands are handled to near machine precision.
    """
    if not kinks:
        rule = gauss_hermite(order)
        x = math.sqrt(2.0) * rule.nodes
        return float(np.sum(rule.weights * f(x)) / math.sqrt(math.pi))
    x, w = _panel_nodes(kinks, order)
    dens = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    return float(np.sum(w * dens * f(x)))


def _clamp_rho(rho: float) -> float:
    if abs(rho) > 1.0 + RHO_CLAMP_TOL:
        raise RhoOutOfRange(f"|rho| = {abs(rho)} exceeds 1 beyond tolerance")
    return min(1.0, max(-1.0, float(rho)))


def bivariate_gaussian_expect(f: Callable[[np.ndarray, np.ndarray], np.ndarray],
                              rho: float, rule: QuadratureRule,
                              kinks_x: Sequence[float] = (),
                              kinks_y: Sequence[float] = ()) -> float:
    """E[f(x, y)] for (x, y) standard bivariate normal with correlation rho.

    Uses the whitening y = rho*x + sqrt(1 - rho^2)*z and a tensor-product
    rule.  When kink locations are supplied, both the outer x-integral and
    the per-node inner z-integral are split at the (mapped) kinks.
    """
    rho = _clamp_rho(rho)
    s = math.sqrt(max(1.0 - rho * rho, 0.0))

    if not kinks_x and not kinks_y:
        x = math.sqrt(2.0) * rule.nodes[:, None]
        z = math.sqrt(2.0) * rule.nodes[None, :]
        w2 = rule.weights[:, None] * rule.weights[None, :] / math.pi
        if s == 0.0:
            x1 = math.sqrt(2.0) * rule.nodes
            return float(np.sum(rule.weights * f(x1, math.copysign(1.0, rho) * x1))
                         / math.sqrt(math.pi))
        return float(np.sum(w2 * f(x, rho * x + s * z)))

    order = rule.order
    x, wx = _panel_nodes(kinks_x, order)
    dens_x = np.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    if s == 0.0:
        return float(np.sum(wx * dens_x * f(x, math.copysign(1.0, rho) * x)))

    # Inner integral over z for every outer node, panels split where the
    # mapped y-kinks fall: z0 = (k - rho*x)/s.
    xg, wg = leggauss(order)
    edges = np.full((len(x), len(kinks_y) + 2), 0.0)
    edges[:, 0] = -_TAIL
    edges[:, -1] = _TAIL
    if kinks_y:
        z0 = (np.asarray(sorted(kinks_y))[None, :] - rho * x[:, None]) / s
        edges[:, 1:-1] = np.clip(z0, -_TAIL, _TAIL)
        edges = np.sort(edges, axis=1)
    inner = np.zeros(len(x))
    for p in range(edges.shape[1] - 1):
        a, b = edges[:, p], edges[:, p + 1]
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        z = mid[:, None] + half[:, None] * xg[None, :]
        wz = half[:, None] * wg[None, :]
        dens_z = np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
        inner += np.sum(wz * dens_z * f(x[:, None], rho * x[:, None] + s * z), axis=1)
    return float(np.sum(wx * dens_x * inner))


def cholesky(a: np.ndarray, jitter: float = 0.0) -> np.ndarray:
    """Lower-triangular L with L @ L.T = a + jitter * I.

    Raises NotPositiveDefinite when the jittered matrix is not SPD, which
    signals a degenerate Gram matrix.
    """
    a = check_square_symmetric(a)
    if jitter < 0:
        raise ValueError("jitter must be non-negative")
    try:
        return np.linalg.cholesky(a + jitter * np.eye(a.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None


def default_jitter(a: np.ndarray) -> float:
    """Default Cholesky jitter: 1e-10 * trace(a) / rows."""
    a = np.asarray(a)
    return 1e-10 * float(np.trace(a)) / a.shape[0]


def min_eigenvalue_sym(a: np.ndarray) -> float:
    """Smallest eigenvalue of a symmetric matrix via full eigendecomposition."""
    a = np.asarray(a, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise NonFinite("matrix contains NaN or Inf")
    a = check_square_symmetric(a)
    return float(np.linalg.eigvalsh(0.5 * (a + a.T))[0])


class RngStream:
    """Counter-based splittable random stream.

    Uniform bits come from the Philox counter-based generator keyed by
    (seed, stream); normals are produced by the Box-Muller transform.  The
    call counter is part of the Philox block counter, so identical
    (seed, stream, counter) triples always reproduce the same output and
    distinct stream ids give independent streams.
    """

    # Block-counter stride between calls; each call may consume at most
    # 4 * _STRIDE uniforms without overlapping the next call's blocks.
    _STRIDE = 2 ** 48

    def __init__(self, seed: int, stream: int = 0, counter: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        self.counter = int(counter)

    def split(self, stream: int) -> "RngStream":
        """Independent stream sharing this seed."""
        return RngStream(self.seed, stream)

    def uniform(self, n: int) -> np.ndarray:
        """n uniforms on [0, 1); advances the counter by one call."""
        bg = np.random.Philox(key=np.array([self.seed, self.stream], dtype=np.uint64),
                              counter=np.array([0, 0, 0, self.counter * self._STRIDE],
                                               dtype=np.uint64))
        self.counter += 1
        return np.random.Generator(bg).random(n)

    def normal(self, n: int) -> np.ndarray:
        """n i.i.d. N(0, 1) draws via Box-Muller."""
        m = (n + 1) // 2
        u = self.uniform(2 * m)
        u1 = 1.0 - u[:m]  # (0, 1]: keeps log() finite
        u2 = u[m:]
        r = np.sqrt(-2.0 * np.log(u1))
        z = np.concatenate([r * np.cos(2.0 * math.pi * u2),
                            r * np.sin(2.0 * math.pi * u2)])
        return z[:n]


def sample_normal(stream: RngStream, n: int) -> np.ndarray:
    """n i.i.d. standard normal draws from the given stream."""
    return stream.normal(n)
