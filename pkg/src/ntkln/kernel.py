"""Exact infinite-width NNGP/NTK recursions with Layer Norm placements.

State representation
--------------------
For one input pair (x, x') the forward covariance triple
(Sigma(x,x), Sigma(x,x'), Sigma(x',x')) is carried as
(log_sxx, rho, log_syy): magnitudes in log space, cross-covariance as a
correlation.  Homogeneity scans push norms to 1e8 (variances 1e16 per
stage), and the log form keeps every intermediate finite for the catalogued
activations up to the documented envelope.

Kernel assembly
---------------
The NTK is the layer sum  Theta = sum_g Sigma^(g-1) * prod_{h>=g} dSigma^(h)
with dSigma^(L+1) = 1.  Each state carries one accumulating term per linear
map seen so far; an activation stage multiplies all existing terms by its
derivative factor and appends the next forward cross-covariance.  A Layer
Norm stage normalises the forward triple to unit variances (correlation is
preserved) and multiplies every accumulated term by
1/sqrt(sxx_old * syy_old): the infinite-width LN backward pass divides by
the pre-LN standard deviation of each input, and the rank-one parts of the
exact LN Jacobian contribute only O(1/width) corrections (checked against
finite-width NTKs in the acceptance suite).

For exactly positive n-homogeneous activations the stage update uses the
factored form  Sigma' = (sxx*syy)^(n/2) * kappa(rho) + sigma_b^2, which is
exact because the remainder term vanishes; other activations advance by
bivariate quadrature on the unwhitened covariance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .arch import ArchSpec
from .errors import (
    ContractViolation,
    DimensionMismatch,
    NonFiniteState,
    ZeroDenominator,
    ZeroVariance,
)
from .numerics import bivariate_gaussian_expect, gauss_hermite, gaussian_expect
from .validation import as_vector

_LOG_TINY = math.log(1e-300)
_QUAD_ORDER = 128


@dataclass(frozen=True)
class KernelState:
    """Covariance triple plus accumulated per-layer NTK terms for a batch
    of input pairs (all arrays share one shape)."""

    h: int
    log_sxx: np.ndarray
    log_syy: np.ndarray
    rho: np.ndarray
    theta_terms: tuple
    ln_scale: np.ndarray

    @property
    def sxx(self):
        return _maybe_scalar(np.exp(self.log_sxx))

    @property
    def syy(self):
        return _maybe_scalar(np.exp(self.log_syy))

    @property
    def sxy(self):
        return _maybe_scalar(self.rho * np.exp(0.5 * (self.log_sxx + self.log_syy)))


def _maybe_scalar(a):
    a = np.asarray(a)
    return float(a.item()) if a.size == 1 else a


def _check_finite(state: KernelState) -> KernelState:
    for arr in (state.log_sxx, state.log_syy, state.rho, *state.theta_terms):
        # log_sxx = -inf encodes an exactly zero variance and is legal.
        if np.any(np.isnan(arr)) or np.any(np.isposinf(arr)):
            raise NonFiniteState("kernel recursion produced NaN/Inf")
    return state


def _snap_unit(rho):
    """Clip to [-1, 1] and snap values within a few ulps onto +-1.

    Correlations are reconstructed through exp/log round trips, which can
    leave rho = 1 - O(eps); arccos turns that into an O(sqrt(eps)) error in
    the relu duals, so exactly-correlated pairs must stay exactly at 1.
    """
    rho = np.clip(rho, -1.0, 1.0)
    return np.where(np.abs(rho) >= 1.0 - 4e-16, np.sign(rho), rho)


def _corr_linear(vxy, vxx, vyy):
    """Correlation from linear-space covariances: exact 1.0 on diagonals."""
    denom = np.sqrt(vxx * vyy)
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(denom > 0, vxy / np.where(denom > 0, denom, 1.0), 0.0)
    return _snap_unit(rho)


def nngp_init(x, x_prime, arch: ArchSpec) -> KernelState:
    """Stage-0 state: Sigma0(a, b) = a.b/n0 + sigma_b^2."""
    x = as_vector(x, "x")
    xp = as_vector(x_prime, "x_prime")
    if len(x) != arch.input_dim or len(xp) != arch.input_dim:
        raise DimensionMismatch(
            f"inputs of length {len(x)}/{len(xp)} for input_dim {arch.input_dim}")
    n0 = float(arch.input_dim)
    s2 = arch.sigma_b2
    with np.errstate(over="ignore"):  # Inf here is caught as NonFiniteState
        return _init_from_products(
            np.array([x @ x / n0 + s2]), np.array([xp @ xp / n0 + s2]),
            np.array([x @ xp / n0 + s2]))


def _init_from_products(vxx, vyy, vxy) -> KernelState:
    with np.errstate(divide="ignore"):
        log_sxx = np.log(vxx)
        log_syy = np.log(vyy)
    rho = _corr_linear(vxy, vxx, vyy)
    return _check_finite(KernelState(
        h=0, log_sxx=log_sxx, log_syy=log_syy, rho=rho,
        theta_terms=(vxy.astype(float),), ln_scale=np.ones_like(vxx)))


def state_from_covariances(sxx: float, sxy: float, syy: float) -> KernelState:
    """Stage-0 state directly from a covariance triple."""
    if sxx < 0 or syy < 0:
        raise ValueError("variances must be non-negative")
    if abs(sxy) > math.sqrt(sxx * syy) + 1e-12:
        raise ValueError("|sxy| exceeds sqrt(sxx*syy)")
    return _init_from_products(np.array([float(sxx)]), np.array([float(syy)]),
                               np.array([float(sxy)]))


def ln_step(state: KernelState) -> KernelState:
    """Layer Norm on the current pre-activations.

    Forward variances become exactly 1 (correlation preserved); every NTK
    term accumulated so far is divided by sqrt(sxx_old * syy_old), the
    infinite-width backward-pass effect of the normalisation.
    """
    if np.any(state.log_sxx < _LOG_TINY) or np.any(state.log_syy < _LOG_TINY):
        raise ZeroVariance("layer norm applied to (numerically) zero variance")
    scale = np.exp(-0.5 * (state.log_sxx + state.log_syy))
    terms = tuple(t * scale for t in state.theta_terms)
    return _check_finite(replace(
        state,
        log_sxx=np.zeros_like(state.log_sxx),
        log_syy=np.zeros_like(state.log_syy),
        rho=state.rho.copy(),
        theta_terms=terms,
        ln_scale=state.ln_scale * scale))


def layer_step(state: KernelState, arch: ArchSpec,
               force_quadrature: bool = False) -> KernelState:
    """Advance one activation + linear stage: record the derivative factor
    dSigma^(h+1) into all open terms and append the next forward term."""
    if state.h >= arch.depth:
        raise ValueError(f"layer_step beyond depth {arch.depth}")
    act = arch.activation
    s2 = arch.sigma_b2
    log_s2 = math.log(s2) if s2 > 0 else -math.inf

    if act.exactly_homogeneous and not force_quadrature:
        n = act.homogeneity_degree
        dot = np.exp(0.5 * (n - 1.0) * (state.log_sxx + state.log_syy)) \
            * act.kappa_dot(state.rho)
        new_lxx = np.logaddexp(n * state.log_sxx, log_s2)
        new_lyy = np.logaddexp(n * state.log_syy, log_s2)
        half_new = 0.5 * (new_lxx + new_lyy)
        rho_new = act.kappa(state.rho) * np.exp(
            0.5 * n * (state.log_sxx + state.log_syy) - half_new) \
            + s2 * np.exp(-half_new)
        rho_new = _snap_unit(rho_new)
        new_term = rho_new * np.exp(half_new)
    else:
        vxx, vyy, vxy, dot = _quadrature_stage(state, act, s2)
        with np.errstate(divide="ignore"):
            new_lxx = np.log(vxx)
            new_lyy = np.log(vyy)
        rho_new = _corr_linear(vxy, vxx, vyy)
        new_term = vxy

    terms = tuple(t * dot for t in state.theta_terms) + (new_term,)
    return _check_finite(KernelState(
        h=state.h + 1, log_sxx=new_lxx, log_syy=new_lyy, rho=rho_new,
        theta_terms=terms, ln_scale=state.ln_scale))


def _quadrature_stage(state: KernelState, act, s2: float):
    """Exact Recursion step by bivariate quadrature on the unwhitened
    covariance: Sigma' = c_phi E[phi(u) phi(v)] + sigma_b^2 and the
    derivative factor c_phi E[phi_dot(u) phi_dot(v)]."""
    rule = gauss_hermite(_QUAD_ORDER)
    su = np.exp(0.5 * state.log_sxx)
    sv = np.exp(0.5 * state.log_syy)
    vxx = np.empty_like(su)
    vyy = np.empty_like(su)
    vxy = np.empty_like(su)
    dot = np.empty_like(su)
    for i in range(su.size):
        a, b, r = float(su.flat[i]), float(sv.flat[i]), float(state.rho.flat[i])
        vxx.flat[i] = act.c_phi * gaussian_expect(
            lambda t: act.phi(a * t) ** 2, order=_QUAD_ORDER, kinks=act.kinks) + s2
        vyy.flat[i] = act.c_phi * gaussian_expect(
            lambda t: act.phi(b * t) ** 2, order=_QUAD_ORDER, kinks=act.kinks) + s2
        vxy.flat[i] = act.c_phi * bivariate_gaussian_expect(
            lambda t, u: act.phi(a * t) * act.phi(b * u), r, rule,
            kinks_x=act.kinks, kinks_y=act.kinks) + s2
        dot.flat[i] = act.c_phi * bivariate_gaussian_expect(
            lambda t, u: act.phi_dot(a * t) * act.phi_dot(b * u), r, rule,
            kinks_x=act.kinks, kinks_y=act.kinks)
    return vxx, vyy, vxy, dot


def run_pipeline(state: KernelState, arch: ArchSpec,
                 force_quadrature: bool = False) -> KernelState:
    """Apply the full stage sequence including scheduled LN placements."""
    for h in range(arch.depth):
        if h in arch.ln_positions:
            state = ln_step(state)
        state = layer_step(state, arch, force_quadrature=force_quadrature)
    if arch.depth in arch.ln_positions:
        state = ln_step(state)
    return state


def theta_from_state(state: KernelState):
    return _maybe_scalar(sum(state.theta_terms))


def ntk(arch: ArchSpec, x, x_prime, force_quadrature: bool = False) -> float:
    """Theta(x, x'): the layered NTK sum for this architecture."""
    state = run_pipeline(nngp_init(x, x_prime, arch), arch,
                         force_quadrature=force_quadrature)
    return float(theta_from_state(state))


def _pairs_theta(arch: ArchSpec, vxx, vyy, vxy) -> np.ndarray:
    state = run_pipeline(_init_from_products(vxx, vyy, vxy), arch)
    return np.asarray(sum(state.theta_terms))


def ntk_cross(arch: ArchSpec, X, Z) -> np.ndarray:
    """Matrix of Theta(X[i], Z[j]) evaluated for all pairs at once."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if X.shape[1] != arch.input_dim or Z.shape[1] != arch.input_dim:
        raise DimensionMismatch("row dimension does not match input_dim")
    n0, s2 = float(arch.input_dim), arch.sigma_b2
    nx = np.sum(X * X, axis=1) / n0 + s2
    nz = np.sum(Z * Z, axis=1) / n0 + s2
    cross = X @ Z.T / n0 + s2
    vxx = np.repeat(nx, len(nz))
    vyy = np.tile(nz, len(nx))
    theta = _pairs_theta(arch, vxx, vyy, cross.ravel())
    return theta.reshape(len(nx), len(nz))


def ntk_gram(arch: ArchSpec, X) -> np.ndarray:
    """Symmetric PSD Gram matrix of pairwise NTK values.

    The upper triangle is computed and mirrored, so symmetry is exact.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    iu, ju = np.triu_indices(n)
    n0, s2 = float(arch.input_dim), arch.sigma_b2
    norms = np.sum(X * X, axis=1) / n0 + s2
    cross = (X[iu] * X[ju]).sum(axis=1) / n0 + s2
    theta = _pairs_theta(arch, norms[iu], norms[ju], cross)
    gram = np.zeros((n, n))
    gram[iu, ju] = theta
    gram[ju, iu] = theta
    return gram


def soft_cosine(x, x_prime, sigma2: float) -> float:
    """((x.x')/n + s2) / sqrt(((x.x)/n + s2)((x'.x')/n + s2))."""
    x = as_vector(x, "x")
    xp = as_vector(x_prime, "x_prime")
    if len(x) != len(xp):
        raise DimensionMismatch("soft_cosine inputs differ in length")
    if sigma2 < 0:
        raise ValueError("sigma2 must be non-negative")
    n = float(len(x))
    num = x @ xp / n + sigma2
    dx = x @ x / n + sigma2
    dy = xp @ xp / n + sigma2
    if dx <= 0.0 or dy <= 0.0:
        raise ZeroDenominator("soft-cosine undefined: zero input with sigma2 = 0")
    return float(num / math.sqrt(dx * dy))


def _matched_soft_cosine_pair(x, xp, sigma2):
    """A different input pair with the same soft-cosine similarity, used by
    the ln_first_kernel debug contract.  Scales the first input and
    compensates the angle; falls back to the antipodal pair when the angle
    compensation is infeasible (e.g. x = x', where similarity 1 pins the
    pair) or the input dimension is 1."""
    n = len(x)
    target = soft_cosine(x, xp, sigma2)
    nx, np_ = float(np.linalg.norm(x)), float(np.linalg.norm(xp))
    if n >= 2:
        for fac in (2.0, 0.5, 3.0):
            a = fac * nx + 0.25
            b = np_ + 0.1
            da = a * a / n + sigma2
            db = b * b / n + sigma2
            cos_g = (target * math.sqrt(da * db) - sigma2) * n / (a * b)
            if abs(cos_g) <= 1.0 - 1e-9:
                u = np.zeros(n)
                u[0] = a
                v = np.zeros(n)
                v[0] = b * cos_g
                v[1] = b * math.sqrt(1.0 - cos_g * cos_g)
                return u, v
    return -np.asarray(x, dtype=float), -np.asarray(xp, dtype=float)


def ln_first_kernel(arch: ArchSpec, x, x_prime) -> float:
    """NTK of an architecture whose first linear map is followed by LN.

    The result is a function of the soft-cosine similarity alone; under
    __debug__ the value is recomputed on a matched-similarity pair and the
    two must agree to 1e-10 relative.
    """
    if 0 not in arch.ln_positions:
        raise ValueError("ln_first_kernel requires 0 in ln_positions")
    theta = ntk(arch, x, x_prime)
    if __debug__:
        u, v = _matched_soft_cosine_pair(as_vector(x), as_vector(x_prime),
                                         arch.sigma_b2)
        other = ntk(arch, u, v)
        tol = 1e-10 * max(1.0, abs(theta))
        if abs(other - theta) > tol:
            raise ContractViolation(
                f"LN-first kernel is not a function of soft-cosine alone: "
                f"{theta} vs {other}")
    return theta


def limit_correlation(arch: ArchSpec, x_hat, x_hat_prime) -> list[float]:
    """Trajectory rho_hat^(0..L) of the large-norm limit correlations:
    rho_hat^(0) = x_hat . x_hat' and rho_hat^(h+1) = kappa(rho_hat^(h))."""
    x = as_vector(x_hat, "x_hat")
    xp = as_vector(x_hat_prime, "x_hat_prime")
    if np.linalg.norm(x) == 0.0 and np.linalg.norm(xp) == 0.0:
        rho = 1.0
    else:
        for v, name in ((x, "x_hat"), (xp, "x_hat_prime")):
            if abs(np.linalg.norm(v) - 1.0) > 1e-8:
                raise ValueError(f"{name} must be unit-norm or both inputs zero")
        rho = float(np.clip(x @ xp, -1.0, 1.0))
    out = [rho]
    for _ in range(arch.depth):
        rho = float(arch.activation.kappa(rho))
        out.append(rho)
    return out


def limit_ntk_ratio(arch: ArchSpec, x, x_prime, lambdas) -> list[float]:
    """Theta(lambda*x, lambda*x') / lambda^(2*n^L) per lambda.

    For architectures without LN and asymptotically positive n-homogeneous
    activations the sequence converges to the doubly-homogeneous limit
    kernel whenever that limit is nonzero.
    """
    if arch.has_ln:
        raise ValueError("limit_ntk_ratio applies to architectures without LN")
    lam = np.asarray(list(lambdas), dtype=float)
    if np.any(lam <= 0) or np.any(np.diff(lam) <= 0):
        raise ValueError("lambdas must be positive and increasing")
    x = as_vector(x, "x")
    xp = as_vector(x_prime, "x_prime")
    n_l = arch.activation.homogeneity_degree ** arch.depth
    out = []
    for l in lam:
        out.append(ntk(arch, l * x, l * xp) / l ** (2.0 * n_l))
    return out


def variance_curve(arch: ArchSpec, direction, norms) -> list[float]:
    """Theta(s*d, s*d) along one unit direction for each norm s."""
    d = as_vector(direction, "direction")
    nd = np.linalg.norm(d)
    if nd == 0:
        raise ValueError("direction must be nonzero")
    d = d / nd
    out = []
    for s in norms:
        if s <= 0:
            raise ValueError("norms must be positive")
        out.append(ntk(arch, s * d, s * d))
    return out
