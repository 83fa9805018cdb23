"""Infinite-width NTK machinery for fully-connected networks with Layer Norm.

Exact kernel recursions, GP posterior-mean regression with certified output
bounds, finite-width networks with exact backpropagation for empirical
NTKs, and reproducible toy-extrapolation experiments.
"""

__version__ = "0.1.0"

from .activations import (
    Activation,
    HermiteExpansion,
    activation,
    c_phi,
    catalogue,
    hermite_coeffs,
    hermite_cross_moment,
    homogeneity_limit_check,
    kappa,
    kappa_dot,
    kappa_series,
    phi,
    phi_dot,
)
from .arch import ArchSpec, make_arch, parse_ln_positions
from .experiments import (
    FiniteNetRegressor,
    ToyDatasetConfig,
    TrainConfig,
    explosion_experiment,
    extrapolation_scan,
    fig1_experiment,
    heatmap_experiment,
    make_toy_dataset,
    make_witness_dataset,
    multi_seed_scan,
    train,
)
from .kernel import (
    KernelState,
    layer_step,
    limit_correlation,
    limit_ntk_ratio,
    ln_first_kernel,
    ln_step,
    nngp_init,
    ntk,
    ntk_cross,
    ntk_gram,
    soft_cosine,
    state_from_covariances,
    variance_curve,
)
from .net import (
    FiniteNet,
    empirical_ntk,
    empirical_ntk_gram,
    empirical_ntk_grid,
    forward,
    forward_batch,
    grad_params,
    init_net,
)
from .numerics import (
    QuadratureRule,
    RngStream,
    bivariate_gaussian_expect,
    cholesky,
    gauss_hermite,
    gaussian_expect,
    min_eigenvalue_sym,
    sample_normal,
)
from .regression import Dataset, NTKRegressor, estimate_variance_constant, fit

__all__ = [name for name in dir() if not name.startswith("_")]
