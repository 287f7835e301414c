"""Conjugate random-measure models with exponential-family kernels.

The package builds trait-measure priors whose weight laws share an
exponential-family kernel with the observation likelihood, so posterior
updates, size-biased prior draws, and marginal observation sampling all
stay in closed form where the catalog provides one, and fall back to
validated numeric quadrature where it does not.

Entry points:

* :mod:`expcrm.catalog` for the four shipped likelihood/prior pairs,
* :func:`auto_conjugate` and :func:`posterior_update` for the conjugacy
  arithmetic,
* :class:`SizeBiasedSampler` and :class:`MarginalSampler` for the two
  generative processes,
* :func:`run_suite` for numeric verification of a model,
* ``expcrm`` (console script, :func:`expcrm.cli.main`) for batch use.
"""

from .catalog import (
    BERNOULLI_BETA,
    ODDS_BERNOULLI_BETA_PRIME,
    POISSON_GAMMA,
    entry_for,
    get_entry,
    hyperparam_valid,
    list_entries,
)
from .checks import (
    CheckReport,
    check_assumptions,
    equivalence_run,
    run_suite,
)
from .config import ModelConfig, parse_model_config
from .errors import (
    ConfigError,
    DivergenceSuspected,
    DomainError,
    ExpCrmError,
    InvalidModelError,
    InvalidObservationError,
    QuadratureError,
    RngFaultError,
    SingularityMismatch,
    TailBoundError,
)
from .exp_family import (
    ExpCrmLikelihood,
    ExpCrmPrior,
    FixedAtomParams,
    ValidityResult,
    WeightDomain,
    auto_conjugate,
    fixed_atom_density,
    log_conjugate_kernel,
    log_partition_B,
    weight_rate_density,
)
from .marginal import MarginalConfig, MarginalSampler, new_atom_rate, predictive_logpmf, sample_marginal
from .measures import (
    Atom,
    Location,
    ObservationAtom,
    ObservationMeasure,
    TraitMeasure,
    TruncationMeta,
)
from .posterior import PosteriorCrm, iterated_equals_batch, posterior_update
from .rng import RngState, as_generator
from .size_biased import (
    LabeledDraw,
    SizeBiasedConfig,
    SizeBiasedSampler,
    rate_M,
    round_total,
    sample_size_biased,
    weight_dist_params,
)

__version__ = "0.1.0"

__all__ = [
    "Atom",
    "BERNOULLI_BETA",
    "CheckReport",
    "ConfigError",
    "DivergenceSuspected",
    "DomainError",
    "ExpCrmError",
    "ExpCrmLikelihood",
    "ExpCrmPrior",
    "FixedAtomParams",
    "InvalidModelError",
    "InvalidObservationError",
    "LabeledDraw",
    "Location",
    "MarginalConfig",
    "MarginalSampler",
    "ModelConfig",
    "ODDS_BERNOULLI_BETA_PRIME",
    "ObservationAtom",
    "ObservationMeasure",
    "POISSON_GAMMA",
    "PosteriorCrm",
    "QuadratureError",
    "RngFaultError",
    "RngState",
    "SingularityMismatch",
    "SizeBiasedConfig",
    "SizeBiasedSampler",
    "TailBoundError",
    "TraitMeasure",
    "TruncationMeta",
    "ValidityResult",
    "WeightDomain",
    "as_generator",
    "auto_conjugate",
    "check_assumptions",
    "entry_for",
    "equivalence_run",
    "fixed_atom_density",
    "get_entry",
    "hyperparam_valid",
    "iterated_equals_batch",
    "list_entries",
    "log_conjugate_kernel",
    "log_partition_B",
    "new_atom_rate",
    "parse_model_config",
    "posterior_update",
    "predictive_logpmf",
    "rate_M",
    "round_total",
    "run_suite",
    "sample_marginal",
    "sample_size_biased",
    "weight_dist_params",
    "weight_rate_density",
]
