"""Graph-indexed approximate message passing with state evolution.

Iterations are indexed by the directed edges of a small graph; each
edge carries a matrix multiplication, a nonlinearity consuming the
incoming edges, and a memory correction.  The package provides the
engine, an exact embedding into a single symmetric iteration, Gaussian
covariance recursions that predict iterate statistics, a model zoo
(penalized GLMs, multilayer chains, spiked matrices, mixture
classification) and numerical checks for the identities involved.
"""

from .errors import (ConfigError, GraphError, GraphampError, NumericalError,
                     ShapeError)
from .graphs import (EdgeId, GraphSpec, canonical_edge_order, edges_into,
                     line_graph, require_valid, single_loop, two_node_chain,
                     validate)
from .nonlinearity import (Entrywise, EntrywiseThenMix, FromCallable,
                           Identity, Nonlinearity, Scaled, SideData, Zero,
                           fd_jacobian_trace)
from .prox import (ProxSpec, penalty_grad, penalty_value, prox,
                   prox_deriv, shifted_prox, soft_threshold)
from .ensembles import (EnsembleSpec, normals, sample, sample_goe,
                        sample_iid, spectral_inv_sqrt, spectral_sqrt, stream)
from .engine import (AmpTrajectory, GraphInstance, Observable, init,
                     norm_sq_observable, observe, overlap_observable, run,
                     stationary_provider, step)
from .embedding import (BlockLayout, EmbeddedInstance, EquivalenceReport,
                        embed, run_symmetric, verify_equivalence)
from .state_evolution import (SECovariances, amp_observable_stats, compare,
                              mc_observable_stats, se_run)
from .gamp_se import (Channel, GampSePoint, GaussBernoulliPrior,
                      GaussianPrior, GlmScalars, LinearGaussianChannel,
                      LogisticChannel, Prior, QuadSpec, RademacherPrior,
                      SignChannel, gamp_overlap_se, make_channel)
from .checks import (CheckReport, goe_projection_checks, onsager_fd_check,
                     opnorm_check, stein_check)
from .config import ExperimentConfig, load, loads
from . import models
from .models import (CommitteeModel, GlmModel, GlmTeacher, GmmSpatialModel,
                     LayerSpec, MultilayerModel, SpikedModel,
                     build_committee_instance, build_gamp_instance,
                     build_gmm_spatial_instance, build_multilayer_instance,
                     build_spiked_instance, gamp_estimates,
                     gamp_iterate_stats, kkt_residual, lasso_model,
                     layer_specs, logistic_model, ridge_model,
                     spiked_scalar_se)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "GraphError", "GraphampError", "NumericalError", "ShapeError",
    "EdgeId", "GraphSpec", "canonical_edge_order", "edges_into",
    "line_graph", "require_valid", "single_loop", "two_node_chain", "validate",
    "Entrywise", "EntrywiseThenMix", "FromCallable", "Identity",
    "Nonlinearity", "Scaled", "SideData", "Zero", "fd_jacobian_trace",
    "ProxSpec", "penalty_grad", "penalty_value", "prox",
    "prox_deriv", "shifted_prox", "soft_threshold",
    "EnsembleSpec", "normals", "sample", "sample_goe", "sample_iid",
    "spectral_inv_sqrt", "spectral_sqrt", "stream",
    "AmpTrajectory", "GraphInstance", "Observable", "init",
    "norm_sq_observable", "observe", "overlap_observable", "run",
    "stationary_provider", "step",
    "BlockLayout", "EmbeddedInstance", "EquivalenceReport", "embed",
    "run_symmetric", "verify_equivalence",
    "SECovariances", "amp_observable_stats", "compare",
    "mc_observable_stats", "se_run",
    "Channel", "GampSePoint", "GaussBernoulliPrior", "GaussianPrior",
    "GlmScalars", "LinearGaussianChannel", "LogisticChannel", "Prior",
    "QuadSpec", "RademacherPrior", "SignChannel", "gamp_overlap_se",
    "make_channel",
    "CheckReport", "goe_projection_checks", "onsager_fd_check",
    "opnorm_check", "stein_check",
    "ExperimentConfig", "load", "loads",
    "models",
    "CommitteeModel", "GlmModel", "GlmTeacher", "GmmSpatialModel",
    "LayerSpec", "MultilayerModel", "SpikedModel",
    "build_committee_instance", "build_gamp_instance",
    "build_gmm_spatial_instance", "build_multilayer_instance",
    "build_spiked_instance", "gamp_estimates", "gamp_iterate_stats",
    "kkt_residual", "lasso_model", "layer_specs", "logistic_model",
    "ridge_model", "spiked_scalar_se",
]
