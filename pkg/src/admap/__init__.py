"""admap: metastable-basin mapping of non-convex energy landscapes.

The library couples magnetized local MCMC (attraction-diffusion) with a
propose/minimize/group mapping loop, cross-validated at desk scale by
Wang-Landau flat-histogram exploration and exact brute-force oracles, and
renders the resulting basin structure as disconnectivity trees.
"""

__version__ = "0.1.0"

from .ad import ADParams, ADResult, PhaseDiagram, ad_interpolate, ad_trial, phase_sweep
from .adelm import (AdelmConfig, BasinCatalog, MinimumRecord, adelm_run,
                    catalog_representative_states, consolidate, propose_start,
                    tune_heuristic)
from .barriers import (ADBarrierSpec, BarrierMatrix, PathTrace, barrier_matrix,
                       greedy_discrete_interpolate, initial_linear_path,
                       linear_1d_barrier, neb_refine, ridge_descent_refine)
from .dg import DGNode, DGTree, build_dg, render_dg
from .errors import (CompositionError, ConfigError, DivergenceError, LandscapeError,
                     NumericError, ParseError, RejectedInput, TuningFailure,
                     Unsupported)
from .gwl import GwlChain, GwlConfig, GwlResult, gwl_acceptance, gwl_run
from .landscapes import (DiscretizedModel, DoubleWell1D, EnergyModel,
                         GaussianMixture, QuadraticBowl, QuadraticSpinModel,
                         couplings_csv, ising_model, pixel_palette, sk_model,
                         state_distance)
from .minimize import local_minimize
from .networks import (ComposedModel, Layer, ReluNetworkModel, ReluNetworkSpec,
                       compose, load_network, load_relu_network, random_network,
                       save_network)
from .oracle import (OracleReport, exact_boltzmann, flip_stable_minima,
                     grid_minimax_barrier, minimax_barrier_matrix, oracle_report)
from .rng import stream
from .samplers import (ChainResult, Magnetization, SamplerConfig, gibbs_sweep,
                       langevin_step, run_chain, rw_metropolis_step)

__all__ = [name for name in dir() if not name.startswith("_")]
