"""Curriculum RL engine with learned latent task representations.

Subpackages: :mod:`acrl.nn` (neural substrate), :mod:`acrl.envs`
(contextual environments), :mod:`acrl.agent` (on-policy learner),
:mod:`acrl.taskrepr` (VAE task embeddings), :mod:`acrl.curriculum`
(the curriculum controller), :mod:`acrl.mds`, :mod:`acrl.cli`.
"""

from .nn import (AdamState, ContractViolation, DiagGaussian, Mlp,
                 NumericFault, adam_step, finite_diff_check,
                 kl_to_standard_normal, reparam_sample)
from .envs import (Context, Trajectory, Transition, episodic_return,
                   make_env)
from .agent import Policy, RolloutBatch, compute_gae, evaluate, ppo_update
from .taskrepr import (RepresentationLearner, TaskEmbedding,
                       TransitionEncoder, VaeDecoders, aggregate_trajectory,
                       decode_context, elbo_loss, latent_distance)
from .curriculum import (AcrlRunner, CurriculumConfig, TaskBuffer, VaeBuffer,
                         ebu_update, lsp_update, run_acrl,
                         sample_training_context, source_distribution_init)
from .mds import SpectrumReport, jacobi_eigenvalues, mds_spectrum
from .config import RunConfig, load_config

__version__ = "0.1.0"
