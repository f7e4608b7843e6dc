"""Information Bottleneck analysis of translation encoders."""
from .baselines import DeviationReport, PerturbationSpec, deviation, perturb_encoder, random_encoder
from .beliefs import BeliefModel, belief_from_similarity, joint_wu
from .encoders import (
    AlignmentTable,
    Encoder,
    PlanePoint,
    accuracy,
    build_encoder,
    complexity,
    parse_alignments,
)
from .frontier import FrontierCurve, IBProblem, beta_grid, frontier_value, ib_fixed_point, ib_objective, reverse_annealing
from .info import entropy, kl_divergence, mutual_information

__version__ = "0.1.0"
