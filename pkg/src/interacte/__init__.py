"""Knowledge-graph link prediction on permuted 2D grids.

Embedding pairs are arranged on chequered (or stacked / alternating)
grids under several feature permutations, convolved depth-wise with
circular filters, and scored 1-N against all entities.  A counting
subsystem measures exactly how many component interactions each layout
exposes to the kernels and verifies the layout inequalities by brute
force.
"""

from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .counting import (CountQuery, InteractionCount, PropositionReport,
                       alt_tau_hetero_expression, count_bruteforce,
                       count_closed_form, verify_propositions)
from .convcore import (circular_conv2d, conv2d, conv2d_backward, dropout,
                       gradcheck, relu, sigmoid, zero_conv2d)
from .evaluation import RankingMetrics, evaluate, filtered_rank
from .kgdata import (FilterIndex, KnowledgeGraph, TripleParseError, Vocab,
                     VocabError, build_filter_index, categorize_relations,
                     generate_synthetic_kg, load_knowledge_graph, load_triples)
from .model import (ConfigWarning, ModelConfig, ModelParams, bce_loss_smoothed,
                    forward_backward, init_params, score_1n)
from .reshape import (CellProvenance, ReshapePlan, invert, layout, make_plan,
                      pad, pad_provenance, reshape)
from .train import (AdamState, NumericError, TrainConfig, TrainResult,
                    adam_step, train_loop)

__version__ = "0.1.0"

__all__ = [
    "AdamState", "CellProvenance", "Checkpoint", "CheckpointError",
    "ConfigWarning", "CountQuery", "FilterIndex", "InteractionCount",
    "KnowledgeGraph", "ModelConfig", "ModelParams", "NumericError",
    "PropositionReport", "RankingMetrics", "ReshapePlan", "TrainConfig",
    "TrainResult", "TripleParseError", "Vocab", "VocabError",
    "adam_step", "alt_tau_hetero_expression", "bce_loss_smoothed",
    "build_filter_index", "categorize_relations", "circular_conv2d",
    "conv2d", "conv2d_backward", "count_bruteforce", "count_closed_form",
    "dropout", "evaluate", "filtered_rank", "forward_backward",
    "generate_synthetic_kg", "gradcheck", "init_params", "invert", "layout",
    "load_checkpoint", "load_knowledge_graph", "load_triples", "make_plan",
    "pad", "pad_provenance", "relu", "reshape", "save_checkpoint",
    "score_1n", "sigmoid", "train_loop", "verify_propositions",
    "zero_conv2d",
]
