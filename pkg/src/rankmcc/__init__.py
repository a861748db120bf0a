"""Multiclass classification through the lens of class ranking.

Scores over classes induce a ranking of the classes for each instance;
this package provides position-aware metrics over those rankings, an
informativeness analyzer for comparing metrics, differentiable ranking
losses with a from-scratch reverse-mode tensor engine, instance-class
interaction models, optimizers, and a seeded experiment harness with a CLI.
"""

from .autodiff import Tensor, finite_diff_grad, parameter, tensor
from .data import Dataset, batches, load_csv, save_csv, split, synth_blobs
from .losses import (
    LOSS_KINDS,
    LossParams,
    approx_ndcg_loss,
    approx_rank,
    batch_loss,
    gumbel_approx_ndcg,
    mse_loss,
    pair_logistic,
    softmax_ce,
)
from .metrics import (
    PositionDistribution,
    evaluate_scores,
    metric_entropy,
    mrr,
    ndcg_at_k,
    precision_at_k,
    rank_classes,
    top_k_accuracy,
)
from .model import (
    INTERACTION_KINDS,
    ClassEmbeddingTable,
    InstanceEncoder,
    InteractionHead,
    RankingModel,
    build_model,
    from_classical,
    load_checkpoint,
    save_checkpoint,
)
from .optim import Adagrad, Adam, lr_grid, make_optimizer

__version__ = "0.1.0"
