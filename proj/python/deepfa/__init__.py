"""Projection-guided label propagation for deep feature annotation."""

from ._core import (
    DeepfaError,
    accuracy,
    cohens_kappa,
    minimax_costs,
    propagate,
    render_scatter,
    run_experiment,
    split,
    tsne_embed,
)

__all__ = [
    "DeepfaError",
    "accuracy",
    "cohens_kappa",
    "minimax_costs",
    "propagate",
    "render_scatter",
    "run_experiment",
    "split",
    "tsne_embed",
]
