"""Learned reachability maps: sampling, training, evaluation and planning."""

from ._reachmap import (
    Model,
    ReachmapError,
    compute_iou,
    encode,
    load_model,
    oracle_grid,
    plan,
    read_samples,
    run_cli,
    sample,
    solve_qp,
    train_mlp,
    train_ocsvm,
    train_svm,
)

__all__ = [
    "Model",
    "ReachmapError",
    "compute_iou",
    "encode",
    "load_model",
    "oracle_grid",
    "plan",
    "read_samples",
    "run_cli",
    "sample",
    "solve_qp",
    "train_mlp",
    "train_ocsvm",
    "train_svm",
]
