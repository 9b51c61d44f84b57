# SPDX-License-Identifier: Apache-2.0
from ._core import (
    agreement,
    config_hash,
    cosine,
    default_config,
    kl_divergence,
    run_cli,
    select_topk,
    softmax,
    student_gate,
    teacher_gate,
    train_and_evaluate,
    uncertainty,
)

__all__ = [
    "agreement",
    "config_hash",
    "cosine",
    "default_config",
    "kl_divergence",
    "run_cli",
    "select_topk",
    "softmax",
    "student_gate",
    "teacher_gate",
    "train_and_evaluate",
    "uncertainty",
]
