"""Occlusion-robust 3D hand mesh reconstruction: python surface of the C++ core.

The heavy lifting (training, the CLI) lives in the C++ tree; this package
exposes the numeric operations: the hand skeleton graph and its Laplacians,
Chebyshev graph convolution, sinusoidal position tables, the seeded skinned
hand model, camera projection, evaluation metrics, and the synthetic dataset
generator.
"""

from handmesh._core import (
    HAND_JOINTS,
    HAND_VERTICES,
    POSE_PARAMS,
    SHAPE_PARAMS,
    HandModel,
    auc,
    cheb_graph_conv,
    evaluate_metrics,
    f_score,
    generate_samples,
    lambda_max,
    mpjpe,
    normalized_laplacian,
    pa_mpjpe,
    positional_encoding,
    procrustes_align,
    project,
    rodrigues,
    scaled_laplacian,
    skeleton_adjacency,
    skeleton_edges,
    write_dataset,
)

__all__ = [
    "HAND_JOINTS",
    "HAND_VERTICES",
    "POSE_PARAMS",
    "SHAPE_PARAMS",
    "HandModel",
    "auc",
    "cheb_graph_conv",
    "evaluate_metrics",
    "f_score",
    "generate_samples",
    "lambda_max",
    "mpjpe",
    "normalized_laplacian",
    "pa_mpjpe",
    "positional_encoding",
    "procrustes_align",
    "project",
    "rodrigues",
    "scaled_laplacian",
    "skeleton_adjacency",
    "skeleton_edges",
    "write_dataset",
]

__version__ = "0.1.0"
