"""Reduced-order models of periodically forced systems from invariant foliations."""

from pathlib import Path

import numpy as np

from ._foliate import (
    AffineModel,
    Bundles,
    Config,
    Dataset,
    Error,
    Grid,
    LinearId,
    NumericalError,
    System,
    ValidationError,
    decompose_bundles,
    gamma,
    generate_dataset,
    identify_linear,
    integrate,
    load_dataset,
    make_system,
    run_pipeline,
    shift_matrix,
    stages,
)


def read_backbone(path):
    """Backbone table as a dict of arrays: r, omega, zeta, rho, alpha."""
    lines = [l for l in Path(path).read_text().splitlines() if l and not l.startswith("#")]
    names = lines[0].split(",")
    table = np.loadtxt(lines[1:], delimiter=",", ndmin=2)
    return {name: table[:, i] for i, name in enumerate(names)}


__all__ = [
    "AffineModel",
    "Bundles",
    "Config",
    "Dataset",
    "Error",
    "Grid",
    "LinearId",
    "NumericalError",
    "System",
    "ValidationError",
    "decompose_bundles",
    "gamma",
    "generate_dataset",
    "identify_linear",
    "integrate",
    "load_dataset",
    "make_system",
    "read_backbone",
    "run_pipeline",
    "shift_matrix",
    "stages",
]
