"""Bayes-space functional data analysis of concentration densities.

The package represents densities on rectangular grids, works with them in
clr coordinates, decomposes trivariate densities into marginal and
interaction parts, detects deviating cells with DDC and its functional and
logratio variants, and clusters compartments.
"""
__version__ = "0.1.0"

from .bayes import (Box, ClrGrid, DensityGrid, Grid, clr, clr_inverse, distance,  # noqa: E402
                    inner_product, norm, perturb, power, subtract, uniform)
from .decomposition import (decompose, information_composition,  # noqa: E402
                            arithmetic_marginal, geometric_marginal)
from .ddc import ddc, functional_ddc, lr_ddc  # noqa: E402
from .clustering import complete_linkage, cut, auto_k  # noqa: E402

__all__ = [
    "Box", "Grid", "DensityGrid", "ClrGrid", "clr", "clr_inverse", "perturb", "power",
    "subtract", "inner_product", "norm", "distance", "uniform", "decompose",
    "information_composition", "geometric_marginal", "arithmetic_marginal", "ddc",
    "functional_ddc", "lr_ddc", "complete_linkage", "cut", "auto_k",
]
