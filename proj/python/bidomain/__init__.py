"""Bidomain inverse problem toolkit: Python access to the C++ core."""

from ._bidomain import (
    BidomainError,
    SurfaceMesh,
    add_gaussian_noise,
    heat_kernel,
    icosphere,
    lcurve_corner,
    load_mesh,
    parabolic_green,
    protocol_1,
    protocol_2,
    report_table,
    rmse,
    synth,
)

__version__ = "0.1.0"
