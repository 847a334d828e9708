from .filters import FAMILIES, FilterPair, get_filters
from .threshold import RigrsureThreshold, denoise, denoise_bands, noise_sigma, rigrsure, risk_curve, shrink
from .transform import (
    BOUNDARIES,
    WaveletDecomposition,
    band_length,
    decompose,
    dwt_step,
    idwt_step,
    max_level,
    reconstruct,
)

__all__ = [
    "BOUNDARIES",
    "FAMILIES",
    "FilterPair",
    "RigrsureThreshold",
    "WaveletDecomposition",
    "band_length",
    "decompose",
    "denoise",
    "denoise_bands",
    "dwt_step",
    "get_filters",
    "idwt_step",
    "max_level",
    "noise_sigma",
    "reconstruct",
    "rigrsure",
    "risk_curve",
    "shrink",
]
