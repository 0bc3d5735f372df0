"""Early-exit blind quality enhancement toolkit.

Submodules:
  imagecore   pixel containers, PGM/PNG I/O, partition, PSNR/SSIM
  tchebichef  orthonormal discrete Tchebichef bases and patch moments
  iqam        no-reference quality scoring and the exit decision
  flopsmodel  analytical multiply-add accounting per exit
  pipeline    early-exit enhancement controller
  cli         command-line entry points (assess/enhance/flops/corpus/eval)
"""

from .imagecore import CodecKind, Plane, delta_psnr, load_plane, partition, psnr, save_plane, ssim
from .iqam import ExitDecision, IqamParams, PatchClass, QualityReport, assess, decide_exit
from .tchebichef import MomentBasis, MomentMatrix, build_basis, moments, sstm

__all__ = [
    "CodecKind",
    "Plane",
    "delta_psnr",
    "load_plane",
    "partition",
    "psnr",
    "save_plane",
    "ssim",
    "ExitDecision",
    "IqamParams",
    "PatchClass",
    "QualityReport",
    "assess",
    "decide_exit",
    "MomentBasis",
    "MomentMatrix",
    "build_basis",
    "moments",
    "sstm",
]

__version__ = "0.1.0"
