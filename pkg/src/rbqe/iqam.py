"""No-reference quality scoring of compressed images from Tchebichef moments.

Patches from the half-block-offset partition are split into smooth and
textured ones by non-DC moment energy. Smooth patches are scored for block
artifacts from the ratio of highest-order moments to total non-DC magnitude;
textured patches are scored for blur by comparing moments before and after a
3x3 Gaussian. The two mean scores combine into one exit score Q.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .imagecore import CodecKind, Plane, partition
from .tchebichef import MomentMatrix, build_basis, moments_stack

DEFAULT_T_Q = {CodecKind.HEVC_MSP: 0.89, CodecKind.JPEG: 0.74}


class PatchClass(Enum):
    SMOOTH = "smooth"
    TEXTURED = "textured"


class ExitDecision(Enum):
    EXIT = "exit"
    CONTINUE = "continue"


@dataclass(frozen=True)
class IqamParams:
    """Scoring constants. ``t_q`` defaults per codec (0.89 HEVC-MSP, 0.74 JPEG).

    ``mode`` picks the textured-score normalization: ``default`` divides the
    similarity sum by n*n entries so the score stays in [0,1]; ``literal``
    keeps the printed 1/(3x3) factor for fidelity experiments.
    """

    codec: CodecKind = CodecKind.JPEG
    alpha: float = 0.9
    beta: float = 0.1
    c_stab: float = 1e-8
    t_e: float = 0.05
    t_sstm: float = 4e-3
    t_q: float | None = None
    blur_sigma: float = 5.0
    mode: str = "default"

    def __post_init__(self):
        if self.t_q is None:
            object.__setattr__(self, "t_q", DEFAULT_T_Q[self.codec])
        if self.alpha <= self.beta:
            raise ValueError(f"alpha must exceed beta, got {self.alpha} <= {self.beta}")
        for name in ("c_stab", "t_e", "t_sstm", "blur_sigma"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        # t_q = 0 (always exit first) and t_q > 1 (never exit early) are
        # legitimate sweep endpoints, so only negatives are rejected
        if self.t_q < 0:
            raise ValueError(f"t_q must be nonnegative, got {self.t_q}")
        if self.mode not in ("default", "literal"):
            raise ValueError(f"mode must be 'default' or 'literal', got {self.mode!r}")

    def with_t_q(self, t_q: float) -> "IqamParams":
        return replace(self, t_q=t_q)

    def to_json(self) -> str:
        doc = {
            "alpha": self.alpha,
            "beta": self.beta,
            "c_stab": self.c_stab,
            "t_e": self.t_e,
            "t_sstm": self.t_sstm,
            "t_q": self.t_q,
            "codec": self.codec.value,
            "mode": self.mode,
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "IqamParams":
        doc = json.loads(text)
        if not isinstance(doc, dict):
            raise ValueError("params document must be a JSON object")
        kwargs = {}
        if "codec" in doc:
            kwargs["codec"] = CodecKind(doc.pop("codec"))
        known = {"alpha", "beta", "c_stab", "t_e", "t_sstm", "t_q", "blur_sigma", "mode"}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown params keys: {sorted(unknown)}")
        kwargs.update(doc)
        return cls(**kwargs)


@dataclass(frozen=True)
class QualityReport:
    """Per-image outcome: mean smooth / textured scores, composite Q, counts."""

    q_s_bar: float
    q_t_bar: float
    q: float
    n_smooth: int
    n_textured: int

    def to_dict(self) -> dict:
        return {
            "q_s_bar": self.q_s_bar,
            "q_t_bar": self.q_t_bar,
            "q": self.q,
            "n_smooth": self.n_smooth,
            "n_textured": self.n_textured,
        }


# ---------------------------------------------------------------------------
# per-patch pieces


def classify(m: MomentMatrix, params: IqamParams) -> PatchClass:
    """Smooth iff the non-DC energy is strictly below t_sstm."""
    a = m.m
    energy = float(np.sum(a * a) - a[0, 0] ** 2)
    return PatchClass.SMOOTH if energy < params.t_sstm else PatchClass.TEXTURED


def blocky_energies(m: MomentMatrix, params: IqamParams) -> tuple[float, float]:
    """Horizontal/vertical block-artifact energies, each clamped to t_e.

    e_h is the highest-order column's share of the total non-DC moment
    magnitude; e_v is the highest-order row's share. For 8x8 patches the
    "3rd order" of the 4x4 formulation generalizes to index n-1.
    """
    a = np.abs(m.m)
    den = float(a.sum()) - float(a[0, 0]) + params.c_stab
    e_h = float(a[:, -1].sum()) / den
    e_v = float(a[-1, :].sum()) / den
    return min(e_h, params.t_e), min(e_v, params.t_e)


def q_smooth(e_h: float, e_v: float, params: IqamParams) -> float:
    """Blockiness score in [0,1]: log base (1-t_e) of (1 - mean energy)."""
    if not (0 <= e_h <= params.t_e and 0 <= e_v <= params.t_e):
        raise ValueError(f"energies must lie in [0, {params.t_e}], got ({e_h}, {e_v})")
    return math.log(1.0 - (e_h + e_v) / 2.0) / math.log(1.0 - params.t_e)


def _gauss3_kernel(sigma: float) -> np.ndarray:
    r = np.array([-1.0, 0.0, 1.0])
    dx, dy = np.meshgrid(r, r)
    k = np.exp(-(dx**2 + dy**2) / (2.0 * sigma**2))
    return k / k.sum()


def _blur_stack(patches: np.ndarray, sigma: float) -> np.ndarray:
    # 3x3 convolution with replicate padding, applied to a (N, B, B) stack
    k = _gauss3_kernel(sigma)
    padded = np.pad(patches, ((0, 0), (1, 1), (1, 1)), mode="edge")
    b = patches.shape[-1]
    out = np.zeros_like(patches, dtype=np.float64)
    for dy in range(3):
        for dx in range(3):
            out += k[dy, dx] * padded[:, dy : dy + b, dx : dx + b]
    return out


def blur_patch(patch: np.ndarray, params: IqamParams) -> np.ndarray:
    """Normalized 3x3 Gaussian blur (sigma from params) with replicate padding."""
    patch = np.asarray(patch, dtype=np.float64)
    if patch.ndim != 2 or patch.shape[0] != patch.shape[1]:
        raise ValueError(f"expected a square patch, got shape {patch.shape}")
    return _blur_stack(patch[np.newaxis], params.blur_sigma)[0]


def q_textured(m: MomentMatrix, m_blur: MomentMatrix, params: IqamParams) -> float:
    """Blur score in [0,1]: one minus the moment similarity to the re-blurred patch."""
    if m.n != m_blur.n:
        raise ValueError(f"moment order mismatch: {m.n} vs {m_blur.n}")
    s = _similarity(m.m, m_blur.m, params.c_stab)
    return _qt_from_similarity(s, params)


def _similarity(a: np.ndarray, b: np.ndarray, c: float) -> np.ndarray:
    return (2.0 * a * b + c) / (a * a + b * b + c)


def _qt_from_similarity(s: np.ndarray, params: IqamParams) -> float:
    if params.mode == "literal":
        qt = 1.0 - float(s.sum()) / 9.0
    else:
        qt = 1.0 - float(s.mean())
    return min(max(qt, 0.0), 1.0)


# ---------------------------------------------------------------------------
# whole-image assessment


def assess(plane: Plane, params: IqamParams) -> QualityReport:
    """Score one image: partition, classify, score per class, compose Q.

    Patch order is row-major over the grid; an empty class contributes a
    factor of 1 so the other class governs Q. Flat content has zero non-DC
    energy everywhere and therefore scores Q = 0.
    """
    grid = partition(plane, params.codec)
    basis = build_basis(grid.patch_size)
    m_all = moments_stack(grid.blocks, basis)

    energy = np.einsum("nij,nij->n", m_all, m_all) - m_all[:, 0, 0] ** 2
    smooth_mask = energy < params.t_sstm

    m_smooth = m_all[smooth_mask]
    if m_smooth.shape[0]:
        a = np.abs(m_smooth)
        den = a.sum(axis=(1, 2)) - a[:, 0, 0] + params.c_stab
        e_h = np.minimum(a[:, :, -1].sum(axis=1) / den, params.t_e)
        e_v = np.minimum(a[:, -1, :].sum(axis=1) / den, params.t_e)
        scores_s = np.log(1.0 - (e_h + e_v) / 2.0) / math.log(1.0 - params.t_e)
        q_s_bar = float(scores_s.mean())
    else:
        q_s_bar = 1.0

    textured_blocks = grid.blocks[~smooth_mask]
    if textured_blocks.shape[0]:
        m_tex = m_all[~smooth_mask]
        m_blur = moments_stack(_blur_stack(textured_blocks, params.blur_sigma), basis)
        s = _similarity(m_tex, m_blur, params.c_stab)
        if params.mode == "literal":
            scores_t = 1.0 - s.sum(axis=(1, 2)) / 9.0
        else:
            scores_t = 1.0 - s.mean(axis=(1, 2))
        q_t_bar = float(np.clip(scores_t, 0.0, 1.0).mean())
    else:
        q_t_bar = 1.0

    q = q_s_bar**params.alpha * q_t_bar**params.beta
    n_smooth = int(smooth_mask.sum())
    return QualityReport(
        q_s_bar=q_s_bar,
        q_t_bar=q_t_bar,
        q=q,
        n_smooth=n_smooth,
        n_textured=len(grid) - n_smooth,
    )


def decide_exit(q: float, t_q: float) -> ExitDecision:
    """EXIT once the score reaches the threshold (boundary counts as exit)."""
    return ExitDecision.EXIT if q >= t_q else ExitDecision.CONTINUE
