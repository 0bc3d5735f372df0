"""
No-reference quality scoring with Tchebichef moments
====================================================

The scorer never sees the pristine image. It partitions the input into
patches offset by half a compression block so every block boundary lands
inside some patch, classifies each patch as smooth or textured by non-DC
moment energy, and scores block artifacts and blur separately.
"""
import numpy as np

from rbqe import CodecKind, IqamParams, assess, build_basis, moments, partition, sstm
from rbqe.iqam import PatchClass, blocky_energies, blur_patch, classify, q_smooth, q_textured
from scenes import jpeg_roundtrip, photo_scene

params = IqamParams(codec=CodecKind.JPEG)  # B = 8, exit threshold 0.74
raw = photo_scene(seed=2)

# --- one patch by hand -----------------------------------------------------
grid = partition(jpeg_roundtrip(raw, 20), params.codec)
basis = build_basis(grid.patch_size)
print(f"partitioned into {len(grid)} patches of {grid.patch_size}x{grid.patch_size} "
      f"starting at offset {grid.offset}")

patch = grid.blocks[len(grid) // 2]
m = moments(patch, basis)
print(f"sample patch: non-DC energy {sstm(m):.5f} -> {classify(m, params).value}")
if classify(m, params) is PatchClass.SMOOTH:
    e_h, e_v = blocky_energies(m, params)
    print(f"  blockiness energies ({e_h:.4f}, {e_v:.4f}) -> "
          f"score {q_smooth(e_h, e_v, params):.4f}")
else:
    m_blur = moments(blur_patch(patch, params), basis)
    print(f"  blur score {q_textured(m, m_blur, params):.4f}")

# --- whole images across a quality ladder ----------------------------------
# Q combines the mean smooth score (weight alpha=0.9) with the mean textured
# score (beta=0.1). Scores rise with encoding quality; the exit threshold
# t_q separates "good enough" candidates from ones needing more work.
print(f"\n{'QF':>4} {'Q':>7} {'Q_S':>7} {'Q_T':>7} {'smooth':>7} {'textured':>9}  exit?")
for qf in (10, 20, 30, 50, 70, 90):
    report = assess(jpeg_roundtrip(raw, qf), params)
    verdict = "exit" if report.q >= params.t_q else "continue"
    print(f"{qf:>4} {report.q:7.4f} {report.q_s_bar:7.4f} {report.q_t_bar:7.4f} "
          f"{report.n_smooth:>7} {report.n_textured:>9}  {verdict}")

# Flat content has no non-DC energy anywhere, which the printed formulas score
# as the worst possible quality.
from rbqe import Plane  # noqa: E402

flat = assess(Plane(np.full((64, 64), 0.5)), params)
print(f"\nuniform gray plane: Q = {flat.q} (degenerate by construction)")
