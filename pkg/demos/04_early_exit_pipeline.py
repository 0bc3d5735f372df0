"""
The early-exit controller and the quality / compute tradeoff
============================================================

Enhancement stages run in order. After each stage except the last, the
candidate is scored; the first score to reach t_q wins and later stages
never run. If nothing qualifies, the final candidate ships unassessed.

The stages here are classical deblocking filters standing in for network
exits: good enough to show the control flow and the compute tradeoff, but a
cascade of smoothers will not add PSNR the way trained exits would.
"""
import numpy as np

from rbqe import CodecKind, IqamParams, delta_psnr
from rbqe.pipeline import ExitCostRef, StageSpec, run, trace_to_csv
from scenes import jpeg_roundtrip, photo_scene

params = IqamParams(codec=CodecKind.JPEG)

# Five deblocking stages of increasing strength stand in for the network's
# five exits; each declares the analytical cost of the matching exit.
stages = [
    StageSpec(kind="deblock", strength=s, block_size=8,
              declared_cost=ExitCostRef(exit_index=j))
    for j, s in zip(range(2, 7), (0.2, 0.4, 0.6, 0.8, 1.0))
]

# --- one run, one trace -------------------------------------------------------
raw = photo_scene(seed=3)
compressed = jpeg_roundtrip(raw, 20)
enhanced, trace = run(compressed, stages, params)
print(f"chose stage {trace.chosen_exit} after spending "
      f"{trace.accumulated_cost / 1e9:.2f} GMacs")
print(trace_to_csv(trace))

# --- easy inputs exit early, hard inputs travel further ------------------------
for qf in (10, 30, 50, 90):
    img = jpeg_roundtrip(raw, qf)
    out, tr = run(img, stages, params)
    print(f"QF{qf:02d}: exit {tr.chosen_exit}, {tr.accumulated_cost / 1e9:5.2f} GMacs")

# A single full-strength deblock genuinely helps the heavily blocked input:
one_stage = [StageSpec(kind="deblock", strength=1.0, block_size=8)]
rough = jpeg_roundtrip(raw, 10)
fixed, _ = run(rough, one_stage, params)
print(f"\nsingle deblock(1.0) on QF10: dPSNR {delta_psnr(raw, rough, fixed):+.3f} dB")

# --- sweeping the threshold ----------------------------------------------------
# A higher bar keeps images in the pipeline longer: mean chosen exit and mean
# spent compute both rise monotonically with t_q. That monotone dial is the
# point; with trained exits the extra compute would buy enhancement quality.
scenes = [photo_scene(seed) for seed in range(6)]
ladder = [jpeg_roundtrip(r, qf) for r in scenes for qf in (10, 30, 50, 70, 90)]
print(f"\n{'t_q':>5} {'mean exit':>10} {'mean GMacs':>11}")
for t_q in (0.5, 0.6, 0.7, 0.8, 0.9):
    swept = params.with_t_q(t_q)
    exits, macs = [], []
    for comp in ladder:
        _, tr = run(comp, stages, swept)
        exits.append(tr.chosen_exit)
        macs.append(tr.accumulated_cost)
    print(f"{t_q:>5.1f} {np.mean(exits):>10.2f} {np.mean(macs) / 1e9:>11.2f}")
