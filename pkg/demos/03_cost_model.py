"""
Analytical multiply-add accounting for the progressive backbone
===============================================================

The backbone is a nested-UNet family: exit j uses the j-level encoder
column, every decoder node (i, k) with i + k <= j + 1, their upsampled
feeds and channel attention, and one output head. Costs are exact integer
multiply-add counts under fixed conventions, so they can be cross-checked
tap by tap.
"""
from rbqe.flopsmodel import (
    ArchConfig,
    cost_report,
    decoder_path_ratio,
    exit_cost,
    iter_exit_nodes,
)

# --- a toy net, small enough to audit by hand --------------------------------
toy = ArchConfig(levels=2, base_channels=2, input_channels=1)
print("toy net (2 levels, 2 channels) on a 4x4 input:")
for node in iter_exit_nodes(toy, 2, 4, 4):
    print(f"  {node.node_id:<12} {node.kind:<16} {node.h}x{node.w} "
          f"{node.c_in:>2}->{node.c_out:<2} {node.macs:>6} MACs")
print(f"  total: {exit_cost(toy, 2, 4, 4)} MACs")

# --- the full-size configuration ---------------------------------------------
cfg = ArchConfig()  # 6 levels, 32 channels
report = cost_report(cfg, 512, 512)
print("\ndefault net on 512x512, per exit:")
print(f"{'exit':>5} {'total GMacs':>12} {'decoder-only':>13}")
for j in sorted(report.cumulative_per_exit):
    print(f"{j:>5} {report.cumulative_per_exit[j] / 1e9:>12.3f} "
          f"{report.decoder_only_per_exit[j] / 1e9:>13.3f}")

# Costs next to the published whole-model figures. The published numbers are
# test-set averages over threshold-driven exit choices, so they sit between
# the first and last exits rather than on either one; the comparison is
# reported, not fitted.
for j, row in sorted(report.reference_comparison().items()):
    print(f"exit {j}: computed {row['computed_gmacs']:.2f} GMacs, "
          f"published {row['reference_gmacs']} GMacs, factor {row['ratio']:.2f}")

ratio_total = report.cumulative_per_exit[6] / report.cumulative_per_exit[2]
print(f"\nlast exit costs {ratio_total:.0%} of the first exit "
      f"(decoder path alone: {decoder_path_ratio(cfg, 512, 512):.1f}x)")

# The encoder column can also be charged in full to every exit, for the
# reading where the whole column runs before the first exit decision.
eager = cost_report(cfg, 512, 512, full_encoder=True)
print(f"exit-2 with the full encoder column: {eager.cumulative_per_exit[2] / 1e9:.3f} GMacs")
