"""Analytical multiply-add accounting for the progressive UNet backbone.

Counts are exact integers under fixed conventions: bias-free, same padding,
stride-2 convs at output resolution, 2x2 stride-2 transposed convs at input
resolution, channel attention as 2*h*w*c + c*k. Node ids are shared with the
executable toy network so the two can be cross-checked name by name.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Iterator

NODE_KINDS = (
    "conv3x3",
    "depthwise3x3",
    "pointwise",
    "downsample3x3s2",
    "transposed2x2s2",
    "eca",
)

# Published whole-model costs (GMacs) for the 6-level, 32-channel model on
# 512x512 inputs: 17.9 for the easiest and 27.5 for the hardest inputs.
# Report-only anchors; see CostReport.reference_comparison().
REFERENCE_GMACS_512 = {2: 17.9, 6: 27.5}


@dataclass(frozen=True)
class ArchConfig:
    """Parametric description of the backbone.

    Encoder nodes are two full 3x3 convs; decoder node (i, j) takes the
    dense concatenation of its j-1 same-level predecessors plus one
    upsampled feed (c*j channels) through two separable convs back to c.
    """

    levels: int = 6
    base_channels: int = 32
    input_channels: int = 1
    k_eca: int = 3
    separable_decoders: bool = True
    eca: bool = True

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError(f"levels must be >= 2, got {self.levels}")
        if self.base_channels < 1 or self.input_channels < 1 or self.k_eca < 1:
            raise ValueError("channel counts and k_eca must be positive")

    def to_json(self) -> str:
        return json.dumps(
            {
                "levels": self.levels,
                "base_channels": self.base_channels,
                "input_channels": self.input_channels,
                "k_eca": self.k_eca,
                "separable_decoders": self.separable_decoders,
                "eca": self.eca,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "ArchConfig":
        doc = json.loads(text)
        if not isinstance(doc, dict):
            raise ValueError("arch document must be a JSON object")
        return cls(**doc)


def node_macs(kind: str, h: int, w: int, c_in: int, c_out: int, k_eca: int = 3) -> int:
    """Multiply-adds for one primitive op at input resolution h x w."""
    if h <= 0 or w <= 0 or c_in <= 0 or c_out <= 0:
        raise ValueError("dimensions and channel counts must be positive")
    if kind == "conv3x3":
        return h * w * c_out * 9 * c_in
    if kind == "depthwise3x3":
        return h * w * c_in * 9
    if kind == "pointwise":
        return h * w * c_out * c_in
    if kind == "downsample3x3s2":
        if h % 2 or w % 2:
            raise ValueError(f"stride-2 conv needs even input, got {h}x{w}")
        return (h // 2) * (w // 2) * c_out * 9 * c_in
    if kind == "transposed2x2s2":
        return h * w * c_in * c_out * 4
    if kind == "eca":
        return 2 * h * w * c_in + c_in * k_eca
    raise ValueError(f"unknown node kind {kind!r}")


@dataclass(frozen=True)
class NodeCost:
    node_id: str
    kind: str
    group: str  # encoder | downsample | decoder | head
    level: int
    h: int
    w: int
    c_in: int
    c_out: int
    macs: int


def _level_res(h: int, w: int, level: int) -> tuple[int, int]:
    return h >> (level - 1), w >> (level - 1)


def iter_exit_nodes(
    cfg: ArchConfig, exit_j: int, h: int, w: int, full_encoder: bool = False
) -> Iterator[NodeCost]:
    """Enumerate every primitive op of the exit_j sub-network.

    The sub-network is the exit_j-level UNet: encoder column 1..exit_j (or
    the full column when ``full_encoder``), its downsamplers, every decoder
    node (i, k) with k >= 2 and i + k <= exit_j + 1 plus their upsampled
    feeds and attention, and the one output head.
    """
    if not 2 <= exit_j <= cfg.levels:
        raise ValueError(f"exit index {exit_j} outside 2..{cfg.levels}")
    enc_depth = cfg.levels if full_encoder else exit_j
    div = 1 << (enc_depth - 1)
    if h % div or w % div:
        raise ValueError(f"input {h}x{w} not divisible by 2^{enc_depth - 1}")
    c = cfg.base_channels

    def op(node_id, kind, group, level, hh, ww, c_in, c_out):
        return NodeCost(
            node_id, kind, group, level, hh, ww, c_in, c_out,
            node_macs(kind, hh, ww, c_in, c_out, cfg.k_eca),
        )

    for i in range(1, enc_depth + 1):
        hi, wi = _level_res(h, w, i)
        c_first = cfg.input_channels if i == 1 else c
        yield op(f"c{i}_1.conv1", "conv3x3", "encoder", i, hi, wi, c_first, c)
        yield op(f"c{i}_1.conv2", "conv3x3", "encoder", i, hi, wi, c, c)
        if cfg.eca:
            yield op(f"c{i}_1.eca", "eca", "encoder", i, hi, wi, c, c)
        if i < enc_depth:
            yield op(f"down{i}", "downsample3x3s2", "downsample", i, hi, wi, c, c)

    for k in range(2, exit_j + 1):
        for i in range(1, exit_j + 2 - k):
            hi, wi = _level_res(h, w, i)
            hlo, wlo = _level_res(h, w, i + 1)
            yield op(f"up{i}_{k}", "transposed2x2s2", "decoder", i + 1, hlo, wlo, c, c)
            width = c * k
            if cfg.separable_decoders:
                yield op(f"c{i}_{k}.dw1", "depthwise3x3", "decoder", i, hi, wi, width, width)
                yield op(f"c{i}_{k}.pw1", "pointwise", "decoder", i, hi, wi, width, c)
                yield op(f"c{i}_{k}.dw2", "depthwise3x3", "decoder", i, hi, wi, c, c)
                yield op(f"c{i}_{k}.pw2", "pointwise", "decoder", i, hi, wi, c, c)
            else:
                yield op(f"c{i}_{k}.conv1", "conv3x3", "decoder", i, hi, wi, width, c)
                yield op(f"c{i}_{k}.conv2", "conv3x3", "decoder", i, hi, wi, c, c)
            if cfg.eca:
                yield op(f"c{i}_{k}.eca", "eca", "decoder", i, hi, wi, c, c)

    yield op(f"head{exit_j}", "conv3x3", "head", 1, h, w, c, 1)


def exit_cost(cfg: ArchConfig, exit_j: int, h: int, w: int, full_encoder: bool = False) -> int:
    """Total MACs of the exit_j sub-network."""
    return sum(n.macs for n in iter_exit_nodes(cfg, exit_j, h, w, full_encoder))


def decoder_only_cost(cfg: ArchConfig, exit_j: int, h: int, w: int) -> int:
    """Exit cost excluding the shared encoder column and its downsamplers."""
    return sum(
        n.macs
        for n in iter_exit_nodes(cfg, exit_j, h, w)
        if n.group in ("decoder", "head")
    )


def decoder_path_ratio(cfg: ArchConfig, h: int, w: int) -> float:
    """Cost growth of the decoder path from the first exit to the last."""
    return decoder_only_cost(cfg, cfg.levels, h, w) / decoder_only_cost(cfg, 2, h, w)


@dataclass(frozen=True)
class CostReport:
    """Per-node and per-exit MAC totals for one configuration and input size."""

    cfg: ArchConfig
    h: int
    w: int
    full_encoder: bool
    per_node: dict[str, int]
    cumulative_per_exit: dict[int, int]
    decoder_only_per_exit: dict[int, int]

    def reference_comparison(self) -> dict[int, dict[str, float]]:
        """Computed totals next to the published GMac figures (factor, not a fit)."""
        out = {}
        for j, ref in REFERENCE_GMACS_512.items():
            if j in self.cumulative_per_exit:
                got = self.cumulative_per_exit[j] / 1e9
                out[j] = {
                    "computed_gmacs": got,
                    "reference_gmacs": ref,
                    "ratio": ref / got if got else float("inf"),
                }
        return out

    def to_json(self) -> str:
        doc = {
            "schema_version": "1",
            "arch": json.loads(self.cfg.to_json()),
            "height": self.h,
            "width": self.w,
            "full_encoder": self.full_encoder,
            "per_node": self.per_node,
            "cumulative_per_exit": {str(k): v for k, v in self.cumulative_per_exit.items()},
            "decoder_only_per_exit": {str(k): v for k, v in self.decoder_only_per_exit.items()},
        }
        if self.cfg.levels == 6 and (self.h, self.w) == (512, 512):
            doc["reference_comparison"] = {
                str(k): v for k, v in self.reference_comparison().items()
            }
        return json.dumps(doc, indent=2)

    def nodes_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["schema_version", "node_id", "macs"])
        for node_id, macs in self.per_node.items():
            writer.writerow(["1", node_id, macs])
        return buf.getvalue()

    def exits_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["schema_version", "exit", "cumulative_macs", "decoder_only_macs"])
        for j in sorted(self.cumulative_per_exit):
            writer.writerow(["1", j, self.cumulative_per_exit[j], self.decoder_only_per_exit[j]])
        return buf.getvalue()


def cost_report(cfg: ArchConfig, h: int, w: int, full_encoder: bool = False) -> CostReport:
    """Cost the whole net: per-node map plus cumulative and decoder-only totals."""
    per_node: dict[str, int] = {}
    cumulative: dict[int, int] = {}
    decoder_only: dict[int, int] = {}
    for j in range(2, cfg.levels + 1):
        total = 0
        dec = 0
        for n in iter_exit_nodes(cfg, j, h, w, full_encoder):
            per_node[n.node_id] = n.macs
            total += n.macs
            if n.group in ("decoder", "head"):
                dec += n.macs
        cumulative[j] = total
        decoder_only[j] = dec
    return CostReport(
        cfg=cfg,
        h=h,
        w=w,
        full_encoder=full_encoder,
        per_node=per_node,
        cumulative_per_exit=cumulative,
        decoder_only_per_exit=decoder_only,
    )
