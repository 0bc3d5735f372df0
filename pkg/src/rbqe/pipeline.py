"""Early-exit enhancement controller.

Runs an ordered list of candidate-producing stages, scores each candidate
with the no-reference quality module, and stops at the first score that
clears the threshold. The last stage is never assessed: if every earlier
candidate is rejected, the final candidate is returned as-is.
"""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter

from . import iqam
from .flopsmodel import ArchConfig, exit_cost
from .imagecore import FormatError, Plane, load_plane

STAGE_KINDS = ("identity", "gaussian", "deblock", "external")


class PipelineConfigError(Exception):
    """Bad stage list, unresolvable cost, or missing external file."""


class StageError(Exception):
    """A stage produced or received an unusable plane."""


@dataclass(frozen=True)
class ExitCostRef:
    """Declared cost taken from the analytical model for one exit index."""

    exit_index: int
    arch: ArchConfig | None = None


@dataclass(frozen=True)
class StageSpec:
    """One enhancement stage.

    ``identity`` and the classical filters refine the previous candidate;
    ``external`` stages are independent candidates loaded from
    ``dir/exit_<n>.pgm`` where n is ``exit_file_index`` (default: list
    position + 1, matching exit files numbered from 2).
    """

    kind: str
    label: str = ""
    sigma: float = 1.0
    strength: float = 1.0
    block_size: int = 8
    dir: str | None = None
    exit_file_index: int | None = None
    declared_cost: float | ExitCostRef = 0.0

    def __post_init__(self):
        if self.kind not in STAGE_KINDS:
            raise PipelineConfigError(f"unknown stage kind {self.kind!r}")
        if self.kind == "external" and not self.dir:
            raise PipelineConfigError("external stage needs a directory")
        if self.kind == "deblock" and not 0.0 <= self.strength <= 1.0:
            raise PipelineConfigError(f"deblock strength must be in [0,1], got {self.strength}")
        if self.kind == "gaussian" and self.sigma <= 0:
            raise PipelineConfigError(f"gaussian sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class ExitRecord:
    exit_index: int
    score: float | None  # None == not assessed
    decision: str  # "exit" | "continue"
    cumulative_macs: float


@dataclass(frozen=True)
class ExitTrace:
    per_exit: list[ExitRecord] = field(default_factory=list)
    chosen_exit: int = 0
    accumulated_cost: float = 0.0
    wall_time: float = 0.0


# ---------------------------------------------------------------------------
# stages


def _deblock(a: np.ndarray, strength: float, block: int) -> np.ndarray:
    """3-tap smoothing of the two sample lines beside every interior
    multiple-of-``block`` boundary, then blended by ``strength``."""
    h, w = a.shape

    def smooth_cols(src: np.ndarray) -> np.ndarray:
        out = src.copy()
        for seam in range(block, w, block):
            for col in (seam - 1, seam):
                left = src[:, max(col - 1, 0)]
                right = src[:, min(col + 1, w - 1)]
                out[:, col] = (left + src[:, col] + right) / 3.0
        return out

    smoothed = smooth_cols(a)
    smoothed = smooth_cols(smoothed.T).T  # horizontal seams, same 1-D filter
    return (1.0 - strength) * a + strength * smoothed


def stage_apply(
    spec: StageSpec, original: Plane, previous: Plane, position: int | None = None
) -> Plane:
    """Produce this stage's candidate; filters refine ``previous``, external
    stages load an independent candidate for ``original``."""
    if original.samples.shape != previous.samples.shape:
        raise StageError(
            f"candidate shape {previous.samples.shape} does not match "
            f"input {original.samples.shape}"
        )
    if spec.kind == "identity":
        return previous
    if spec.kind == "gaussian":
        return Plane(gaussian_filter(previous.samples, spec.sigma, mode="nearest"))
    if spec.kind == "deblock":
        if spec.strength == 0.0:
            return previous
        return Plane(_deblock(previous.samples, spec.strength, spec.block_size))
    # external
    index = spec.exit_file_index
    if index is None:
        if position is None:
            raise PipelineConfigError("external stage needs a position or exit_file_index")
        index = position + 1
    path = Path(spec.dir) / f"exit_{index}.pgm"
    if not path.exists():
        raise PipelineConfigError(f"exit {index}: missing external file {path}")
    try:
        candidate = load_plane(path)
    except FormatError as exc:
        raise PipelineConfigError(f"exit {index}: {exc}") from exc
    if candidate.samples.shape != original.samples.shape:
        raise StageError(
            f"exit {index}: external candidate is {candidate.width}x{candidate.height}, "
            f"input is {original.width}x{original.height}"
        )
    return candidate


def _resolve_cost(cost: float | ExitCostRef, plane: Plane) -> float:
    if isinstance(cost, ExitCostRef):
        cfg = cost.arch or ArchConfig()
        try:
            return float(exit_cost(cfg, cost.exit_index, plane.height, plane.width))
        except ValueError as exc:
            raise PipelineConfigError(f"cannot cost exit {cost.exit_index}: {exc}") from exc
    return float(cost)


# ---------------------------------------------------------------------------
# controller


def run(
    input_plane: Plane,
    stages: Sequence[StageSpec],
    params: iqam.IqamParams,
    assessor: Callable[[Plane], float] | None = None,
) -> tuple[Plane, ExitTrace]:
    """Run the early-exit loop and return (chosen candidate, trace).

    ``assessor`` maps a candidate plane to a quality score; the default is
    the composite Q of ``iqam.assess``. Accumulated cost covers executed
    stages only.
    """
    if not stages:
        raise PipelineConfigError("pipeline needs at least one stage")
    if assessor is None:
        assessor = lambda plane: iqam.assess(plane, params).q  # noqa: E731

    t0 = time.perf_counter()
    records: list[ExitRecord] = []
    cumulative = 0.0
    previous = input_plane
    chosen = len(stages)
    output = None
    for position, spec in enumerate(stages, start=1):
        candidate = stage_apply(spec, input_plane, previous, position=position)
        cumulative += _resolve_cost(spec.declared_cost, input_plane)
        if position < len(stages):
            score = float(assessor(candidate))
            decision = iqam.decide_exit(score, params.t_q)
            records.append(
                ExitRecord(position, score, decision.value, cumulative)
            )
            if decision is iqam.ExitDecision.EXIT:
                chosen = position
                output = candidate
                break
            previous = candidate
        else:
            records.append(ExitRecord(position, None, "exit", cumulative))
            output = candidate
    trace = ExitTrace(
        per_exit=records,
        chosen_exit=chosen,
        accumulated_cost=cumulative,
        wall_time=time.perf_counter() - t0,
    )
    return output, trace


# ---------------------------------------------------------------------------
# config and trace serialization


def stages_from_json(text: str) -> list[StageSpec]:
    """Parse an ordered stage list from a JSON pipeline config."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PipelineConfigError(f"bad pipeline JSON: {exc}") from exc
    if isinstance(doc, dict):
        items = doc.get("stages")
    else:
        items = doc
    if not isinstance(items, list) or not items:
        raise PipelineConfigError("pipeline config must contain a non-empty 'stages' list")
    stages = []
    for i, item in enumerate(items, start=1):
        if not isinstance(item, dict) or "kind" not in item:
            raise PipelineConfigError(f"stage {i}: expected an object with a 'kind'")
        item = dict(item)
        cost = item.pop("cost", 0.0)
        if isinstance(cost, dict):
            arch = ArchConfig(**cost["arch"]) if cost.get("arch") else None
            cost = ExitCostRef(exit_index=int(cost["exit"]), arch=arch)
        try:
            stages.append(StageSpec(declared_cost=cost, **item))
        except TypeError as exc:
            raise PipelineConfigError(f"stage {i}: {exc}") from exc
    return stages


def stages_to_json(stages: Sequence[StageSpec]) -> str:
    items = []
    for spec in stages:
        item: dict = {"kind": spec.kind}
        if spec.label:
            item["label"] = spec.label
        if spec.kind == "gaussian":
            item["sigma"] = spec.sigma
        if spec.kind == "deblock":
            item["strength"] = spec.strength
            item["block_size"] = spec.block_size
        if spec.kind == "external":
            item["dir"] = spec.dir
            if spec.exit_file_index is not None:
                item["exit_file_index"] = spec.exit_file_index
        if isinstance(spec.declared_cost, ExitCostRef):
            item["cost"] = {
                "exit": spec.declared_cost.exit_index,
                "arch": json.loads(spec.declared_cost.arch.to_json())
                if spec.declared_cost.arch
                else None,
            }
        elif spec.declared_cost:
            item["cost"] = spec.declared_cost
        items.append(item)
    return json.dumps({"schema_version": "1", "stages": items}, indent=2)


def trace_to_json(trace: ExitTrace) -> str:
    return json.dumps(
        {
            "schema_version": "1",
            "chosen_exit": trace.chosen_exit,
            "accumulated_cost": trace.accumulated_cost,
            "wall_time": trace.wall_time,
            "per_exit": [
                {
                    "exit": r.exit_index,
                    "score": r.score,
                    "decision": r.decision,
                    "cumulative_macs": r.cumulative_macs,
                }
                for r in trace.per_exit
            ],
        },
        indent=2,
    )


def trace_to_csv(trace: ExitTrace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["schema_version", "exit", "score", "decision", "cumulative_macs"])
    for r in trace.per_exit:
        score = "not assessed" if r.score is None else repr(r.score)
        writer.writerow(["1", r.exit_index, score, r.decision, r.cumulative_macs])
    return buf.getvalue()
