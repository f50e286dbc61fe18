"""Grouping character candidates into text lines via min-cost network flow.

Each candidate above the confidence floor becomes an in/out node pair whose
connecting edge carries a negative "data" cost for confident candidates, so
selecting them is profitable. Left-to-right transition edges link
geometrically compatible neighbors. Unit flows pushed while the total cost
strictly decreases each trace out one text line; candidates on no selected
path are discarded as false positives.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .data import CharCandidate
from .errors import ValidationError
from .geometry import BBox, union_box
from .mincostflow import MinCostFlow


@dataclass(frozen=True)
class FlowGraphConfig:
    entry_cost: float = 1.0
    exit_cost: float = 1.0
    data_cost_scale: float = 2.0
    w_dist: float = 1.0
    w_scale: float = 1.0
    w_vert: float = 1.0
    max_pair_gap: float = 2.0   # multiple of the smaller character height
    conf_floor: float = 0.05

    def __post_init__(self):
        for name in ("entry_cost", "exit_cost", "data_cost_scale",
                     "w_dist", "w_scale", "w_vert"):
            if not math.isfinite(getattr(self, name)):
                raise ValidationError(f"flow cost {name} must be finite")
        if not 0.0 < self.conf_floor < 1.0:
            raise ValidationError(f"conf_floor {self.conf_floor} outside (0, 1)")
        if self.max_pair_gap <= 0:
            raise ValidationError(f"max_pair_gap {self.max_pair_gap} must be positive")


@dataclass(frozen=True)
class TextLine:
    """One extracted line: tight union box over its member candidates."""

    box: BBox
    members: tuple[int, ...]   # indices into the candidate list passed in
    line_score: float

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(self.members))
        if not self.members:
            raise ValidationError("text line needs at least one member")


def data_cost(score: float, config: FlowGraphConfig) -> float:
    return config.data_cost_scale * (config.conf_floor - score)


def transition_allowed(a: CharCandidate, b: CharCandidate,
                       config: FlowGraphConfig) -> bool:
    """May candidate b follow candidate a in a line (left to right)?"""
    ha, hb = a.box.height, b.box.height
    if b.box.center[0] <= a.box.center[0]:
        return False
    if max(ha, hb) / min(ha, hb) > 2.0:
        return False
    if b.box.x_min - a.box.x_max > config.max_pair_gap * min(ha, hb):
        return False
    if abs(b.box.center[1] - a.box.center[1]) > 0.5 * min(ha, hb):
        return False
    return True


def transition_cost(a: CharCandidate, b: CharCandidate,
                    config: FlowGraphConfig) -> float:
    ha, hb = a.box.height, b.box.height
    h_min = min(ha, hb)
    gap_norm = max(0.0, b.box.x_min - a.box.x_max) / h_min
    vert_norm = abs(b.box.center[1] - a.box.center[1]) / h_min
    return (config.w_dist * gap_norm
            + config.w_scale * abs(math.log(ha / hb))
            + config.w_vert * vert_norm)


@dataclass
class LineFlowGraph:
    """A built network plus the bookkeeping to read chains back out."""

    solver: MinCostFlow
    source: int
    sink: int
    indices: list[int]                       # candidate index per node pair
    entry_edges: list[int]                   # edge id per candidate
    data_edges: list[int]
    transitions: list[tuple[int, int, int]]  # (cand i, cand j, edge id)


def build_flow_graph(candidates: Sequence[CharCandidate],
                     config: FlowGraphConfig) -> LineFlowGraph:
    """Network over candidates already filtered to score > conf_floor.

    Node layout: source 0, sink 1, then an (in, out) pair per candidate in
    input order, so "lowest node index" follows candidate order.
    """
    n = len(candidates)
    solver = MinCostFlow(2 + 2 * n)
    source, sink = 0, 1
    indices = list(range(n))
    entry_edges = []
    data_edges = []
    exit_edges = []
    for i, cand in enumerate(candidates):
        node_in, node_out = 2 + 2 * i, 3 + 2 * i
        entry_edges.append(solver.add_edge(source, node_in, 1, config.entry_cost))
        data_edges.append(solver.add_edge(node_in, node_out, 1, data_cost(cand.score, config)))
        exit_edges.append(solver.add_edge(node_out, sink, 1, config.exit_cost))
    transitions = []
    for i, a in enumerate(candidates):
        for j, b in enumerate(candidates):
            if i != j and transition_allowed(a, b, config):
                eid = solver.add_edge(3 + 2 * i, 2 + 2 * j, 1,
                                      transition_cost(a, b, config))
                transitions.append((i, j, eid))
    return LineFlowGraph(solver, source, sink, indices, entry_edges,
                         data_edges, transitions)


def _chains(graph: LineFlowGraph) -> list[list[int]]:
    successor = {}
    for i, j, eid in graph.transitions:
        if graph.solver.flow_on(eid) > 0:
            successor[i] = j
    chains = []
    for i, eid in enumerate(graph.entry_edges):
        if graph.solver.flow_on(eid) > 0:
            chain = [i]
            while chain[-1] in successor:
                chain.append(successor[chain[-1]])
            chains.append(chain)
    return chains


def extract_lines_with_cost(candidates: Sequence[CharCandidate],
                            config: FlowGraphConfig | None = None
                            ) -> tuple[list[TextLine], float]:
    """Partition candidates into text lines; unselected ones are dropped.

    Also returns the flow objective actually achieved (0.0 when no line is
    profitable).
    """
    if config is None:
        config = FlowGraphConfig()
    kept = [i for i, c in enumerate(candidates) if c.score > config.conf_floor]
    if not kept:
        return [], 0.0
    graph = build_flow_graph([candidates[i] for i in kept], config)
    _, total_cost = graph.solver.run(graph.source, graph.sink)
    lines = []
    for chain in _chains(graph):
        members = sorted((kept[i] for i in chain),
                         key=lambda k: (candidates[k].box.x_min, k))
        boxes = [candidates[k].box for k in members]
        score = sum(candidates[k].score for k in members) / len(members)
        lines.append(TextLine(union_box(boxes), tuple(members), score))
    lines.sort(key=lambda ln: min(ln.members))
    return lines, total_cost


def extract_lines(candidates: Sequence[CharCandidate],
                  config: FlowGraphConfig | None = None) -> list[TextLine]:
    return extract_lines_with_cost(candidates, config)[0]


def chain_cost(candidates: Sequence[CharCandidate], chain: Sequence[int],
               config: FlowGraphConfig) -> float:
    """Cost of one candidate sequence taken in the given order."""
    total = config.entry_cost + config.exit_cost
    for k in chain:
        total += data_cost(candidates[k].score, config)
    for a, b in zip(chain, chain[1:]):
        total += transition_cost(candidates[a], candidates[b], config)
    return total


LINES_FORMAT_VERSION = 1


def save_lines(lines_by_image, path):
    """Persist per-image text lines as line-delimited JSON."""
    import json
    from pathlib import Path

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format_version": LINES_FORMAT_VERSION}) + "\n")
        for image_id, lines in lines_by_image.items():
            row = {
                "image_id": image_id,
                "lines": [
                    {
                        "box": list(ln.box.to_tuple()),
                        "member_indices": list(ln.members),
                        "line_score": ln.line_score,
                    }
                    for ln in lines
                ],
            }
            fh.write(json.dumps(row, sort_keys=True) + "\n")
    return path


def load_lines(path):
    import json
    from pathlib import Path

    from .errors import FormatError, VersionError

    path = Path(path)
    out = {}
    with path.open("r", encoding="utf-8") as fh:
        try:
            header = json.loads(fh.readline())
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: bad header: {exc}", line_no=1) from exc
        if header.get("format_version") != LINES_FORMAT_VERSION:
            raise VersionError(
                f"{path}: lines format_version {header.get('format_version')!r}, "
                f"expected {LINES_FORMAT_VERSION}"
            )
        for line_no, raw in enumerate(fh, start=2):
            if not raw.strip():
                continue
            try:
                row = json.loads(raw)
                out[row["image_id"]] = [
                    TextLine(BBox(*ln["box"]), tuple(ln["member_indices"]),
                             float(ln["line_score"]))
                    for ln in row["lines"]
                ]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise FormatError(f"{path}: bad record: {exc}", line_no=line_no) from exc
    return out
