"""Disconnectivity trees: single-linkage merging of basins by barrier height.

Leaves are basin representatives at their energies; each internal node
sits at the lowest barrier joining its two child groups.  Rendering emits
deterministic DOT and standalone SVG text with the vertical coordinate
proportional to energy and leaf circles sized by membership (area
proportional to count, so radius scales with its square root).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import RejectedInput


@dataclass
class DGNode:
    energy: float
    children: list = field(default_factory=list)
    basin_id: int | None = None  # set on leaves
    count: int = 1

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def min_basin_id(self) -> int:
        if self.is_leaf:
            return self.basin_id
        return min(c.min_basin_id() for c in self.children)


@dataclass
class DGTree:
    root: DGNode
    leaves: list

    @property
    def n_leaves(self) -> int:
        return len(self.leaves)

    def merge_energy(self, basin_i: int, basin_j: int) -> float:
        """Energy of the lowest common ancestor of two leaves."""

        def contains(node, basin):
            if node.is_leaf:
                return node.basin_id == basin
            return any(contains(c, basin) for c in node.children)

        node = self.root
        while not node.is_leaf:
            nxt = None
            for child in node.children:
                if contains(child, basin_i) and contains(child, basin_j):
                    nxt = child
                    break
            if nxt is None:
                return node.energy
            node = nxt
        raise RejectedInput(f"basins {basin_i}, {basin_j} not distinct leaves")

    def to_json(self) -> str:
        def encode(node):
            out = {"energy": None if math.isinf(node.energy) else node.energy,
                   "count": node.count}
            if node.is_leaf:
                out["basin_id"] = node.basin_id
            else:
                out["children"] = [encode(c) for c in node.children]
            return out

        return json.dumps(encode(self.root), sort_keys=True, indent=2)


def build_dg(matrix, counts=None, basin_ids=None) -> DGTree:
    """Single-linkage agglomeration of a barrier matrix into a merge tree.

    Missing entries act as infinite barriers; whatever remains unmerged is
    joined under a virtual root at infinity.  Ties pick the pair whose
    smallest member basin id is lowest.
    """
    values = np.asarray(matrix.values, dtype=float)
    k = values.shape[0]
    if k < 1:
        raise RejectedInput("need at least one representative")
    counts = [1] * k if counts is None else list(counts)
    basin_ids = list(range(1, k + 1)) if basin_ids is None else list(basin_ids)
    leaves = [DGNode(energy=float(values[i, i]), basin_id=basin_ids[i],
                     count=counts[i]) for i in range(k)]
    clusters = {i: [i] for i in range(k)}
    nodes = {i: leaves[i] for i in range(k)}

    def link(ci, cj):
        best = math.inf
        for i in clusters[ci]:
            for j in clusters[cj]:
                v = values[i, j]
                if not np.isnan(v) and v < best:
                    best = v
        return best

    while len(clusters) > 1:
        best = None
        ids = sorted(clusters)
        for ai, ci in enumerate(ids):
            for cj in ids[ai + 1:]:
                barrier = link(ci, cj)
                lo = min(nodes[ci].min_basin_id(), nodes[cj].min_basin_id())
                hi = max(nodes[ci].min_basin_id(), nodes[cj].min_basin_id())
                key = (barrier, lo, hi)
                if best is None or key < best[0]:
                    best = (key, ci, cj)
        (barrier, _, _), ci, cj = best
        child_top = max(nodes[ci].energy, nodes[cj].energy)
        merged = DGNode(energy=max(barrier, child_top),
                        children=[nodes[ci], nodes[cj]],
                        count=nodes[ci].count + nodes[cj].count)
        clusters[ci] = clusters[ci] + clusters[cj]
        nodes[ci] = merged
        del clusters[cj]
        del nodes[cj]
    return DGTree(root=nodes[sorted(nodes)[0]], leaves=leaves)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------


def _layout(tree: DGTree):
    """Leaf x slots in recursive barrier-ascending order, internal x = child mean."""
    positions = {}
    next_slot = [0]

    def place(node):
        if node.is_leaf:
            positions[id(node)] = float(next_slot[0])
            next_slot[0] += 1
            return positions[id(node)]
        ordered = sorted(node.children, key=lambda c: (c.energy, c.min_basin_id()))
        xs = [place(c) for c in ordered]
        positions[id(node)] = sum(xs) / len(xs)
        return positions[id(node)]

    place(tree.root)
    return positions


def _finite_energies(tree: DGTree):
    vals = []

    def walk(node):
        if not math.isinf(node.energy):
            vals.append(node.energy)
        for c in node.children:
            walk(c)

    walk(tree.root)
    return vals


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def render_dot(tree: DGTree, membership_sizing: bool = True, labels=None) -> str:
    """DOT text with pinned positions: y proportional to energy."""
    labels = labels or {}
    finite = _finite_energies(tree)
    e_lo, e_hi = min(finite), max(finite)
    span = (e_hi - e_lo) or 1.0
    pad = 0.1 * span
    positions = _layout(tree)
    max_count = max((leaf.count for leaf in tree.leaves), default=1)

    def ypos(e):
        if math.isinf(e):
            e = e_hi + pad
        return (e - e_lo) / span * 6.0

    lines = ["graph disconnectivity {", "  graph [splines=line];",
             "  node [fixedsize=true];"]
    counter = [0]
    names = {}

    def declare(node):
        names[id(node)] = f"n{counter[0]}"
        counter[0] += 1
        x = positions[id(node)]
        y = ypos(node.energy)
        if node.is_leaf:
            radius = 0.25 * math.sqrt(node.count / max_count) if membership_sizing else 0.15
            label = labels.get(node.basin_id, str(node.basin_id))
            lines.append(
                f'  {names[id(node)]} [shape=circle, width={_fmt(2 * radius)}, '
                f'label="{label}", pos="{_fmt(x)},{_fmt(y)}!"];'
            )
        else:
            text = "inf" if math.isinf(node.energy) else _fmt(node.energy)
            lines.append(
                f'  {names[id(node)]} [shape=point, width=0.05, '
                f'xlabel="{text}", pos="{_fmt(x)},{_fmt(y)}!"];'
            )
        for child in sorted(node.children, key=lambda c: (c.energy, c.min_basin_id())):
            declare(child)
            lines.append(f"  {names[id(node)]} -- {names[id(child)]};")

    declare(tree.root)
    lines.append("}")
    return "\n".join(lines) + "\n"


def render_svg(tree: DGTree, membership_sizing: bool = True, labels=None,
               width: int = 640, height: int = 480) -> str:
    """Standalone SVG with an energy axis; higher energies sit higher up."""
    labels = labels or {}
    finite = _finite_energies(tree)
    e_lo, e_hi = min(finite), max(finite)
    span = (e_hi - e_lo) or 1.0
    pad = 0.12 * span
    top_energy = e_hi + pad
    positions = _layout(tree)
    n_slots = max(len(tree.leaves), 1)
    max_count = max((leaf.count for leaf in tree.leaves), default=1)
    margin_l, margin_r, margin_t, margin_b = 70, 20, 20, 40

    def xpix(x):
        usable = width - margin_l - margin_r
        return margin_l + (x + 0.5) / n_slots * usable

    def ypix(e):
        if math.isinf(e):
            e = top_energy
        usable = height - margin_t - margin_b
        return margin_t + (top_energy - e) / (top_energy - (e_lo - pad)) * usable

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
    ]
    # energy axis with 5 ticks
    axis_x = margin_l - 12
    parts.append(f'<line x1="{axis_x}" y1="{_fmt(ypix(top_energy))}" x2="{axis_x}" '
                 f'y2="{_fmt(ypix(e_lo - pad))}" stroke="black"/>')
    for t in range(5):
        e = e_lo + (e_hi - e_lo) * t / 4.0
        y = ypix(e)
        parts.append(f'<line x1="{axis_x - 4}" y1="{_fmt(y)}" x2="{axis_x}" '
                     f'y2="{_fmt(y)}" stroke="black"/>')
        parts.append(f'<text x="{axis_x - 8}" y="{_fmt(y + 3)}" font-size="10" '
                     f'text-anchor="end">{e:.3g}</text>')

    def draw(node):
        x = xpix(positions[id(node)])
        y = ypix(node.energy)
        for child in sorted(node.children, key=lambda c: (c.energy, c.min_basin_id())):
            cx = xpix(positions[id(child)])
            cy = ypix(child.energy)
            dashed = ' stroke-dasharray="4 3"' if math.isinf(node.energy) else ""
            parts.append(f'<line x1="{_fmt(x)}" y1="{_fmt(y)}" x2="{_fmt(cx)}" '
                         f'y2="{_fmt(y)}" stroke="black"{dashed}/>')
            parts.append(f'<line x1="{_fmt(cx)}" y1="{_fmt(y)}" x2="{_fmt(cx)}" '
                         f'y2="{_fmt(cy)}" stroke="black"{dashed}/>')
            draw(child)
        if node.is_leaf:
            r = 3.0 + 9.0 * math.sqrt(node.count / max_count) if membership_sizing else 4.0
            parts.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(r)}" '
                         f'fill="none" stroke="steelblue"/>')
            label = labels.get(node.basin_id, str(node.basin_id))
            parts.append(f'<text x="{_fmt(x)}" y="{height - margin_b + 14}" '
                         f'font-size="10" text-anchor="middle">{label}</text>')

    draw(tree.root)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_dg(tree: DGTree, membership_sizing: bool = True, labels=None):
    """Emit (dot_text, svg_text); byte-deterministic for fixed input."""
    return (render_dot(tree, membership_sizing, labels),
            render_svg(tree, membership_sizing, labels))
