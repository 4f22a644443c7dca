"""Per-attribute generalization trees.

A hierarchy maps raw numeric readings upward through progressively coarser
interval levels.  Level 0 holds raw values, level 1 a row of half-open
intervals, intermediate levels merge those intervals, and the top level is
the single catch-all label ``ANY``.  Hierarchies are immutable once built
and safe to share across workers.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBinsError, HierarchyParseError, OutOfRangeError

ANY_LABEL = "ANY"


@dataclass(frozen=True)
class AttributeSchema:
    """Identity, position, expert relevance weight and tree height of one attribute."""

    name: str
    index: int
    weight: float = 1.0
    max_level: int = 0

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError(f"attribute {self.name!r}: weight must be >= 0")
        if self.max_level < 0:
            raise ValueError(f"attribute {self.name!r}: max_level must be >= 0")


@dataclass(frozen=True)
class LevelValue:
    """A value pinned to one attribute and one generalization level.

    ``label`` is the raw float at level 0 and a symbolic label above it.
    """

    attribute: int
    level: int
    label: object


class ConceptHierarchy:
    """Tree of interval levels for a single numeric attribute.

    ``levels[k]`` for k >= 1 is a list of ``(lo, hi, label)`` triples sorted by
    ``lo``; intervals are half-open except the last of each level, which is
    closed at ``hi``.  ``parent_idx[k]`` maps interval positions at level k to
    positions at level k + 1.
    """

    def __init__(self, schema, levels, parent_idx, clamp=True):
        if not levels or levels[0] is not None:
            raise ValueError("levels[0] must be None (raw level)")
        self.schema = schema
        self.levels = levels
        self.parent_idx = parent_idx
        self.clamp = clamp
        # Interval lower bounds per level, for bisect lookups.
        self._los = {k: [iv[0] for iv in levels[k]] for k in range(1, len(levels))}
        self._labels = {k: [iv[2] for iv in levels[k]] for k in range(1, len(levels))}
        self._label_pos = {
            k: {iv[2]: j for j, iv in enumerate(levels[k])} for k in range(1, len(levels))
        }

    @property
    def max_level(self):
        return len(self.levels) - 1

    def bin_index(self, value, level=1):
        """Interval position of a raw value at ``level``.

        Out-of-range values clamp into the boundary interval unless the
        hierarchy is in strict mode.
        """
        intervals = self.levels[level]
        j = bisect.bisect_right(self._los[level], value) - 1
        if j < 0:
            if not self.clamp:
                raise OutOfRangeError(
                    f"{self.schema.name}: value {value!r} below level-{level} range"
                )
            return 0
        if value > intervals[-1][1] and not self.clamp:
            raise OutOfRangeError(
                f"{self.schema.name}: value {value!r} above level-{level} range"
            )
        return min(j, len(intervals) - 1)

    def ascend_index(self, pos, level, target_level):
        """Walk an interval position upward from ``level`` to ``target_level``."""
        for k in range(level, target_level):
            pos = self.parent_idx[k][pos]
        return pos

    def raw_to_label(self, value, target_level):
        """Label of a raw value at ``target_level`` (>= 1)."""
        pos = self.bin_index(value)
        pos = self.ascend_index(pos, 1, target_level)
        return self._labels[target_level][pos]

    def raw_to_labels_many(self, values, target_level):
        """Vectorized :meth:`raw_to_label` over an array of raw values."""
        los = np.asarray(self._los[1])
        pos = np.searchsorted(los, values, side="right") - 1
        if not self.clamp:
            lo, hi = self.levels[1][0][0], self.levels[1][-1][1]
            bad = (np.asarray(values) < lo) | (np.asarray(values) > hi)
            if bad.any():
                raise OutOfRangeError(
                    f"{self.schema.name}: {int(bad.sum())} values outside level-1 range"
                )
        pos = np.clip(pos, 0, len(self.levels[1]) - 1)
        for k in range(1, target_level):
            pos = np.asarray(self.parent_idx[k])[pos]
        labels = self._labels[target_level]
        return [labels[p] for p in pos]

    def label_parent(self, label, level):
        """Label at ``level + 1`` covering ``label`` at ``level``."""
        pos = self._label_pos[level][label]
        return self._labels[level + 1][self.parent_idx[level][pos]]


def generalize_value(h: ConceptHierarchy, v: LevelValue, target_level: int) -> LevelValue:
    """Unique ancestor of ``v`` at ``target_level`` (concept-tree ascension)."""
    if not (v.level <= target_level <= h.max_level):
        raise ValueError(
            f"target level {target_level} outside [{v.level}, {h.max_level}]"
        )
    if target_level == v.level:
        return v
    if v.level == 0:
        label = h.raw_to_label(v.label, target_level)
    else:
        label = v.label
        for k in range(v.level, target_level):
            label = h.label_parent(label, k)
    return LevelValue(v.attribute, target_level, label)


def _pct_label(lo_bin, hi_bin, base_bins):
    def fmt(p):
        pct = 100.0 * p / base_bins
        return f"{pct:g}"

    return f"P{fmt(lo_bin)}-P{fmt(hi_bin)}"


def build_percentile_hierarchy(values, num_levels, base_bins, schema=None, clamp=True):
    """Build a hierarchy whose level 1 is ``base_bins`` empirical-quantile bins.

    The ladder is: raw values, then ``base_bins`` percentile intervals, then
    pairwise merges of adjacent intervals per level, topped by ``ANY``.
    ``num_levels`` counts all levels including raw and the top, so
    ``num_levels=4`` with ``base_bins=10`` gives raw / deciles / 5 bins / ANY.
    Quantiles use linear interpolation between order statistics.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DegenerateBinsError("no values supplied")
    if base_bins < 2:
        raise ValueError("base_bins must be >= 2")
    if num_levels < 3:
        raise ValueError("num_levels must be >= 3 (raw, bins, ANY)")
    n_merges = num_levels - 3
    if base_bins % (2 ** n_merges) != 0:
        raise ValueError(
            f"base_bins={base_bins} not divisible by 2^{n_merges}; "
            "levels cannot merge pairwise"
        )
    name = schema.name if schema is not None else "attr"
    if np.unique(values).size < base_bins:
        raise DegenerateBinsError(
            f"attribute {name!r}: fewer than {base_bins} distinct values"
        )
    qs = np.arange(1, base_bins) / base_bins
    bounds = np.quantile(values, qs)
    vmin, vmax = float(values.min()), float(values.max())
    edges = [vmin] + [float(b) for b in bounds] + [vmax]
    if len(set(edges)) != len(edges) or any(
        edges[i] >= edges[i + 1] for i in range(len(edges) - 1)
    ):
        raise DegenerateBinsError(
            f"attribute {name!r}: tied quantile boundaries, bins degenerate"
        )

    levels = [None]
    parent_idx = {}
    # Level 1: base bins.
    lvl = [
        (edges[j], edges[j + 1], _pct_label(j, j + 1, base_bins))
        for j in range(base_bins)
    ]
    levels.append(lvl)
    # Pairwise merge levels.
    spans = [(j, j + 1) for j in range(base_bins)]
    k = 1
    for _ in range(n_merges):
        parent_idx[k] = [j // 2 for j in range(len(levels[k]))]
        merged = []
        new_spans = []
        for j in range(0, len(levels[k]), 2):
            lo = levels[k][j][0]
            hi = levels[k][j + 1][1]
            lo_bin = spans[j][0]
            hi_bin = spans[j + 1][1]
            merged.append((lo, hi, _pct_label(lo_bin, hi_bin, base_bins)))
            new_spans.append((lo_bin, hi_bin))
        levels.append(merged)
        spans = new_spans
        k += 1
    # Top level: ANY.
    parent_idx[k] = [0] * len(levels[k])
    levels.append([(vmin, vmax, ANY_LABEL)])

    max_level = len(levels) - 1
    if schema is None:
        schema = AttributeSchema(name=name, index=0, weight=1.0, max_level=max_level)
    else:
        schema = AttributeSchema(
            name=schema.name, index=schema.index, weight=schema.weight, max_level=max_level
        )
    return ConceptHierarchy(schema, levels, parent_idx, clamp=clamp)


# ---------------------------------------------------------------------------
# Declarative config format
#
#   attribute <name> index <i> weight <w>
#   level <k>
#   interval <lo> <hi> <label>
#   parent <child_label> <parent_label>     (child at level k, parent at k+1)
#
# Blank lines and '#' comments are ignored.  Levels must appear in ascending
# order starting at 1; parent lines may be omitted, in which case parenthood
# is derived from interval containment.
# ---------------------------------------------------------------------------


def parse_hierarchy_config(text, clamp=True):
    """Parse the declarative hierarchy document into schema/hierarchy pairs."""
    blocks = []
    current = None

    def close_block():
        if current is not None:
            blocks.append(current)

    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kw = parts[0]
        if kw == "attribute":
            close_block()
            if len(parts) != 6 or parts[2] != "index" or parts[4] != "weight":
                raise HierarchyParseError(
                    "expected 'attribute <name> index <i> weight <w>'", line_no
                )
            try:
                idx = int(parts[3])
                weight = float(parts[5])
            except ValueError:
                raise HierarchyParseError("bad index or weight", line_no) from None
            if weight < 0:
                raise HierarchyParseError("negative weight", line_no)
            current = {
                "name": parts[1],
                "index": idx,
                "weight": weight,
                "levels": {},
                "parents": {},
                "cur_level": None,
                "line": line_no,
            }
        elif current is None:
            raise HierarchyParseError(f"{kw!r} before any attribute block", line_no)
        elif kw == "level":
            if len(parts) != 2:
                raise HierarchyParseError("expected 'level <k>'", line_no)
            try:
                k = int(parts[1])
            except ValueError:
                raise HierarchyParseError("bad level number", line_no) from None
            if k < 1:
                raise HierarchyParseError("level must be >= 1", line_no)
            if current["levels"] and k != max(current["levels"]) + 1:
                raise HierarchyParseError("levels must ascend by 1", line_no)
            if not current["levels"] and k != 1:
                raise HierarchyParseError("first level must be 1", line_no)
            current["levels"][k] = []
            current["cur_level"] = k
        elif kw == "interval":
            if current["cur_level"] is None:
                raise HierarchyParseError("interval before any level", line_no)
            if len(parts) != 4:
                raise HierarchyParseError("expected 'interval <lo> <hi> <label>'", line_no)
            try:
                lo, hi = float(parts[1]), float(parts[2])
            except ValueError:
                raise HierarchyParseError("bad interval bounds", line_no) from None
            if lo >= hi:
                raise HierarchyParseError("interval lo must be < hi", line_no)
            current["levels"][current["cur_level"]].append((lo, hi, parts[3], line_no))
        elif kw == "parent":
            if current["cur_level"] is None:
                raise HierarchyParseError("parent before any level", line_no)
            if len(parts) != 3:
                raise HierarchyParseError("expected 'parent <child> <parent>'", line_no)
            key = (current["cur_level"], parts[1])
            if key in current["parents"]:
                raise HierarchyParseError(f"duplicate parent for {parts[1]!r}", line_no)
            current["parents"][key] = (parts[2], line_no)
        else:
            raise HierarchyParseError(f"unknown keyword {kw!r}", line_no)
    close_block()

    return [_finish_block(b, clamp) for b in blocks]


def _finish_block(block, clamp):
    name = block["name"]
    if not block["levels"]:
        raise HierarchyParseError(f"attribute {name!r} has no levels", block["line"])
    max_level = max(block["levels"])
    levels = [None]
    for k in range(1, max_level + 1):
        ivs = sorted(block["levels"][k], key=lambda iv: iv[0])
        if not ivs:
            raise HierarchyParseError(f"attribute {name!r}: level {k} empty", block["line"])
        for a, b in zip(ivs, ivs[1:]):
            if b[0] < a[1]:
                raise HierarchyParseError(
                    f"attribute {name!r}: interval [{b[0]}, {b[1]}) overlaps previous",
                    b[3],
                )
            if b[0] > a[1]:
                raise HierarchyParseError(
                    f"attribute {name!r}: gap before interval [{b[0]}, {b[1]})", b[3]
                )
        labels = [iv[2] for iv in ivs]
        if len(set(labels)) != len(labels):
            raise HierarchyParseError(
                f"attribute {name!r}: duplicate labels at level {k}", block["line"]
            )
        levels.append([(iv[0], iv[1], iv[2]) for iv in ivs])

    parent_idx = {}
    for k in range(1, max_level):
        children = levels[k]
        parents = levels[k + 1]
        pos_of = {iv[2]: j for j, iv in enumerate(parents)}
        idx = []
        for lo, hi, label in children:
            declared = block["parents"].get((k, label))
            if declared is not None:
                plabel, line_no = declared
                if plabel not in pos_of:
                    raise HierarchyParseError(
                        f"attribute {name!r}: unknown parent label {plabel!r}", line_no
                    )
                j = pos_of[plabel]
                plo, phi, _ = parents[j]
                mid = (lo + hi) / 2.0
                if not (plo <= mid <= phi):
                    raise HierarchyParseError(
                        f"attribute {name!r}: {label!r} not contained in parent {plabel!r}",
                        line_no,
                    )
            else:
                mid = (lo + hi) / 2.0
                j = next(
                    (jj for jj, (plo, phi, _) in enumerate(parents) if plo <= mid <= phi),
                    None,
                )
                if j is None:
                    raise HierarchyParseError(
                        f"attribute {name!r}: no parent covers {label!r} at level {k}",
                        block["line"],
                    )
            idx.append(j)
        parent_idx[k] = idx

    # Every declared parent key must refer to an existing child label.
    for (k, child), (_, line_no) in block["parents"].items():
        if k >= max_level:
            raise HierarchyParseError(
                f"attribute {name!r}: parent declared at top level", line_no
            )
        if child not in {iv[2] for iv in levels[k]}:
            raise HierarchyParseError(
                f"attribute {name!r}: unknown child label {child!r}", line_no
            )

    schema = AttributeSchema(
        name=name, index=block["index"], weight=block["weight"], max_level=max_level
    )
    return schema, ConceptHierarchy(schema, levels, parent_idx, clamp=clamp)


def serialize_hierarchy_config(pairs):
    """Inverse of :func:`parse_hierarchy_config`; re-parsing yields equal trees."""
    out = []
    for schema, h in pairs:
        out.append(f"attribute {schema.name} index {schema.index} weight {schema.weight!r}")
        for k in range(1, h.max_level + 1):
            out.append(f"level {k}")
            for lo, hi, label in h.levels[k]:
                out.append(f"interval {lo!r} {hi!r} {label}")
            if k < h.max_level:
                for j, (_, _, label) in enumerate(h.levels[k]):
                    parent = h.levels[k + 1][h.parent_idx[k][j]][2]
                    out.append(f"parent {label} {parent}")
        out.append("")
    return "\n".join(out)
