"""Attribute Oriented Induction over a relation of sensor tuples.

The induction loop repeatedly generalizes the most heterogeneous attribute,
merges tuples that become identical (summing their votes), and extracts any
tuple whose votes reach the minimum cluster size as a weighted cluster.  An
outer loop re-runs the process on unclustered residuals with a decreasing
minimum cluster size, down to 2.

Relation weights follow two bookkeeping rules:

* a generalized relation's level weight is ``sum(2**-level_j) / num_attr``
  over its non-removed attributes;
* a cluster extracted from relation i gets
  ``level_weight(i) + (instances / outliers(i)) * diffw(i)`` where
  ``outliers(i)`` is the vote mass present when the relation was formed and
  ``diffw(i)`` is the drop in level weight from the previous relation.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .errors import EmptyInputError, EmptyRelationError

REMOVED = None  # marker used in descriptors and signatures


@dataclass(frozen=True)
class AoiParams:
    min_cluster_size: int = 10
    attr_threshold: int = 20
    tuple_threshold: int = 200

    def __post_init__(self):
        if self.min_cluster_size < 2:
            raise ValueError("min_cluster_size must be >= 2")
        if self.attr_threshold < 1 or self.tuple_threshold < 1:
            raise ValueError("thresholds must be >= 1")


@dataclass
class Cluster:
    """One generalized tuple promoted to the knowledge base."""

    descriptor: tuple  # per-attribute level, or None when the attribute was removed
    signature: tuple  # raw float at level 0, label string above, None when removed
    instances: int
    level_weight: float
    weight: float
    outliers: int | None = None
    diffw: float | None = None
    rows: tuple = ()


@dataclass
class ResidualReport:
    """Rows never absorbed by any cluster, with the reason induction stopped."""

    rows: tuple
    reason: str


@dataclass
class KnowledgeBase:
    clusters: list
    params: AoiParams
    num_attributes: int
    residual: ResidualReport
    config_checksum: str = "-"

    def groups(self):
        """Cluster index grouped by relation descriptor, most specific first.

        Returns a list of ``(descriptor, level_weight, {signature: cluster_id})``
        ordered by descending level weight, ties broken by ascending descriptor.
        """
        by_desc = {}
        for cid, c in enumerate(self.clusters):
            by_desc.setdefault(c.descriptor, {})[c.signature] = cid
        def desc_key(desc):
            return tuple(10 ** 6 if lv is REMOVED else lv for lv in desc)
        out = []
        for desc, sigs in by_desc.items():
            lw = self.clusters[next(iter(sigs.values()))].level_weight
            out.append((desc, lw, sigs))
        out.sort(key=lambda g: (-g[1], desc_key(g[0])))
        return out


def generalized_level_weight(levels):
    """Level weight of a relation from its non-removed attribute levels."""
    levels = [lv for lv in levels if lv is not REMOVED]
    if not levels:
        raise EmptyRelationError("no non-removed attributes")
    if any(lv < 0 for lv in levels):
        raise ValueError("levels must be >= 0")
    return sum(2.0 ** -lv for lv in levels) / len(levels)


def cluster_weight(gen_lv_w, inst, outl, diffw):
    """Final cluster weight from its relation's bookkeeping values."""
    if outl == 0:
        raise ValueError("outliers must be positive")
    if not (1 <= inst <= outl):
        raise ValueError(f"instances {inst} outside [1, {outl}]")
    if diffw < 0:
        raise ValueError("diffw must be >= 0")
    return gen_lv_w + (inst / outl) * diffw


class _Relation:
    """Mutable working table of one induction pass."""

    __slots__ = ("tuples", "levels", "removed", "outliers", "lw", "prev_lw")

    def __init__(self, tuples, levels, removed, outliers, lw, prev_lw):
        self.tuples = tuples  # list of [signature, votes, rows]
        self.levels = levels
        self.removed = removed
        self.outliers = outliers
        self.lw = lw
        self.prev_lw = prev_lw

    @property
    def diffw(self):
        return max(0.0, self.prev_lw - self.lw)

    def descriptor(self):
        return tuple(
            REMOVED if self.removed[a] else self.levels[a] for a in range(len(self.levels))
        )

    def distinct_counts(self):
        counts = {}
        for a in range(len(self.levels)):
            if self.removed[a]:
                continue
            counts[a] = len({t[0][a] for t in self.tuples})
        return counts


def _merge_tuples(raw_tuples):
    """Merge identical signatures, summing votes and pooling row indexes."""
    merged = {}
    order = []
    for sig, votes, rows in raw_tuples:
        if sig in merged:
            entry = merged[sig]
            entry[1] += votes
            entry[2].extend(rows)
        else:
            entry = [sig, votes, list(rows)]
            merged[sig] = entry
            order.append(sig)
    out = []
    for sig in order:
        entry = merged[sig]
        entry[2].sort()
        entry[2] = tuple(entry[2])
        out.append(entry)
    return out


def initial_relation(rows, row_indices, num_attr):
    """Level-0 relation over the given rows; one vote per row."""
    tuples = _merge_tuples(
        [(tuple(rows[i]), 1, (i,)) for i in row_indices]
    )
    total = sum(t[1] for t in tuples)
    return _Relation(
        tuples=tuples,
        levels=[0] * num_attr,
        removed=[False] * num_attr,
        outliers=total,
        lw=1.0,
        prev_lw=1.0,
    )


def select_attribute_to_generalize(rel, hierarchies, attr_threshold=20):
    """Attribute with the most distinct values among generalizable candidates.

    A candidate either has a higher level to ascend to, or sits at its top
    level with more distinct values than the attribute threshold (removal).
    Ties break by highest schema weight, then lowest index.  Returns None when
    nothing can be generalized further (termination signal).
    """
    counts = rel.distinct_counts()
    if not counts:
        raise EmptyRelationError("no non-removed attributes")
    best = None
    for a, n in counts.items():
        if n < 2:
            continue
        h = hierarchies[a]
        at_top = rel.levels[a] >= h.max_level
        if at_top and n <= attr_threshold:
            continue
        key = (n, h.schema.weight, -a)
        if best is None or key > best[0]:
            best = (key, a)
    return None if best is None else best[1]


def ascend_concept_tree(rel, attr, hierarchies):
    """Replace every value of ``attr`` by its next-level ancestor, in place."""
    if rel.removed[attr]:
        raise ValueError(f"attribute {attr} is removed")
    h = hierarchies[attr]
    level = rel.levels[attr]
    if level >= h.max_level:
        raise ValueError(f"attribute {attr} already at max level {h.max_level}")
    cache = {}
    def lift(v):
        if v not in cache:
            if level == 0:
                cache[v] = h.raw_to_label(v, 1)
            else:
                cache[v] = h.label_parent(v, level)
        return cache[v]

    lifted = []
    for sig, votes, rows in rel.tuples:
        new_sig = sig[:attr] + (lift(sig[attr]),) + sig[attr + 1:]
        lifted.append((new_sig, votes, rows))
    tuples = _merge_tuples(lifted)
    total = sum(t[1] for t in tuples)
    rel.tuples = tuples
    rel.levels[attr] = level + 1
    rel.prev_lw = rel.lw
    rel.lw = generalized_level_weight(
        [rel.levels[a] for a in range(len(rel.levels)) if not rel.removed[a]]
    )
    rel.outliers = total
    return rel


def remove_attribute(rel, attr):
    """Drop an attribute that is fully generalized yet still too diverse."""
    if sum(1 for r in rel.removed if not r) <= 1:
        raise EmptyRelationError("cannot remove the last attribute")
    masked = []
    for sig, votes, rows in rel.tuples:
        new_sig = sig[:attr] + (REMOVED,) + sig[attr + 1:]
        masked.append((new_sig, votes, rows))
    tuples = _merge_tuples(masked)
    total = sum(t[1] for t in tuples)
    rel.tuples = tuples
    rel.removed[attr] = True
    rel.prev_lw = rel.lw
    rel.lw = generalized_level_weight(
        [rel.levels[a] for a in range(len(rel.levels)) if not rel.removed[a]]
    )
    rel.outliers = total
    return rel


def extract_clusters(rel, min_cluster_size):
    """Promote every tuple with enough votes to a cluster and drop it."""
    if min_cluster_size < 2:
        raise ValueError("min_cluster_size must be >= 2")
    desc = rel.descriptor()
    diffw = rel.diffw
    kept, clusters = [], []
    for sig, votes, rows in rel.tuples:
        if votes >= min_cluster_size:
            clusters.append(
                Cluster(
                    descriptor=desc,
                    signature=sig,
                    instances=votes,
                    level_weight=rel.lw,
                    weight=cluster_weight(rel.lw, votes, rel.outliers, diffw),
                    outliers=rel.outliers,
                    diffw=diffw,
                    rows=rows,
                )
            )
        else:
            kept.append([sig, votes, rows])
    rel.tuples = kept
    return clusters


def _merge_duplicate_clusters(clusters):
    """Collapse clusters re-created by later, smaller-m passes.

    The first occurrence (formed at the larger minimum cluster size) keeps its
    relation bookkeeping; instances are summed and the weight recomputed with
    the instance share capped at 1.
    """
    merged = {}
    order = []
    for c in clusters:
        key = (c.descriptor, c.signature)
        if key in merged:
            first = merged[key]
            inst = first.instances + c.instances
            share = min(1.0, inst / first.outliers)
            merged[key] = Cluster(
                descriptor=first.descriptor,
                signature=first.signature,
                instances=inst,
                level_weight=first.level_weight,
                weight=first.level_weight + share * first.diffw,
                outliers=first.outliers,
                diffw=first.diffw,
                rows=tuple(sorted(first.rows + c.rows)),
            )
        else:
            merged[key] = c
            order.append(key)
    return [merged[k] for k in order]


def run_aoi(rows, hierarchies, params, config_checksum="-"):
    """Full induction over raw level-0 rows, producing a knowledge base.

    ``rows`` is a sequence of equal-length numeric value lists, one per
    retained attribute.  Residual rows that never cluster (even at minimum
    cluster size 2) are reported, never dropped silently.
    """
    rows = [tuple(float(v) for v in r) for r in rows]
    if not rows:
        raise EmptyInputError("no input tuples")
    num_attr = len(rows[0])
    if any(len(r) != num_attr for r in rows):
        raise ValueError("ragged input tuples")
    if len(hierarchies) != num_attr:
        raise ValueError("one hierarchy per attribute required")

    clusters = []
    residual_idx = list(range(len(rows)))
    reason = "all rows clustered"
    for m in range(params.min_cluster_size, 1, -1):
        if not residual_idx:
            break
        rel = initial_relation(rows, residual_idx, num_attr)
        clusters.extend(extract_clusters(rel, m))
        while rel.tuples:
            attr = select_attribute_to_generalize(rel, hierarchies, params.attr_threshold)
            if attr is None:
                reason = "no attribute left to generalize"
                break
            if rel.levels[attr] < hierarchies[attr].max_level:
                ascend_concept_tree(rel, attr, hierarchies)
            else:
                remove_attribute(rel, attr)
            clusters.extend(extract_clusters(rel, m))
        residual_idx = sorted(i for t in rel.tuples for i in t[2])
    if residual_idx:
        reason = f"{len(residual_idx)} rows below minimum cluster size 2; {reason}"

    clusters = _merge_duplicate_clusters(clusters)
    return KnowledgeBase(
        clusters=clusters,
        params=params,
        num_attributes=num_attr,
        residual=ResidualReport(rows=tuple(residual_idx), reason=reason),
        config_checksum=config_checksum,
    )


def checksum_text(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Persistence: line-delimited text, bit-exact round trip.
# ---------------------------------------------------------------------------


def _field_to_text(value, level):
    if value is REMOVED:
        return "-"
    if level == 0:
        return repr(float(value))
    return str(value)


def _field_from_text(text, level):
    if text == "-":
        return REMOVED
    if level == 0:
        return float(text)
    return text


def serialize_kb(kb):
    lines = [
        "# aoipm knowledge base v1",
        (
            f"params min_cluster_size={kb.params.min_cluster_size} "
            f"attr_threshold={kb.params.attr_threshold} "
            f"tuple_threshold={kb.params.tuple_threshold}"
        ),
        f"config_checksum {kb.config_checksum}",
        f"num_attributes {kb.num_attributes}",
        f"residual {len(kb.residual.rows)} {kb.residual.reason}",
    ]
    for c in kb.clusters:
        desc = " ".join("R" if lv is REMOVED else str(lv) for lv in c.descriptor)
        sig = " ".join(
            _field_to_text(v, lv if lv is not REMOVED else -1)
            for v, lv in zip(c.signature, c.descriptor)
        )
        lines.append(
            f"cluster\t{desc}\t{sig}\t{c.instances}\t{c.level_weight!r}\t{c.weight!r}"
        )
    return "\n".join(lines) + "\n"


def deserialize_kb(text):
    lines = text.splitlines()
    if not lines or lines[0] != "# aoipm knowledge base v1":
        raise ValueError("not a knowledge base file")
    kv = dict(item.split("=") for item in lines[1].split()[1:])
    params = AoiParams(
        min_cluster_size=int(kv["min_cluster_size"]),
        attr_threshold=int(kv["attr_threshold"]),
        tuple_threshold=int(kv["tuple_threshold"]),
    )
    checksum = lines[2].split(" ", 1)[1]
    num_attr = int(lines[3].split(" ", 1)[1])
    res_parts = lines[4].split(" ", 2)
    residual = ResidualReport(rows=tuple(), reason=res_parts[2] if len(res_parts) > 2 else "")
    clusters = []
    for line in lines[5:]:
        if not line.strip():
            continue
        _, desc_s, sig_s, inst_s, lw_s, w_s = line.split("\t")
        descriptor = tuple(
            REMOVED if tok == "R" else int(tok) for tok in desc_s.split(" ")
        )
        signature = tuple(
            _field_from_text(tok, lv if lv is not REMOVED else -1)
            for tok, lv in zip(sig_s.split(" "), descriptor)
        )
        clusters.append(
            Cluster(
                descriptor=descriptor,
                signature=signature,
                instances=int(inst_s),
                level_weight=float(lw_s),
                weight=float(w_s),
            )
        )
    return KnowledgeBase(
        clusters=clusters,
        params=params,
        num_attributes=num_attr,
        residual=residual,
        config_checksum=checksum,
    )
