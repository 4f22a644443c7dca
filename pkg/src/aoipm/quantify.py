"""Per-cycle matching of raw instances against the knowledge base.

Each instance is generalized to the attribute levels of every cluster group,
most specific group first, and the first exact signature hit supplies its
weight.  Instances that match nothing get weight 0 and are flagged as
anomalies.
"""

from __future__ import annotations

from dataclasses import dataclass

from .aoi import REMOVED
from .errors import EmptyInputError

NO_MATCH = -1


@dataclass
class QuantificationSeries:
    """Matched cluster id and weight per cycle for one simulation."""

    simulation_id: int
    cluster_ids: list  # NO_MATCH where nothing matched
    weights: list

    def __len__(self):
        return len(self.weights)


class Matcher:
    """Read-only signature index over a knowledge base.

    Groups are pre-sorted by descending relation weight and each group holds
    a hash index of signatures, so a lookup costs one generalization pass per
    group until the first hit.
    """

    def __init__(self, kb, hierarchies):
        self.kb = kb
        self.hierarchies = hierarchies
        self.groups = kb.groups()

    def match_instance(self, instance):
        """(cluster id, weight) for one raw value vector; (NO_MATCH, 0.0) if none."""
        if len(instance) != self.kb.num_attributes:
            raise ValueError(
                f"instance has {len(instance)} values, expected {self.kb.num_attributes}"
            )
        for descriptor, _, sigs in self.groups:
            key = []
            for a, level in enumerate(descriptor):
                if level is REMOVED:
                    key.append(REMOVED)
                elif level == 0:
                    key.append(float(instance[a]))
                else:
                    key.append(self.hierarchies[a].raw_to_label(instance[a], level))
            cid = sigs.get(tuple(key))
            if cid is not None:
                return cid, self.kb.clusters[cid].weight
        return NO_MATCH, 0.0


def match_instance(kb, instance, hierarchies):
    """One-shot form of :meth:`Matcher.match_instance`."""
    return Matcher(kb, hierarchies).match_instance(instance)


def quantify_simulation(kb, simulation_rows, hierarchies, simulation_id=0, matcher=None):
    """Quantification series of a preprocessed simulation (one row per cycle)."""
    if len(simulation_rows) == 0:
        raise EmptyInputError("empty simulation")
    if matcher is None:
        matcher = Matcher(kb, hierarchies)
    ids, weights = [], []
    for row in simulation_rows:
        cid, w = matcher.match_instance(row)
        ids.append(cid)
        weights.append(w)
    return QuantificationSeries(simulation_id=simulation_id, cluster_ids=ids, weights=weights)


def export_series(series):
    """Columnar text (cycle, cluster id, weight) for one simulation."""
    lines = ["cycle\tcluster\tweight"]
    for i, (cid, w) in enumerate(zip(series.cluster_ids, series.weights), start=1):
        lines.append(f"{i}\t{cid}\t{w!r}")
    return "\n".join(lines) + "\n"
