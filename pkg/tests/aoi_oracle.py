"""Naive reference implementation of the induction loop for oracle tests.

Deliberately slow and simple: plain lists, linear-scan merging, recomputation
from scratch at every step.  Kept independent of the production code paths in
``aoipm.aoi`` (only the hierarchy ascension API is shared).
"""


def _level_weight(levels, removed):
    terms = []
    for a, lv in enumerate(levels):
        if not removed[a]:
            terms.append(2.0 ** (-lv))
    return sum(terms) / len(terms)


def _merge(table):
    out = []
    for sig, votes, rows in table:
        hit = None
        for entry in out:
            if entry[0] == sig:
                hit = entry
                break
        if hit is None:
            out.append([list(sig), votes, sorted(rows)])
        else:
            hit[1] += votes
            hit[2] = sorted(hit[2] + rows)
    return out


def brute_force_aoi(rows, hierarchies, min_cluster_size, attr_threshold=20):
    """All clusters as (descriptor, signature, instances, level_weight, weight)."""
    num_attr = len(rows[0])
    clusters = []
    residual = list(range(len(rows)))

    for m in range(min_cluster_size, 1, -1):
        if not residual:
            break
        table = _merge([[list(rows[i]), 1, [i]] for i in residual])
        levels = [0] * num_attr
        removed = [False] * num_attr
        prev_w = 1.0
        cur_w = 1.0
        outliers = sum(t[1] for t in table)

        def descriptor():
            return tuple(None if removed[a] else levels[a] for a in range(num_attr))

        def extract():
            nonlocal table
            kept = []
            diff = prev_w - cur_w
            if diff < 0:
                diff = 0.0
            for sig, votes, rws in table:
                if votes >= m:
                    clusters.append(
                        (
                            descriptor(),
                            tuple(sig),
                            votes,
                            cur_w,
                            cur_w + (votes / outliers) * diff,
                            outliers,
                            diff,
                        )
                    )
                else:
                    kept.append([sig, votes, rws])
            table = kept

        extract()
        while table:
            # distinct values per live attribute
            best = None
            for a in range(num_attr):
                if removed[a]:
                    continue
                seen = []
                for sig, _, _ in table:
                    if sig[a] not in seen:
                        seen.append(sig[a])
                n = len(seen)
                if n < 2:
                    continue
                h = hierarchies[a]
                if levels[a] >= h.max_level and n <= attr_threshold:
                    continue
                key = (n, h.schema.weight, -a)
                if best is None or key > best[0]:
                    best = (key, a)
            if best is None:
                break
            a = best[1]
            h = hierarchies[a]
            if levels[a] < h.max_level:
                for entry in table:
                    v = entry[0][a]
                    if levels[a] == 0:
                        entry[0][a] = h.raw_to_label(v, 1)
                    else:
                        entry[0][a] = h.label_parent(v, levels[a])
                levels[a] += 1
            else:
                for entry in table:
                    entry[0][a] = None
                removed[a] = True
            table = _merge(table)
            prev_w = cur_w
            cur_w = _level_weight(levels, removed)
            outliers = sum(t[1] for t in table)
            extract()

        residual = sorted(i for t in table for i in t[2])

    # collapse duplicates re-created by later passes
    final = []
    for desc, sig, inst, lw, w, outl, diff in clusters:
        hit = None
        for entry in final:
            if entry[0] == desc and entry[1] == sig:
                hit = entry
                break
        if hit is None:
            final.append([desc, sig, inst, lw, w, outl, diff])
        else:
            hit[2] += inst
            share = hit[2] / hit[5]
            if share > 1.0:
                share = 1.0
            hit[4] = hit[3] + share * hit[6]
    return [(d, s, i, lw, w) for d, s, i, lw, w, _, _ in final], residual
