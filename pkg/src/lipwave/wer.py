"""Word error rate via minimum edit distance with operation counts.

The dynamic program uses unit costs for substitution, deletion and
insertion; the backtrace resolves cost ties in the fixed order
substitution > deletion > insertion so reported counts are unique.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class WerReport:
    substitutions: int
    deletions: int
    insertions: int
    reference_count: int
    per_group: dict = field(default_factory=dict)

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        return self.errors / self.reference_count

    def to_dict(self) -> dict:
        return {
            "substitutions": self.substitutions,
            "deletions": self.deletions,
            "insertions": self.insertions,
            "reference_count": self.reference_count,
            "errors": self.errors,
            "wer": self.wer,
        }


def wer(reference, hypothesis) -> WerReport:
    """Edit-distance word error rate between two token sequences.

    Deletion means a reference token missing from the hypothesis;
    insertion means an extra hypothesis token.
    """
    ref = list(reference)
    hyp = list(hypothesis)
    if not ref:
        raise ValueError("empty reference")
    n, m = len(ref), len(hyp)
    cost = np.zeros((n + 1, m + 1), dtype=np.int64)
    cost[:, 0] = np.arange(n + 1)
    cost[0, :] = np.arange(m + 1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if ref[i - 1] == hyp[j - 1]:
                cost[i, j] = cost[i - 1, j - 1]
            else:
                cost[i, j] = 1 + min(cost[i - 1, j - 1], cost[i - 1, j], cost[i, j - 1])
    subs = dels = ins = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and cost[i, j] == cost[i - 1, j - 1]:
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and cost[i, j] == cost[i - 1, j - 1] + 1:
            subs += 1
            i, j = i - 1, j - 1
        elif i > 0 and cost[i, j] == cost[i - 1, j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return WerReport(subs, dels, ins, n)


def aggregate_wer(pairs, group_keys=None) -> WerReport:
    """Pool edit counts over (reference, hypothesis) pairs.

    group_keys, when given, is a parallel list of {name: value} dicts;
    the report then carries pooled counts per group value, e.g. per
    speaker and per sentence.
    """
    total = WerReport(0, 0, 0, 0)
    groups: dict = {}
    for idx, (ref, hyp) in enumerate(pairs):
        one = wer(ref, hyp)
        total.substitutions += one.substitutions
        total.deletions += one.deletions
        total.insertions += one.insertions
        total.reference_count += one.reference_count
        if group_keys is not None:
            for name, value in group_keys[idx].items():
                bucket = groups.setdefault(name, {}).setdefault(
                    value, {"substitutions": 0, "deletions": 0, "insertions": 0,
                            "reference_count": 0}
                )
                bucket["substitutions"] += one.substitutions
                bucket["deletions"] += one.deletions
                bucket["insertions"] += one.insertions
                bucket["reference_count"] += one.reference_count
    for name, buckets in groups.items():
        for value, counts in buckets.items():
            errors = counts["substitutions"] + counts["deletions"] + counts["insertions"]
            counts["wer"] = errors / counts["reference_count"] if counts["reference_count"] else 0.0
    total.per_group = groups
    return total
