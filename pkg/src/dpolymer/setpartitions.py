"""Set partitions of {1..k} and the moments-to-cumulants combination.

kappa(X_1..X_k) = sum over partitions pi of (|pi|-1)! (-1)^{|pi|-1}
prod_{B in pi} E[prod_{i in B} X_i].
"""

import math
from dataclasses import dataclass

from .errors import CapabilityError

PARTITION_MAX = 8
BELL = [1, 1, 2, 5, 15, 52, 203, 877, 4140]


@dataclass(frozen=True)
class SetPartition:
    """Disjoint blocks covering {1..k} (1-based indices, each block sorted)."""

    blocks: tuple

    @property
    def size(self):
        return len(self.blocks)

    def covers(self, k):
        seen = sorted(i for b in self.blocks for i in b)
        return seen == list(range(1, k + 1))


def enumerate_partitions(k):
    """All set partitions of {1..k}, each exactly once (Bell(k) of them)."""
    if not 1 <= k <= PARTITION_MAX:
        raise CapabilityError(f"partition enumeration supported for 1 <= k <= {PARTITION_MAX}")
    parts = []

    def grow(idx, blocks):
        if idx > k:
            parts.append(SetPartition(tuple(tuple(b) for b in blocks)))
            return
        for b in blocks:
            b.append(idx)
            grow(idx + 1, blocks)
            b.pop()
        blocks.append([idx])
        grow(idx + 1, blocks)
        blocks.pop()

    grow(1, [])
    return parts


def cumulant_weights(k):
    """[(partition, (|pi|-1)! (-1)^{|pi|-1})] for order k."""
    return [(p, math.factorial(p.size - 1) * (-1.0) ** (p.size - 1)) for p in enumerate_partitions(k)]


def joint_cumulant_from_moments(k, moment_of_block):
    """Combine block moments into the joint cumulant.

    moment_of_block(block) must return E[prod_{i in block} X_i] for a sorted
    tuple of 1-based argument positions; may return arrays (combined
    elementwise).
    """
    total = None
    for part, w in cumulant_weights(k):
        prod = None
        for b in part.blocks:
            mb = moment_of_block(b)
            prod = mb if prod is None else prod * mb
        term = w * prod
        total = term if total is None else total + term
    return total


def compositions(total, parts):
    """All ordered tuples of `parts` nonnegative integers summing to `total`."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest
