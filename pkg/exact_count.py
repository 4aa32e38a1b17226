#!/usr/bin/env python3
"""
Exact Partition Counts
Big-integer counts of d-distinct partitions and of partitions into parts
congruent to ±a modulo d+3, the differences between the two families,
and independent enumeration oracles used to validate the recursions.
"""

import math
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

from verifier_errors import CapacityError, DomainError

logger = logging.getLogger(__name__)

DEFAULT_MEMORY_BUDGET = 8 * 1024 ** 3
ORACLE_CAP = 300

# CPython int layout: object header plus 30-bit digits, and one list slot
_INT_HEADER_BYTES = 28
_DIGIT_BYTES = 4
_SLOT_BYTES = 8


class FamilyKind(Enum):
    DISTINCT = 'distinct'
    CONGRUENCE = 'congruence'


@dataclass(frozen=True)
class FamilyConfig:
    """
    Which partition family is counted

    Attributes:
        d (int): Gap for distinct partitions, modulus d+3 for congruence ones
        a (int): Smallest part (distinct) or residue (congruence)
        minus (bool): Exclude the single part d+3-a (congruence only)
        kind (FamilyKind): Distinct or congruence family
    """
    d: int
    a: int
    minus: bool = False
    kind: FamilyKind = FamilyKind.CONGRUENCE

    def __post_init__(self):
        if self.d < 1:
            raise DomainError(f"d must be >= 1, got {self.d}")
        if self.a not in (1, 2):
            raise DomainError(f"a must be 1 or 2, got {self.a}")
        if self.kind is FamilyKind.DISTINCT and self.minus:
            raise DomainError("minus is only defined for congruence families")

    def label(self):
        if self.kind is FamilyKind.DISTINCT:
            return f"q_{self.d}^({self.a})"
        suffix = ',-' if self.minus else ''
        return f"Q_{self.d}^({self.a}{suffix})"


@dataclass(frozen=True)
class CountSeries:
    """Counts values[0..n_max] of one family; values[0] is the empty partition."""
    config: FamilyConfig
    n_max: int
    values: tuple

    def __post_init__(self):
        if len(self.values) != self.n_max + 1:
            raise ValueError(f"expected {self.n_max + 1} values, got {len(self.values)}")
        if self.values[0] != 1:
            raise ValueError("values[0] must be 1")

    def __getitem__(self, n):
        return self.values[n]

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class AllowedParts:
    d: int
    a: int
    minus: bool
    parts: tuple


def allowed_parts(d, a, minus, limit):
    """
    List the parts m <= limit with m ≡ ±a (mod d+3)

    Args:
        d (int): Family index, modulus is d+3
        a (int): Residue
        minus (bool): Drop the part d+3-a
        limit (int): Largest part to list

    Returns:
        AllowedParts: Ascending, deduplicated parts
    """
    if d < 1 or a < 1 or limit < 1:
        raise DomainError(f"allowed_parts needs d, a, limit >= 1 (got {d}, {a}, {limit})")
    modulus = d + 3
    parts = set()
    for residue in {a % modulus, (-a) % modulus}:
        first = residue if residue > 0 else modulus
        parts.update(range(first, limit + 1, modulus))
    excluded = d + 3 - a
    if minus and excluded > 0:
        parts.discard(excluded)
    return AllowedParts(d=d, a=a, minus=minus, parts=tuple(sorted(parts)))


def estimate_series_bytes(n_max, rows):
    """
    Upper estimate of the memory held by `rows` lists of counts up to n_max.
    Every count is at most p(n_max) < exp(pi*sqrt(2n/3)).
    """
    bits = math.pi * math.sqrt(2 * max(n_max, 1) / 3) / math.log(2)
    per_value = _INT_HEADER_BYTES + _DIGIT_BYTES * math.ceil(bits / 30) + _SLOT_BYTES
    return rows * (n_max + 1) * per_value


def check_capacity(n_max, rows, memory_budget=DEFAULT_MEMORY_BUDGET):
    """
    Raise CapacityError when the estimate for n_max exceeds the budget

    Args:
        n_max (int): Requested series length minus one
        rows (int): Number of full-length lists alive at once
        memory_budget (int): Budget in bytes
    """
    needed = estimate_series_bytes(n_max, rows)
    if needed <= memory_budget:
        return
    low, high = 0, n_max
    while low < high:
        mid = (low + high + 1) // 2
        if estimate_series_bytes(mid, rows) <= memory_budget:
            low = mid
        else:
            high = mid - 1
    logger.error(f"n_max={n_max} needs ~{needed} bytes, budget is {memory_budget}")
    raise CapacityError(f"n_max={n_max} needs ~{needed} bytes over a {memory_budget} byte budget",
                        largest_n=low)


def _add_parts(values, parts, n_max):
    # Unbounded knapsack in place; each slice only reads already-updated entries
    for part in parts:
        for start in range(part, n_max + 1, part):
            stop = min(start + part, n_max + 1)
            values[start:stop] = [x + y for x, y in
                                  zip(values[start:stop], values[start - part:stop - part])]


def count_congruence(config, n_max, memory_budget=DEFAULT_MEMORY_BUDGET):
    """
    Count partitions into parts ≡ ±a (mod d+3), optionally without d+3-a

    Args:
        config (FamilyConfig): Congruence family
        n_max (int): Largest n counted
        memory_budget (int): Budget in bytes

    Returns:
        CountSeries: Q-family counts for 0..n_max
    """
    if config.kind is not FamilyKind.CONGRUENCE:
        raise DomainError(f"count_congruence needs a congruence family, got {config.kind.value}")
    if n_max < 0:
        raise DomainError(f"n_max must be >= 0, got {n_max}")
    check_capacity(n_max, 2, memory_budget)

    values = [1] + [0] * n_max
    if n_max > 0:
        parts = allowed_parts(config.d, config.a, config.minus, n_max).parts
        _add_parts(values, parts, n_max)
    logger.info(f"Counted {config.label()} up to n={n_max}")
    return CountSeries(config=config, n_max=n_max, values=tuple(values))


def _exact_part_rows(n_max, k_max, limits=None):
    """
    Yield (k, row) with row[n] = p_k(n), keeping only rows k-1 and k alive.
    limits(k), when given, bounds the indices row k has to cover.
    """
    prev = [1] + [0] * n_max
    for k in range(1, k_max + 1):
        limit = n_max if limits is None else min(n_max, limits(k))
        if limit < 0:
            return
        row = [0] * (limit + 1)
        for start in range(k, limit + 1, k):
            stop = min(start + k, limit + 1)
            row[start:stop] = [p + r for p, r in
                               zip(prev[start - 1:stop - 1], row[start - k:stop - k])]
        yield k, row
        prev = row


def count_exact_parts(n_max, k_max, memory_budget=DEFAULT_MEMORY_BUDGET):
    """
    Table of p_k(n), the partitions of n into exactly k parts

    Args:
        n_max (int): Largest n
        k_max (int): Largest k

    Returns:
        list: rows[k][n] for 0 <= k <= k_max, 0 <= n <= n_max (rows[0] is p_0)
    """
    if k_max < 1:
        raise DomainError(f"k_max must be >= 1, got {k_max}")
    if n_max < 0:
        raise DomainError(f"n_max must be >= 0, got {n_max}")
    check_capacity(n_max, k_max + 1, memory_budget)

    rows = [[1] + [0] * n_max]
    rows.extend(row for _, row in _exact_part_rows(n_max, k_max))
    return rows


def _distinct_offset(d, a, k):
    # smallest sum of k parts >= a pairwise differing by >= d
    return d * k * (k - 1) // 2 + a * k


def count_distinct(d, a, n_max, memory_budget=DEFAULT_MEMORY_BUDGET):
    """
    Count d-distinct partitions with parts >= a

    Removing the staircase a-1+d(k-i) from the i-th largest of k parts maps
    them onto partitions into exactly k parts, so
    q(N) = sum over k of p_k(N - d*C(k,2) - a*k + k).

    Args:
        d (int): Minimal difference between parts
        a (int): Smallest allowed part, 1 or 2
        n_max (int): Largest N counted

    Returns:
        CountSeries: q_d^(a) counts for 0..n_max
    """
    config = FamilyConfig(d=d, a=a, kind=FamilyKind.DISTINCT)
    if n_max < 0:
        raise DomainError(f"n_max must be >= 0, got {n_max}")
    check_capacity(n_max, 3, memory_budget)

    values = [1] + [0] * n_max
    k_max = 0
    while _distinct_offset(d, a, k_max + 1) <= n_max:
        k_max += 1

    def limit(k):
        return n_max - _distinct_offset(d, a, k) + k

    for k, row in _exact_part_rows(n_max, k_max, limits=limit):
        offset = _distinct_offset(d, a, k)
        values[offset:] = [q + p for q, p in zip(values[offset:], row[k:])]
    logger.info(f"Counted {config.label()} up to n={n_max} using {k_max} part counts")
    return CountSeries(config=config, n_max=n_max, values=tuple(values))


def delta(d, a, minus, n_max, memory_budget=DEFAULT_MEMORY_BUDGET):
    """
    Exact difference q_d^(a)(n) - Q_d^(a)(n), or against Q_d^(a,-) when minus

    Returns:
        tuple: Signed integers for 0..n_max
    """
    distinct = count_distinct(d, a, n_max, memory_budget)
    congruence = count_congruence(FamilyConfig(d=d, a=a, minus=minus), n_max, memory_budget)
    return delta_from_series(distinct, congruence)


def delta_from_series(distinct, congruence):
    if distinct.n_max != congruence.n_max:
        raise ValueError(f"series lengths differ: {distinct.n_max} vs {congruence.n_max}")
    return tuple(q - p for q, p in zip(distinct.values, congruence.values))


def _oracle_predicate(config):
    modulus = config.d + 3
    residues = {config.a % modulus, (-config.a) % modulus}
    excluded = config.d + 3 - config.a if config.minus else None

    def allowed(m):
        return m % modulus in residues and m != excluded
    return allowed


@lru_cache(maxsize=64)
def _enumerator(config):
    """Memoised enumeration for one family, shared by every n asked of it"""
    if config.kind is FamilyKind.DISTINCT:
        gap = config.d

        @lru_cache(maxsize=None)
        def distinct_from(rest, smallest):
            if rest == 0:
                return 1
            return sum(distinct_from(rest - part, part + gap)
                       for part in range(smallest, rest + 1))
        return lambda n: distinct_from(n, config.a)

    allowed = _oracle_predicate(config)

    @lru_cache(maxsize=None)
    def congruence_upto(rest, largest):
        if rest == 0:
            return 1
        return sum(congruence_upto(rest - part, part)
                   for part in range(1, min(largest, rest) + 1) if allowed(part))
    return lambda n: congruence_upto(n, n)


def brute_force_count(n, config, cap=ORACLE_CAP):
    """
    Count partitions of n in the family by direct enumeration

    Args:
        n (int): Number to partition, at most cap
        config (FamilyConfig): Family
        cap (int): Largest n accepted

    Returns:
        int: Number of partitions
    """
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    if n > cap:
        raise DomainError(f"brute force oracle is capped at n={cap}, got {n}")
    return _enumerator(config)(n)


def product_coefficients(parts, n_max):
    """
    Coefficients of prod(1 - x^m)^-1 over the given parts up to x^n_max.
    Uses n*c(n) = sum_j sigma(j)*c(n-j) with sigma(j) the sum of parts dividing j.
    """
    sigma = [0] * (n_max + 1)
    for part in parts:
        for multiple in range(part, n_max + 1, part):
            sigma[multiple] += part
    coefficients = [1] + [0] * n_max
    for n in range(1, n_max + 1):
        total = sum(sigma[j] * coefficients[n - j] for j in range(1, n + 1) if sigma[j])
        value, remainder = divmod(total, n)
        assert remainder == 0, f"non-integral coefficient at n={n}"
        coefficients[n] = value
    return tuple(coefficients)


def distinct_count_by_parts(d, a, n_max):
    """
    q_d^(a)(n) for 0..n_max via r_k(n) = r_k(n-k) + r_{k-1}(n-a-d(k-1)),
    r_k counting the partitions with exactly k parts.
    """
    totals = [1] + [0] * n_max
    prev = [1] + [0] * n_max
    k = 1
    while _distinct_offset(d, a, k) <= n_max:
        shift = a + d * (k - 1)
        row = [0] * (n_max + 1)
        for n in range(_distinct_offset(d, a, k), n_max + 1):
            row[n] = row[n - k] + prev[n - shift]
        totals = [t + r for t, r in zip(totals, row)]
        prev = row
        k += 1
    return tuple(totals)
