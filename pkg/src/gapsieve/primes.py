"""Prime generation, primorials, gap scanning, and admissible tuples.

All sieving is done with a segmented sieve of Eratosthenes (numpy bool
segments, default segment size 2**20 entries) so intervals up to 1e8 stay
cheap and memory-local.
"""

from dataclasses import dataclass
from math import isqrt

import numpy as np

SEGMENT_SIZE = 1 << 20


@dataclass(frozen=True)
class PrimeTable:
    """All primes <= limit, strictly increasing."""

    limit: int
    primes: tuple

    def __len__(self):
        return len(self.primes)

    def __iter__(self):
        return iter(self.primes)

    def count(self) -> int:
        return len(self.primes)


def _small_sieve(limit: int) -> np.ndarray:
    """Plain sieve up to limit (inclusive); returns array of primes."""
    if limit < 2:
        return np.empty(0, dtype=np.int64)
    flags = np.ones(limit + 1, dtype=bool)
    flags[:2] = False
    for p in range(2, isqrt(limit) + 1):
        if flags[p]:
            flags[p * p :: p] = False
    return np.flatnonzero(flags).astype(np.int64)


def sieve_interval(lo: int, hi: int, segment_size: int = SEGMENT_SIZE) -> np.ndarray:
    """Primes in [lo, hi] via a segmented sieve."""
    if hi < max(lo, 2):
        return np.empty(0, dtype=np.int64)
    lo = max(lo, 2)
    base = _small_sieve(isqrt(hi))
    out = []
    for seg_lo in range(lo, hi + 1, segment_size):
        seg_hi = min(seg_lo + segment_size - 1, hi)
        flags = np.ones(seg_hi - seg_lo + 1, dtype=bool)
        for p in base:
            p = int(p)
            start = max(p * p, ((seg_lo + p - 1) // p) * p)
            if start > seg_hi:
                continue
            flags[start - seg_lo :: p] = False
        if seg_lo <= 1:
            flags[: 2 - seg_lo] = False
        out.append(np.flatnonzero(flags).astype(np.int64) + seg_lo)
    return np.concatenate(out) if out else np.empty(0, dtype=np.int64)


def primes_up_to(x: int, segment_size: int = SEGMENT_SIZE) -> PrimeTable:
    """Table of all primes <= x (x >= 0)."""
    if x < 0:
        raise ValueError("x must be nonnegative")
    ps = sieve_interval(2, x, segment_size)
    return PrimeTable(limit=x, primes=tuple(int(p) for p in ps))


def primorial(x: int) -> int:
    """Product of all primes <= x; 1 when x < 2 (empty product)."""
    result = 1
    for p in primes_up_to(x):
        result *= p
    return result


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, valid for all n < 3.3e24 (covers 64-bit)."""
    if n < 2:
        return False
    for p in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37):
        y = pow(a, d, n)
        if y in (1, n - 1):
            continue
        for _ in range(s - 1):
            y = y * y % n
            if y == n - 1:
                break
        else:
            return False
    return True


def max_gap_below(X: int):
    """Maximal gap between consecutive primes p_n < p_{n+1} <= X.

    Returns (p_n, p_{n+1}, gap); ties broken by the smallest lower endpoint,
    which makes the answer deterministic.  Requires at least two primes <= X.
    """
    if X < 3:
        raise ValueError("need at least two primes <= X")
    best = None
    prev = None
    for seg_lo in range(2, X + 1, SEGMENT_SIZE):
        for p in sieve_interval(seg_lo, min(seg_lo + SEGMENT_SIZE - 1, X)):
            p = int(p)
            if prev is not None:
                gap = p - prev
                if best is None or gap > best[2]:
                    best = (prev, p, gap)
            prev = p
    if best is None:
        raise ValueError("need at least two primes <= X")
    return best


@dataclass(frozen=True)
class AdmissibleTuple:
    """Increasing offsets h_1 < ... < h_r missing a residue class mod every prime."""

    offsets: tuple

    @property
    def r(self) -> int:
        return len(self.offsets)

    def span(self) -> int:
        return self.offsets[-1] - self.offsets[0]


def is_admissible(t: AdmissibleTuple) -> bool:
    """True iff for every prime p <= r the offsets miss some class mod p.

    Primes p > r are automatically fine: r distinct offsets occupy at most
    r < p classes.
    """
    offs = t.offsets
    if len(set(offs)) != len(offs):
        raise ValueError("offsets must be distinct")
    for p in primes_up_to(t.r):
        if len({h % p for h in offs}) == p:
            return False
    return True


def first_r_primes_tuple(r: int) -> AdmissibleTuple:
    """The first r primes larger than r, as an admissible r-tuple."""
    if r < 1:
        raise ValueError("r must be >= 1")
    # primes > r; generous sieve bound r*(log r + log log r) + slack
    hi = max(4 * r, 64)
    while True:
        ps = [int(p) for p in sieve_interval(r + 1, hi)]
        if len(ps) >= r:
            return AdmissibleTuple(offsets=tuple(ps[:r]))
        hi *= 2


def odd_squares_tuple(r: int) -> AdmissibleTuple:
    """(1^2, 3^2, ..., (2r-1)^2): an admissible r-tuple inside [2r^2].

    Fallback used when the first-r-primes tuple exceeds the 2r^2 span bound.
    Squares avoid the non-residue classes mod every odd prime and are all
    odd, so no prime has every class occupied.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    return AdmissibleTuple(offsets=tuple((2 * i + 1) ** 2 for i in range(r)))


def admissible_tuple(r: int, style: str = "auto") -> AdmissibleTuple:
    """Admissible r-tuple with offsets in [2r^2].

    style "primes" takes the first r primes > r, "odd-squares" the odd
    squares, "auto" takes primes but falls back to odd squares when the
    largest offset exceeds 2r^2 (checked, not assumed).
    """
    if style == "odd-squares":
        return odd_squares_tuple(r)
    t = first_r_primes_tuple(r)
    if style == "primes":
        return t
    if style == "auto":
        if t.offsets[-1] <= 2 * r * r:
            return t
        return odd_squares_tuple(r)
    raise ValueError(f"unknown tuple style {style!r}")
