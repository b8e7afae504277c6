"""Covering systems of congruences: sifting, CRT assembly, verification.

A residue system is a finite choice of one class a_p mod p per prime p.
Sifting an interval keeps the integers that avoid every chosen class;
a system that leaves no survivor in [1, y] "covers" that prefix, and the
Chinese remainder theorem turns such a cover into a concrete run of y
consecutive composites.
"""

import json
from dataclasses import dataclass, field
from math import gcd

import numpy as np

from .primes import is_prime


class CoverageError(Exception):
    """A position that was supposed to be covered is not."""

    def __init__(self, position: int):
        self.position = position
        super().__init__(f"position {position} is not covered by any class")


@dataclass(frozen=True)
class ResidueSystem:
    """Map prime -> chosen residue class a_p in [0, p)."""

    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        for p, a in self.entries.items():
            if p < 2 or not is_prime(p):
                raise ValueError(f"modulus {p} is not prime")
            if not 0 <= a < p:
                raise ValueError(f"residue {a} out of range for modulus {p}")

    def __len__(self):
        return len(self.entries)

    def merged(self, other: "ResidueSystem") -> "ResidueSystem":
        """Union of two systems over disjoint prime sets."""
        overlap = self.entries.keys() & other.entries.keys()
        if overlap:
            raise ValueError(f"moduli assigned twice: {sorted(overlap)}")
        return ResidueSystem({**self.entries, **other.entries})

    def covers(self, n: int) -> bool:
        return any(n % p == a for p, a in self.entries.items())


@dataclass
class SiftedInterval:
    """Integers of [lo, hi] that avoided every class of the generating system."""

    lo: int
    hi: int
    survivors: np.ndarray  # bool, indexed by n - lo

    def count(self) -> int:
        return int(self.survivors.sum())

    def survivor_list(self) -> list:
        return [int(i) + self.lo for i in np.flatnonzero(self.survivors)]

    def first_survivor(self):
        idx = np.flatnonzero(self.survivors)
        return int(idx[0]) + self.lo if len(idx) else None

    def is_survivor(self, n: int) -> bool:
        return bool(self.survivors[n - self.lo])


def sift(sys: ResidueSystem, lo: int, hi: int) -> SiftedInterval:
    """Survivor bit for n in [lo, hi] iff n mod p != a_p for every entry.

    Per-prime strided clearing: O(len/p) work per prime.
    """
    if lo > hi:
        raise ValueError("lo must be <= hi")
    flags = np.ones(hi - lo + 1, dtype=bool)
    for p, a in sys.entries.items():
        start = (a - lo) % p
        flags[start::p] = False
    return SiftedInterval(lo=lo, hi=hi, survivors=flags)


def covered_prefix_length(sys: ResidueSystem, max_scan: int = 10**7) -> int:
    """Largest y with no survivor in [1, y]; 0 if 1 itself survives.

    Scans in blocks, stopping at the first survivor, so no arbitrary bound
    has to be guessed ahead of time.  max_scan guards against systems whose
    first survivor is absurdly far out.
    """
    block = 1024
    lo = 1
    while lo <= max_scan:
        hi = min(lo + block - 1, max_scan)
        first = sift(sys, lo, hi).first_survivor()
        if first is not None:
            return first - 1
        lo = hi + 1
        block *= 2
    raise RuntimeError(f"no survivor found below {max_scan}")


def crt_combine(congruences) -> tuple:
    """Combine (residue, modulus) pairs with pairwise coprime moduli.

    Returns (r, M) with M the product of the moduli and r the unique class
    mod M satisfying all congruences; arbitrary precision.
    """
    r, m = 0, 1
    for a, q in congruences:
        if q < 1:
            raise ValueError(f"modulus {q} must be positive")
        g = gcd(m, q)
        if g != 1:
            raise ValueError(f"moduli not pairwise coprime (gcd {g})")
        # r' = r mod m, a mod q
        inv = pow(m % q, -1, q)
        r = r + m * ((a - r) % q * inv % q)
        m *= q
        r %= m
    return r, m


@dataclass(frozen=True)
class GapCertificate:
    """A run of consecutive composites with explicit witness divisors."""

    m: int
    run_length: int
    witnesses: tuple  # (offset t, witness prime p) with p | m + t


def assemble_gap(sys: ResidueSystem, x: int) -> GapCertificate:
    """Realize the covered prefix of sys as a run of composites after m.

    m is the smallest integer > x with m = -a_p (mod p) for every entry;
    when the system assigns all primes <= x, m is the unique such value in
    (x, x + P(x)].  Every m + t for t in [1, run_length] is certified
    composite by exhibiting a witness divisor.
    """
    for p in sys.entries:
        if p > x:
            raise ValueError(f"modulus {p} exceeds x = {x}")
    y = covered_prefix_length(sys)
    residue, modulus = crt_combine(
        [((-a) % p, p) for p, a in sorted(sys.entries.items())]
    )
    # smallest m > x in the CRT class
    m = x + 1 + (residue - (x + 1)) % modulus
    witnesses = []
    for t in range(1, y + 1):
        for p, a in sys.entries.items():
            if (m + t) % p == 0:
                if m + t <= p:
                    raise CoverageError(t)
                witnesses.append((t, p))
                break
        else:
            raise CoverageError(t)
    return GapCertificate(m=m, run_length=y, witnesses=tuple(witnesses))


# -- residue-system file format ---------------------------------------------
#
# One JSON document: {"x": int, "classes": [[p, a_p], ...]} sorted by p.


def system_to_json(x: int, sys: ResidueSystem) -> str:
    classes = [[int(p), int(a)] for p, a in sorted(sys.entries.items())]
    return json.dumps({"x": int(x), "classes": classes}, separators=(",", ":")) + "\n"


def system_from_json(text: str):
    doc = json.loads(text)
    if not isinstance(doc, dict) or "x" not in doc or "classes" not in doc:
        raise ValueError("expected {\"x\": ..., \"classes\": [[p, a], ...]}")
    x = int(doc["x"])
    entries = {}
    for item in doc["classes"]:
        p, a = int(item[0]), int(item[1])
        if p in entries:
            raise ValueError(f"duplicate modulus {p}")
        if not 0 <= a < p:
            raise ValueError(f"residue {a} out of range for modulus {p}")
        entries[p] = a
    return x, ResidueSystem(entries)


def write_system_file(path, x: int, sys: ResidueSystem) -> None:
    with open(path, "w") as fh:
        fh.write(system_to_json(x, sys))


def read_system_file(path):
    with open(path) as fh:
        return system_from_json(fh.read())
