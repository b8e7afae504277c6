"""Named, splittable random streams.

Every randomized routine in this package draws from a stream derived from a
single master seed plus a tuple of string/int tags, so results are
reproducible across runs and independent of how work is scheduled:
``stream(seed, "stage2") is deterministic``, and distinct tags give
independent-looking streams.
"""

import hashlib
import random


def stream_seed(master_seed: int, *tags) -> int:
    """Derive a 64-bit child seed from a master seed and a tag tuple."""
    h = hashlib.sha256()
    h.update(str(int(master_seed)).encode())
    for t in tags:
        h.update(b"\x00")
        h.update(str(t).encode())
    return int.from_bytes(h.digest()[:8], "big")


def stream(master_seed: int, *tags) -> random.Random:
    """A ``random.Random`` seeded by ``hash(master_seed, *tags)``."""
    return random.Random(stream_seed(master_seed, *tags))
