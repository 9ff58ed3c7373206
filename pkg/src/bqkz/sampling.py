"""Seeded random rational points for certification runs.

Every check in the exact suites is evaluated at random rational parameter
points.  Candidates are drawn with numerators in [-50, 50] and denominators
in [1, 20]; a builder that hits a pole raises PoleError and the point is
redrawn.  Child generators are derived with a stable hash so a run is
reproducible from its seed regardless of process layout.
"""

from __future__ import annotations

import hashlib
import random

from .scalar_field import PoleError, rat

NUM_BOUND = 50
DEN_BOUND = 20
MAX_RETRIES = 200


class SamplingExhausted(RuntimeError):
    """Too many consecutive draws hit poles of the quantity under test."""


def child_seed(seed: int, tag: str) -> int:
    """Derive a stream seed from a run seed and a suite tag, stably."""
    h = hashlib.sha256(("%d:%s" % (seed, tag)).encode()).digest()
    return int.from_bytes(h[:8], "big")


def make_rng(seed: int, tag: str = "") -> random.Random:
    return random.Random(child_seed(seed, tag) if tag else seed)


def rand_rational(rng: random.Random, nonzero: bool = False):
    while True:
        num = rng.randint(-NUM_BOUND, NUM_BOUND)
        if nonzero and num == 0:
            continue
        return rat(num, rng.randint(1, DEN_BOUND))


def rand_tuple(rng: random.Random, count: int, nonzero: bool = False):
    return tuple(rand_rational(rng, nonzero=nonzero) for _ in range(count))


def sample_point(rng: random.Random, builder, max_retries: int = MAX_RETRIES):
    """Draw points until builder(rng) returns without a PoleError.

    builder draws its own coordinates from rng and either returns a value
    or raises PoleError when the draw sits on a pole.
    """
    for _ in range(max_retries):
        try:
            return builder(rng)
        except PoleError:
            continue
    raise SamplingExhausted(
        "no pole-free point in %d draws (numerators within %d, denominators within %d)"
        % (max_retries, NUM_BOUND, DEN_BOUND)
    )
