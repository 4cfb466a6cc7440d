"""Deterministic random number generation.

Everything random in a run is drawn from a single SplitMix64 stream so that a
run is reproducible from one 64-bit seed, independent of thread count or
backend.  SplitMix64 advances a 64-bit state by the golden-ratio increment and
mixes it with two xorshift-multiply rounds (Steele, Lea & Flood 2014); it is
tiny, fast, and trivially portable between the Python reference engine and the
compiled kernel.

Seed derivation for multi-run experiments is a documented hash so that sweep
points and repeat runs get independent streams without coordination:

    derive_seed(master, i0, i1, ...) folds each index into the state as
    state = mix64(state + (index + 1) * GOLDEN) and returns the final state.
"""

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 output mix of a 64-bit value."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def splitmix64(state: int) -> tuple[int, int]:
    """Advance the state by GOLDEN and return (new_state, output)."""
    state = (state + GOLDEN) & MASK64
    return state, mix64(state)


def derive_seed(master: int, *indices: int) -> int:
    """Derive an independent 64-bit seed from a master seed and index path."""
    s = master & MASK64
    for ix in indices:
        s = mix64((s + (ix + 1) * GOLDEN) & MASK64)
    return s


class Stream:
    """A SplitMix64 stream with the few draw shapes the simulator needs.

    The compiled kernel reimplements exactly these operations; ``randint``
    uses plain modulo reduction (the tiny bias is irrelevant here, identical
    draw sequences between backends are not).
    """

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state, z = splitmix64(self.state)
        return z

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        return self.next_u64() % n

    def random(self) -> float:
        """Uniform float in [0, 1) with 53 bits."""
        return (self.next_u64() >> 11) * 2.0**-53
