"""Fixed-step clock and deterministic noise source.

The random generator is xorshift64* (Vigna, 2016), seeded through one
round of splitmix64 so that small or adjacent seeds start far apart:

    seed    -> z = seed + 0x9E3779B97F4A7C15
               z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
               z = (z ^ (z >> 27)) * 0x94D049BB133111EB
               state = z ^ (z >> 31)          (0 is replaced by 0x9E3779B97F4A7C15)
    step    -> x ^= x >> 12; x ^= x << 25; x ^= x >> 27
               out = x * 0x2545F4914F6CDD1D
    uniform -> (out >> 11) * 2**-53            in [0, 1)
    noise   -> amplitude * (2 * uniform - 1)    in [-amplitude, +amplitude)

All arithmetic is modulo 2**64, so sequences are identical on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


@dataclass(frozen=True)
class SimClock:
    tick: int = 0
    dt_ms: int = 100

    def __post_init__(self) -> None:
        if self.dt_ms <= 0:
            raise ValueError(f"dt_ms must be > 0, got {self.dt_ms}")
        if self.tick < 0:
            raise ValueError(f"tick must be >= 0, got {self.tick}")

    @property
    def elapsed_ms(self) -> int:
        return self.tick * self.dt_ms

    @property
    def dt_s(self) -> float:
        return self.dt_ms / 1000.0


def advance(clock: SimClock) -> SimClock:
    return SimClock(tick=clock.tick + 1, dt_ms=clock.dt_ms)


def _splitmix64(seed: int) -> int:
    z = (seed + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class RngState:
    """Seed plus the current xorshift64* word. Build with :meth:`from_seed`."""

    seed: int
    state: int

    @classmethod
    def from_seed(cls, seed: int) -> "RngState":
        if not 0 <= seed <= _MASK64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
        state = _splitmix64(seed) or _GOLDEN
        return cls(seed=seed, state=state)


def next_u64(rng: RngState) -> tuple[int, RngState]:
    x = rng.state
    x ^= x >> 12
    x ^= (x << 25) & _MASK64
    x ^= x >> 27
    out = (x * 0x2545F4914F6CDD1D) & _MASK64
    return out, RngState(seed=rng.seed, state=x)


def uniform01(rng: RngState) -> tuple[float, RngState]:
    out, rng = next_u64(rng)
    return (out >> 11) * (1.0 / (1 << 53)), rng


def noise_sample(rng: RngState, amplitude: float) -> tuple[float, RngState]:
    """Draw a value in ``[-amplitude, +amplitude]``.

    The generator advances even when ``amplitude`` is zero, so the draw
    sequence does not depend on which jitter sources are switched on.
    """
    if not amplitude >= 0:
        raise ValueError(f"amplitude must be >= 0, got {amplitude}")
    u, rng = uniform01(rng)
    if amplitude == 0:
        return 0.0, rng
    return amplitude * (2.0 * u - 1.0), rng
