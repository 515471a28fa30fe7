"""Simulated digital pins, 8-channel active-low relay board and breakers.

Relay channel ``n`` is wired to digital pin ``n + 1`` (pins 2..9; pins 0
and 1 stay free for the serial link). Channel roles:

    1  excitation ON        5  power switch ON  (DG breaker close)
    2  excitation OFF       6  power switch OFF (DG breaker open)
    3  excitation UP        7  spare
    4  excitation DOWN      8  spare

A channel is energised (NO-COM closed) only while its IN pin is pulled
low; a high or unconnected IN pin leaves the contact resting on NC.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, replace
from typing import Iterable

log = logging.getLogger(__name__)

N_DIGITAL_PINS = 14
N_RELAY_CHANNELS = 8


class PinLevel(enum.Enum):
    HIGH = "High"
    LOW = "Low"
    FLOATING = "Floating"


class Contact(enum.Enum):
    NO_CLOSED = "NO_closed"
    NC_CLOSED = "NC_closed"


class Channel(enum.IntEnum):
    EXCITATION_ON = 1
    EXCITATION_OFF = 2
    EXCITATION_UP = 3
    EXCITATION_DOWN = 4
    SWITCH_ON = 5
    SWITCH_OFF = 6
    SPARE_7 = 7
    SPARE_8 = 8


def relay_pin(channel: int) -> int:
    if not 1 <= channel <= N_RELAY_CHANNELS:
        raise IndexError(f"relay channel {channel} out of range 1..{N_RELAY_CHANNELS}")
    return channel + 1


@dataclass(frozen=True)
class PinBank:
    levels: tuple[PinLevel, ...] = (PinLevel.FLOATING,) * N_DIGITAL_PINS

    def __post_init__(self) -> None:
        if len(self.levels) != N_DIGITAL_PINS:
            raise ValueError(f"pin bank needs {N_DIGITAL_PINS} pins, got {len(self.levels)}")

    def __getitem__(self, index: int) -> PinLevel:
        _check_pin(index)
        return self.levels[index]


def _check_pin(index: int) -> None:
    if not isinstance(index, int) or not 0 <= index < N_DIGITAL_PINS:
        raise IndexError(f"digital pin {index} out of range 0..{N_DIGITAL_PINS - 1}")


def set_pin(bank: PinBank, index: int, level: PinLevel) -> PinBank:
    _check_pin(index)
    levels = list(bank.levels)
    levels[index] = PinLevel(level)
    return PinBank(tuple(levels))


@dataclass(frozen=True)
class RelayChannel:
    index: int
    in_level: PinLevel = PinLevel.FLOATING

    def __post_init__(self) -> None:
        if not 1 <= self.index <= N_RELAY_CHANNELS:
            raise IndexError(f"relay channel {self.index} out of range 1..{N_RELAY_CHANNELS}")

    @property
    def contact(self) -> Contact:
        return relay_eval(self)


def relay_eval(ch: RelayChannel) -> Contact:
    return Contact.NO_CLOSED if ch.in_level is PinLevel.LOW else Contact.NC_CLOSED


def relay_bank(pins: PinBank) -> tuple[RelayChannel, ...]:
    return tuple(
        RelayChannel(n, pins[relay_pin(n)]) for n in range(1, N_RELAY_CHANNELS + 1)
    )


def energised_channels(pins: PinBank) -> frozenset[int]:
    """Channels whose NO contact is currently closed."""
    levels = pins.levels
    return frozenset(
        n for n in range(1, N_RELAY_CHANNELS + 1) if levels[n + 1] is PinLevel.LOW
    )


def energised(pins: PinBank, channel: int) -> bool:
    return relay_eval(RelayChannel(channel, pins[relay_pin(channel)])) is Contact.NO_CLOSED


def drive_channels(pins: PinBank, asserted: Iterable[int], channels: Iterable[int]) -> PinBank:
    """Pull the IN pin low for every channel in ``asserted``, high for the rest of ``channels``."""
    on = set(asserted)
    levels = list(pins.levels)
    for ch in channels:
        levels[relay_pin(ch)] = PinLevel.LOW if ch in on else PinLevel.HIGH
    return PinBank(tuple(levels))


class BreakerId(enum.Enum):
    DG = "DG"
    GRID = "Grid"


class BreakerState(enum.Enum):
    OPEN = "open"
    CLOSED = "closed"


@dataclass(frozen=True)
class Breaker:
    id: BreakerId
    state: BreakerState = BreakerState.OPEN
    interlock_with: BreakerId | None = None

    @property
    def closed(self) -> bool:
        return self.state is BreakerState.CLOSED


@dataclass(frozen=True)
class SafetyEvent:
    breaker: BreakerId
    kind: str
    message: str
    tick: int | None = None


def breaker_step(
    b: Breaker,
    close_request: bool,
    permissive: bool,
    peer_state: BreakerState | None = None,
    *,
    open_request: bool = False,
    transfer_window: bool = False,
) -> tuple[Breaker, SafetyEvent | None]:
    """Apply one tick of open/close requests.

    Opening always succeeds and takes precedence. A close is refused, with a
    :class:`SafetyEvent`, if the permissive is false or if the interlocked
    peer is closed outside a supervised transfer window.
    """
    if open_request:
        return replace(b, state=BreakerState.OPEN), None
    if not close_request or b.closed:
        return b, None
    if not permissive:
        event = SafetyEvent(b.id, "permissive", f"{b.id.value} close refused: permissive false")
        log.warning(event.message)
        return b, event
    if peer_state is BreakerState.CLOSED and b.interlock_with is not None and not transfer_window:
        event = SafetyEvent(
            b.id, "interlock", f"{b.id.value} close refused: {b.interlock_with.value} is closed"
        )
        log.warning(event.message)
        return b, event
    return replace(b, state=BreakerState.CLOSED), None
