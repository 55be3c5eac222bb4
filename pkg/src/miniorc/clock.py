"""Logical simulation clock shared by every module.

Manual mode is the default: time only moves when advance() is called, which
makes every scenario script replayable. Realtime mode reads the wall clock
and rejects manual advancement.
"""

from __future__ import annotations

import time

from miniorc.errors import MiniorcError

MODES = ("manual", "realtime")


class AdvanceInRealtime(MiniorcError):
    code = "ADVANCE_IN_REALTIME"


class BadAdvance(MiniorcError):
    code = "BAD_ADVANCE"


class LogicalClock:
    def __init__(self, mode: str = "manual", start: float = 0.0):
        if mode not in MODES:
            raise MiniorcError(f"unknown clock mode {mode!r}", code="CONFIG_ERROR")
        self.mode = mode
        self._now = float(start)
        self._epoch = time.time() - float(start)

    def now(self) -> float:
        if self.mode == "realtime":
            return time.time() - self._epoch
        return self._now

    def advance(self, dt: float) -> float:
        if self.mode == "realtime":
            raise AdvanceInRealtime("clock advance is only available in manual mode")
        dt = float(dt)
        if dt < 0:
            raise BadAdvance(f"cannot advance by a negative interval ({dt})")
        self._now += dt
        return self._now

    def to_state(self) -> dict:
        return {"mode": self.mode, "now": self._now}

    def restore(self, state: dict) -> None:
        self.mode = state["mode"]
        self._now = float(state["now"])
        self._epoch = time.time() - self._now
