"""Injectable logical time source.

Nothing in the package reads a wall clock; every timestamp comes from a
caller-owned ``LogicalClock`` so that scenario runs replay bit-identically.
"""

from dataclasses import dataclass


@dataclass
class LogicalClock:
    now: int = 0

    def tick(self) -> int:
        """Advance the clock and return the new timestamp."""
        self.now += 1
        return self.now
