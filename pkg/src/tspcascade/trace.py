"""Time-stamped best-length events recorded during a solve."""
from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class TraceEvent:
    t: float
    length: int
    phase: str = "ls"


@dataclass
class ConvergenceTrace:
    """Strictly improving (time, best length) events plus the total runtime."""

    events: list[TraceEvent] = field(default_factory=list)
    t_end: float = 0.0

    def record(self, t: float, length: int, phase: str = "ls") -> bool:
        """Append an event if it strictly improves on the last one."""
        if self.events and length >= self.events[-1].length:
            self.t_end = max(self.t_end, t)
            return False
        if self.events and t <= self.events[-1].t:
            t = self.events[-1].t + 1e-9  # keep times strictly increasing
        self.events.append(TraceEvent(t=t, length=int(length), phase=phase))
        self.t_end = max(self.t_end, t)
        return True

    def best_length(self) -> int | None:
        return self.events[-1].length if self.events else None

    def extend(self, other: "ConvergenceTrace", offset: float = 0.0) -> None:
        for ev in other.events:
            self.record(ev.t + offset, ev.length, phase=ev.phase)
        self.t_end = max(self.t_end, other.t_end + offset)

    def to_jsonl(self) -> str:
        return "\n".join(
            json.dumps({"t": ev.t, "len": ev.length, "phase": ev.phase})
            for ev in self.events
        ) + ("\n" if self.events else "")

    @classmethod
    def from_jsonl(cls, text: str) -> "ConvergenceTrace":
        trace = cls()
        for line in text.splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            trace.record(float(obj["t"]), int(obj["len"]), phase=obj.get("phase", "ls"))
        return trace
