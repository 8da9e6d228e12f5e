"""Episode trajectory records and their JSON-lines serialization.

One file per episode: one line per turn, then a footer line with the
termination reason, deliverable, and final viewer state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

TERMINATIONS = ("terminal_tool", "empty_batch_with_text", "turn_cap")


@dataclass
class ToolCallRecord:
    name: str
    args: dict
    success: bool
    error_code: str | None = None
    duration_ms: float = 0.0

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "args": self.args,
            "success": self.success,
            "error_code": self.error_code,
            "duration_ms": self.duration_ms,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ToolCallRecord":
        return cls(
            name=data["name"],
            args=data.get("args", {}),
            success=data["success"],
            error_code=data.get("error_code"),
            duration_ms=data.get("duration_ms", 0.0),
        )


@dataclass
class TurnRecord:
    turn_index: int
    text: str | None = None
    tool_calls: list[ToolCallRecord] = field(default_factory=list)
    usage: dict | None = None

    def to_dict(self) -> dict:
        return {
            "kind": "turn",
            "turn_index": self.turn_index,
            "text": self.text,
            "tool_calls": [c.to_dict() for c in self.tool_calls],
            "usage": self.usage,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TurnRecord":
        return cls(
            turn_index=data["turn_index"],
            text=data.get("text"),
            tool_calls=[ToolCallRecord.from_dict(c) for c in data.get("tool_calls", [])],
            usage=data.get("usage"),
        )


@dataclass
class Trajectory:
    task_id: str
    turns: list[TurnRecord] = field(default_factory=list)
    termination: str = "turn_cap"
    deliverable: dict | None = None
    final_viewport: dict | None = None
    segmentations: list[dict] = field(default_factory=list)
    wall_clock_s: float = 0.0
    transport_error: str | None = None

    @property
    def tool_names(self) -> list[str]:
        return [c.name for turn in self.turns for c in turn.tool_calls]

    @property
    def calls(self) -> list[ToolCallRecord]:
        return [c for turn in self.turns for c in turn.tool_calls]

    def footer_dict(self) -> dict:
        return {
            "kind": "final",
            "task_id": self.task_id,
            "termination": self.termination,
            "deliverable": self.deliverable,
            "final_viewport": self.final_viewport,
            "segmentations": self.segmentations,
            "wall_clock_s": self.wall_clock_s,
            "transport_error": self.transport_error,
        }


def write_trajectory(trajectory: Trajectory, path) -> None:
    lines = [json.dumps(t.to_dict(), sort_keys=True) for t in trajectory.turns]
    lines.append(json.dumps(trajectory.footer_dict(), sort_keys=True))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trajectory(path) -> Trajectory:
    turns: list[TurnRecord] = []
    footer: dict | None = None
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        data = json.loads(line)
        if data.get("kind") == "turn":
            turns.append(TurnRecord.from_dict(data))
        elif data.get("kind") == "final":
            footer = data
    if footer is None:
        raise ValueError(f"trajectory {path} has no footer record")
    return Trajectory(
        task_id=footer["task_id"],
        turns=turns,
        termination=footer["termination"],
        deliverable=footer.get("deliverable"),
        final_viewport=footer.get("final_viewport"),
        segmentations=footer.get("segmentations", []),
        wall_clock_s=footer.get("wall_clock_s", 0.0),
        transport_error=footer.get("transport_error"),
    )
