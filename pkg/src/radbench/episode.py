"""Per-episode state: the viewer session plus the accumulated deliverable."""

from __future__ import annotations

from dataclasses import dataclass, field

from .environment import Environment
from .viewer import ViewerSession


@dataclass
class Episode:
    """One live episode.  Mutated by exactly one tool call at a time."""

    task: "TaskSpec"  # noqa: F821 - tasks imports this module
    env: Environment
    viewer: ViewerSession = field(init=False)
    initial_snapshot: dict = field(init=False)
    submitted_answer: str | None = None
    submitted_report: dict | None = None
    longitudinal_findings: list[dict] = field(default_factory=list)
    longitudinal_summary: str | None = None
    longitudinal_complete: bool = False

    def __post_init__(self) -> None:
        self.viewer = ViewerSession.reset(self.task, self.env.store)
        self.initial_snapshot = self.viewer.snapshot()

    def deliverable(self) -> dict | None:
        """Present iff a terminal tool fired (longitudinal: the completion
        signal); findings without completion do not count."""
        if self.submitted_answer is not None:
            return {"answer": self.submitted_answer}
        if self.submitted_report is not None:
            return {"birads_report": self.submitted_report}
        if self.longitudinal_complete:
            return {
                "longitudinal_findings": list(self.longitudinal_findings),
                "summary": self.longitudinal_summary,
            }
        return None
