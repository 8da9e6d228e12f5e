"""The episode loop: reset, alternate agent turns and tool dispatch,
enforce termination, record the trajectory.

Termination is task-shaped: a successful terminal tool ends the episode
immediately (remaining calls in the batch are dropped), an empty batch
ends it with the agent's final text, and the per-task turn cap forces an
exit.  One agent invocation counts as one turn.
"""

from __future__ import annotations

import base64
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Protocol

from . import imaging, tools
from .environment import Environment
from .episode import Episode
from .errors import AgentTransportError
from .tasks import TaskSpec, assemble_prompt
from .tools import TERMINAL_TOOLS, ToolSchema, visible_schemas
from .trajectory import ToolCallRecord, Trajectory, TurnRecord

IMAGE_PLACEHOLDER = "[image attached below]"


@dataclass
class AgentStep:
    text: str | None = None
    tool_calls: list[tuple[str, dict]] = field(default_factory=list)
    usage: dict | None = None


class Agent(Protocol):
    def step(self, messages: list[dict], schemas: list[ToolSchema]) -> AgentStep: ...


AgentFactory = Callable[[TaskSpec], Agent]


def _data_url(b64_png: str) -> dict:
    return {
        "type": "image_url",
        "image_url": {"url": f"data:image/png;base64,{b64_png}"},
    }


def build_initial_messages(task: TaskSpec, episode: Episode) -> list[dict]:
    messages: list[dict] = [
        {"role": "system", "content": assemble_prompt(task, episode.initial_snapshot)}
    ]
    if task.task_type == "vision_probe":
        pipeline = task.expected_outcome.get("probe_pipeline", "default")
        png, _dims = imaging.preprocess_frame(
            episode.env.store,
            task.initial_series_uid,
            task.initial_slice_index,
            pipeline,
        )
        messages.append(
            {
                "role": "user",
                "content": [
                    {"type": "text", "text": "The image for this task is attached."},
                    _data_url(base64.b64encode(png).decode("ascii")),
                ],
            }
        )
    else:
        messages.append({"role": "user", "content": "Begin the task now."})
    return messages


def _tool_result_messages(call_id: str, result: tools.ToolResult) -> list[dict]:
    """Tool result as its own message; images split into a user message so
    chat-completions endpoints can render them (and are never re-sent)."""
    payload = result.to_dict()
    extra: list[dict] = []
    if result.success and result.payload and "image" in result.payload:
        image_b64 = result.payload["image"]
        payload = {
            "success": True,
            "payload": {**result.payload, "image": IMAGE_PLACEHOLDER},
        }
        extra.append({"role": "user", "content": [_data_url(image_b64)]})
    return [
        {"role": "tool", "tool_call_id": call_id, "content": json.dumps(payload)}
    ] + extra


def run_episode(task: TaskSpec, agent: Agent, env: Environment) -> Trajectory:
    started = time.perf_counter()
    episode = Episode(task, env)
    messages = build_initial_messages(task, episode)
    schemas = visible_schemas(task.tool_set)
    trajectory = Trajectory(task_id=task.task_id)
    termination: str | None = None

    for turn_index in range(task.max_turns):
        try:
            step = agent.step(messages, schemas)
        except AgentTransportError as exc:
            trajectory.transport_error = str(exc)
            termination = "turn_cap"
            break
        turn = TurnRecord(turn_index=turn_index, text=step.text, usage=step.usage)
        trajectory.turns.append(turn)

        if not step.tool_calls:
            termination = "empty_batch_with_text"
            break

        messages.append(_assistant_message(step, turn_index))
        for call_index, (name, args) in enumerate(step.tool_calls):
            call_id = f"call_{turn_index}_{call_index}"
            t0 = time.perf_counter()
            result = tools.dispatch(episode, name, args)
            elapsed_ms = (time.perf_counter() - t0) * 1000.0
            turn.tool_calls.append(
                ToolCallRecord(
                    name=name,
                    args=args if isinstance(args, dict) else {"_raw": str(args)},
                    success=result.success,
                    error_code=None if result.success else result.error["code"],
                    duration_ms=elapsed_ms,
                )
            )
            messages.extend(_tool_result_messages(call_id, result))
            if name in TERMINAL_TOOLS and result.success:
                termination = "terminal_tool"
                break  # remaining calls in the batch are not dispatched
        if termination:
            break

    trajectory.termination = termination or "turn_cap"
    trajectory.deliverable = episode.deliverable()
    trajectory.final_viewport = episode.viewer.snapshot()
    trajectory.segmentations = episode.viewer.list_segmentations()
    trajectory.wall_clock_s = time.perf_counter() - started
    return trajectory


def _assistant_message(step: AgentStep, turn_index: int) -> dict:
    return {
        "role": "assistant",
        "content": step.text,
        "tool_calls": [
            {
                "id": f"call_{turn_index}_{i}",
                "type": "function",
                "function": {
                    "name": name,
                    "arguments": json.dumps(args) if isinstance(args, dict) else str(args),
                },
            }
            for i, (name, args) in enumerate(step.tool_calls)
        ],
    }


def run_suite(
    suite: list[TaskSpec],
    agent_factory: AgentFactory,
    env: Environment,
    parallelism: int = 1,
) -> list[Trajectory]:
    """Run every task; per-episode failures become aborted records, never
    suite failures.  Results are ordered like the input regardless of
    scheduling."""
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")

    def one(task: TaskSpec) -> Trajectory:
        try:
            return run_episode(task, agent_factory(task), env)
        except Exception as exc:  # noqa: BLE001 - isolation contract
            return Trajectory(
                task_id=task.task_id,
                termination="turn_cap",
                transport_error=f"episode aborted: {exc}",
            )

    if parallelism == 1:
        return [one(task) for task in suite]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, suite))
