"""HTTP bridge: episode sessions and tool dispatch over JSON.

Endpoints:
  POST /episodes                  {"task_id": ...} -> episode id + prompt
  POST /episodes/{id}/tools/{name}  body = tool args -> {success, payload|error}
  GET  /episodes/{id}/state       viewport snapshot + segmentations
  GET  /schemas/{task_type}       function-calling schemas for the type
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse

from . import tools
from .environment import Environment
from .episode import Episode
from .errors import UnknownTaskType
from .tasks import TaskSpec, assemble_prompt


@dataclass
class _Session:
    episode: Episode
    lock: threading.Lock = field(default_factory=threading.Lock)


def create_app(env: Environment, suite: list[TaskSpec]) -> FastAPI:
    app = FastAPI(title="radbench bridge")
    tasks_by_id = {task.task_id: task for task in suite}
    sessions: dict[str, _Session] = {}
    registry_lock = threading.Lock()

    @app.post("/episodes")
    def create_episode(body: dict):
        task_id = body.get("task_id")
        if task_id not in tasks_by_id:
            raise HTTPException(status_code=404, detail=f"unknown task {task_id!r}")
        task = tasks_by_id[task_id]
        episode = Episode(task, env)
        episode_id = uuid.uuid4().hex
        with registry_lock:
            sessions[episode_id] = _Session(episode)
        return {
            "episode_id": episode_id,
            "task_id": task_id,
            "prompt": assemble_prompt(task, episode.initial_snapshot),
            "viewer_state": episode.initial_snapshot,
            "max_turns": task.max_turns,
            "tool_set": task.tool_set,
        }

    def _session(episode_id: str) -> _Session:
        session = sessions.get(episode_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown episode")
        return session

    @app.post("/episodes/{episode_id}/tools/{name}")
    def call_tool(episode_id: str, name: str, body: dict | None = None):
        session = _session(episode_id)
        with session.lock:  # serialize calls within an episode
            result = tools.dispatch(session.episode, name, body or {})
        return JSONResponse(result.to_dict())

    @app.get("/episodes/{episode_id}/state")
    def episode_state(episode_id: str):
        session = _session(episode_id)
        with session.lock:
            episode = session.episode
            return {
                "task_id": episode.task.task_id,
                "viewport": episode.viewer.snapshot(),
                "segmentations": episode.viewer.list_segmentations(),
                "deliverable": episode.deliverable(),
            }

    @app.get("/schemas/{task_type}")
    def schemas(task_type: str):
        try:
            visible = tools.visible_schemas(task_type)
        except UnknownTaskType as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return {"task_type": task_type, "tools": [s.function_schema() for s in visible]}

    return app
