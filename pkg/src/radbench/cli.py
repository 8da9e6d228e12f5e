"""Command-line entry point: phantom/tasks generation, serving, suite runs,
scoring, reporting, and a human-playable REPL."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import phantom, scoring, tasks, tools
from .agents import oracle_policy, random_policy
from .environment import load_environment
from .episode import Episode
from .llm import EndpointConfig, ExternalAgent
from .runner import run_suite
from .trajectory import (
    ToolCallRecord,
    Trajectory,
    TurnRecord,
    read_trajectory,
    write_trajectory,
)


@click.group()
def main() -> None:
    """Simulated radiology workstation benchmark."""


@main.group("phantom")
def phantom_group() -> None:
    """Synthetic study archives."""


@phantom_group.command("gen")
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def phantom_gen(seed: int, out_dir: str) -> None:
    """Generate the stock archive (CT, breast MR, longitudinal pairs)."""
    count = phantom.generate_archive(seed, out_dir)
    click.echo(f"wrote {count} instances to {out_dir}")


@main.group("tasks")
def tasks_group() -> None:
    """Benchmark task suites."""


@tasks_group.command("gen")
@click.option("--archive", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--per-type", type=int, default=10, show_default=True)
def tasks_gen(archive: str, out_dir: str, seed: int, per_type: int) -> None:
    """Generate a deterministic task suite over an archive."""
    env = load_environment(archive)
    suite = tasks.generate_suite(env, seed, per_type=per_type)
    manifest = tasks.write_suite(suite, out_dir, seed=seed)
    click.echo(f"wrote {len(suite)} tasks; manifest {manifest}")


@main.command("serve")
@click.option("--archive", required=True, type=click.Path(exists=True))
@click.option("--suite", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8642, show_default=True)
def serve(archive: str, suite: str, host: str, port: int) -> None:
    """Serve the HTTP tool bridge."""
    import uvicorn

    from .server import create_app

    env = load_environment(archive)
    app = create_app(env, tasks.load_suite(suite))
    uvicorn.run(app, host=host, port=port, log_level="warning")


def _agent_factory(kind: str, seed: int, env, endpoint: EndpointConfig | None):
    if kind == "oracle":
        return lambda task: oracle_policy(task, env)
    if kind == "random":
        return lambda task: random_policy(task, seed)
    if endpoint is None:
        raise click.UsageError("--endpoint and --model are required for external agents")
    return lambda task: ExternalAgent(endpoint)


@main.command("run")
@click.option("--archive", required=True, type=click.Path(exists=True))
@click.option("--suite", "suite_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option(
    "--agent",
    "agent_kind",
    type=click.Choice(["oracle", "random", "external"]),
    default="oracle",
    show_default=True,
)
@click.option("--endpoint", default=None, help="chat-completions base URL")
@click.option("--model", default=None)
@click.option("--api-key-env", default="RADBENCH_API_KEY", show_default=True)
@click.option("--temperature", type=float, default=0.0, show_default=True)
@click.option("--max-output-tokens", type=int, default=20048, show_default=True)
@click.option("--parallelism", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def run_command(
    archive: str,
    suite_path: str,
    out_dir: str,
    agent_kind: str,
    endpoint: str | None,
    model: str | None,
    api_key_env: str,
    temperature: float,
    max_output_tokens: int,
    parallelism: int,
    seed: int,
) -> None:
    """Run a suite and write one trajectory JSONL per episode."""
    env = load_environment(archive)
    suite = tasks.load_suite(suite_path)
    config = None
    if agent_kind == "external":
        if not endpoint or not model:
            raise click.UsageError("--endpoint and --model are required")
        config = EndpointConfig(
            base_url=endpoint,
            model=model,
            api_key_env=api_key_env,
            temperature=temperature,
            max_output_tokens=max_output_tokens,
        )
    factory = _agent_factory(agent_kind, seed, env, config)
    trajectories = run_suite(suite, factory, env, parallelism=parallelism)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for trajectory in trajectories:
        write_trajectory(trajectory, out / f"{trajectory.task_id}.jsonl")
    click.echo(f"wrote {len(trajectories)} trajectories to {out_dir}")


@main.command("score")
@click.option("--archive", required=True, type=click.Path(exists=True))
@click.option("--suite", "suite_path", required=True, type=click.Path(exists=True))
@click.option("--trajectories", "trajectory_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
def score_command(
    archive: str, suite_path: str, trajectory_dir: str, out_dir: str
) -> None:
    """Score trajectories into scores.csv and report.txt."""
    registry = phantom.load_ground_truth(archive)
    suite = tasks.load_suite(suite_path)
    cards = []
    for task in suite:
        path = Path(trajectory_dir) / f"{task.task_id}.jsonl"
        trajectory = read_trajectory(path)
        truth = registry.get(task.study_uid)
        cards.append(scoring.score_trajectory(task, trajectory, truth))
    csv_text, report_text = scoring.composite_and_report(cards, suite)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "scores.csv").write_text(csv_text)
    (out / "report.txt").write_text(report_text)
    click.echo(report_text)


@main.command("report")
@click.option("--scores", "scores_path", required=True, type=click.Path(exists=True))
def report_command(scores_path: str) -> None:
    """Pretty-print an existing scores.csv."""
    lines = Path(scores_path).read_text().strip().splitlines()
    header = lines[0].split(",")
    widths = [max(len(header[i]), 10) for i in range(len(header))]
    for line in lines:
        cells = line.split(",")
        click.echo("  ".join(c.ljust(widths[i]) for i, c in enumerate(cells)))


@main.command("repl")
@click.option("--archive", required=True, type=click.Path(exists=True))
@click.option("--suite", "suite_path", required=True, type=click.Path(exists=True))
@click.option("--task", "task_id", required=True)
@click.option("--log", "log_path", default=None, type=click.Path())
def repl_command(archive: str, suite_path: str, task_id: str, log_path: str | None) -> None:
    """Drive one episode by hand.

    Type ``tool_name {"arg": value}`` per line; an empty line or ``quit``
    ends the episode.  The trajectory is logged in the standard format so
    human sessions can seed future reference trajectories.
    """
    env = load_environment(archive)
    suite = {t.task_id: t for t in tasks.load_suite(suite_path)}
    if task_id not in suite:
        raise click.UsageError(f"unknown task {task_id!r}")
    task = suite[task_id]
    episode = Episode(task, env)
    trajectory = Trajectory(task_id=task_id)
    click.echo(tasks.assemble_prompt(task, episode.initial_snapshot))
    click.echo("\navailable tools: " + ", ".join(s.name for s in tools.visible_schemas(task.tool_set)))

    turn_index = 0
    termination = "empty_batch_with_text"
    while turn_index < task.max_turns:
        try:
            line = click.prompt("tool", default="", show_default=False).strip()
        except (EOFError, click.Abort):
            line = ""
        if not line or line in ("quit", "exit"):
            break
        name, _, rest = line.partition(" ")
        try:
            args = json.loads(rest) if rest.strip() else {}
        except json.JSONDecodeError as exc:
            click.echo(f"bad JSON args: {exc}")
            continue
        result = tools.dispatch(episode, name, args)
        record = ToolCallRecord(
            name=name,
            args=args if isinstance(args, dict) else {"_raw": str(args)},
            success=result.success,
            error_code=None if result.success else result.error["code"],
        )
        trajectory.turns.append(TurnRecord(turn_index=turn_index, tool_calls=[record]))
        turn_index += 1
        shown = result.to_dict()
        payload = shown.get("payload")
        if isinstance(payload, dict) and "image" in payload:
            payload = dict(payload)
            payload["image"] = f"[png {payload.get('width')}x{payload.get('height')}]"
            shown["payload"] = payload
        click.echo(json.dumps(shown, indent=2))
        if name in tools.TERMINAL_TOOLS and result.success:
            termination = "terminal_tool"
            break
    else:
        termination = "turn_cap"

    trajectory.termination = termination
    trajectory.deliverable = episode.deliverable()
    trajectory.final_viewport = episode.viewer.snapshot()
    trajectory.segmentations = episode.viewer.list_segmentations()
    if log_path:
        write_trajectory(trajectory, log_path)
        click.echo(f"trajectory logged to {log_path}")


if __name__ == "__main__":
    sys.exit(main())
