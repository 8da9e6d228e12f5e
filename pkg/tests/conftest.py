from __future__ import annotations

import pytest

from radbench import phantom, tasks
from radbench.environment import load_environment

ARCHIVE_SEED = 7
SUITE_SEED = 7


@pytest.fixture(scope="session")
def archive_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("archive")
    phantom.generate_archive(ARCHIVE_SEED, path)
    return path


@pytest.fixture(scope="session")
def env(archive_dir):
    return load_environment(archive_dir)


@pytest.fixture(scope="session")
def suite(env):
    return tasks.generate_suite(env, SUITE_SEED)


@pytest.fixture(scope="session")
def tasks_by_type(suite):
    grouped: dict[str, list] = {}
    for task in suite:
        grouped.setdefault(task.task_type, []).append(task)
    return grouped
