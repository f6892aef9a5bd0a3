"""Deterministic fan-out / fan-in execution of subdomain tasks.

Results are returned in task order, so reductions over them do not depend on
scheduling, and a run with eight workers is bitwise identical to a run with
one.  Every task is executed even if an earlier one fails; the error for the
smallest task index is the one raised, regardless of completion order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

__all__ = ["parallel_map", "resolve_workers"]


def resolve_workers(workers: int) -> int:
    """Map the configured worker count to an actual one (0 = auto)."""
    if workers < 0:
        raise ValueError("workers must be >= 0")
    if workers == 0:
        return os.cpu_count() or 1
    return workers


def parallel_map(fn, tasks, workers: int = 1) -> list:
    """Apply ``fn`` to every task, barrier, and return results in task order."""
    tasks = list(tasks)
    workers = resolve_workers(workers)
    results: list = [None] * len(tasks)
    errors: list = [None] * len(tasks)

    def run(i: int, task) -> None:
        try:
            results[i] = fn(task)
        except Exception as exc:  # noqa: BLE001 - reported to the caller below
            errors[i] = exc

    if workers == 1 or len(tasks) <= 1:
        for i, task in enumerate(tasks):
            run(i, task)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(run, i, task) for i, task in enumerate(tasks)]
            for fut in futures:
                fut.result()
    for err in errors:
        if err is not None:
            raise err
    return results
