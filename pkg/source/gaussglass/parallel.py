"""
Process-pool fan-out with ordered reduction.

Workers receive self-contained task tuples and return a result object carrying
the task index; results are always handed back sorted by index, so the number
of workers never changes what the caller computes.
"""

import logging
import multiprocessing
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from typing import Any, Callable, List, Optional, Sequence

logger = logging.getLogger(__name__)


@dataclass
class TaskResult:
    """Outcome of one task; ``error`` is set instead of ``value`` on failure."""
    index: int
    value: Any = None
    error: Optional[str] = None
    error_type: Optional[str] = None


def resolve_workers(workers: Optional[int]) -> int:
    if workers:
        return workers
    return max(1, multiprocessing.cpu_count() - 1)


def run_tasks(
    worker: Callable[[Any], TaskResult],
    items: Sequence[Any],
    workers: Optional[int] = None,
) -> List[TaskResult]:
    """
    Apply ``worker`` to every item and return the results ordered by task index.

    Args:
        worker: Module-level function (picklable) returning a TaskResult
        items: Task tuples, each starting with its index
        workers: Process count; None means hardware parallelism, 1 runs inline

    Returns:
        List of TaskResult sorted by index
    """
    num_workers = min(resolve_workers(workers), len(items)) if items else 1
    if num_workers <= 1:
        results = [worker(item) for item in items]
    else:
        logger.debug(f"Dispatching {len(items)} tasks to {num_workers} workers")
        results = []
        with ProcessPoolExecutor(max_workers=num_workers) as executor:
            futures = {executor.submit(worker, item): item for item in items}
            for future in as_completed(futures):
                results.append(future.result())

    results.sort(key=lambda r: r.index)
    for result in results:
        if result.error:
            logger.debug(f"Task {result.index} failed: {result.error_type}: {result.error}")
    return results
