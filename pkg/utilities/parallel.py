"""
Process pool for independent solves (sweep rows, Jacobian columns).
"""
import concurrent.futures
import logging

from setup.config_conf import GPSCAV_THREADS

logger = logging.getLogger(__name__)


def resolve_threads(configured):
    """Worker count after applying the GPSCAV_THREADS override.

    Args:
        configured (int | None): Value of run.threads

    Returns:
        int: Number of workers, at least 1
    """
    threads = GPSCAV_THREADS if GPSCAV_THREADS is not None else configured
    return max(1, int(threads or 1))


def run_parallel(func, tasks, threads=1):
    """Apply ``func`` to every task, keeping task order in the result.

    Runs in-process when ``threads <= 1``. ``func`` and the tasks must be
    picklable otherwise.

    Args:
        func (callable): Top-level function of one argument
        tasks (list): Task arguments
        threads (int, optional): Worker count. Defaults to 1.

    Returns:
        list: ``[func(task) for task in tasks]``
    """
    tasks = list(tasks)
    if threads <= 1 or len(tasks) <= 1:
        return [func(task) for task in tasks]

    workers = min(threads, len(tasks))
    logger.debug(f"Dispatching {len(tasks)} tasks to {workers} worker processes")
    with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(func, tasks))
