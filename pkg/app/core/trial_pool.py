"""Parallel trial execution using a bounded ProcessPoolExecutor."""
from concurrent.futures import ProcessPoolExecutor, Future
import logging
from typing import Callable, Any, List, Sequence, Tuple

from app.core.config import settings

logger = logging.getLogger(__name__)


def run_trials(
    func: Callable[..., Any],
    arg_list: Sequence[Tuple[Any, ...]],
    jobs: int = None
) -> List[Any]:
    """
    Run one call of func per argument tuple and return results in submission order.

    Each trial owns its simulator and agent, so trials are independent and the
    merged output does not depend on completion order. jobs=1 runs inline.

    Args:
        func: Module-level (picklable) trial function
        arg_list: Positional arguments per trial
        jobs: Worker processes (default from FOGFORGE_JOBS / logical cores)

    Raises:
        Exception: The first trial failure, after every trial has finished
    """
    if jobs is None:
        jobs = settings.effective_jobs()
    jobs = max(1, min(jobs, len(arg_list) or 1))

    if jobs == 1:
        return [func(*args) for args in arg_list]

    logger.info(f"Running {len(arg_list)} trials on {jobs} worker processes")
    with ProcessPoolExecutor(max_workers=jobs) as executor:
        futures: List[Future] = [executor.submit(func, *args) for args in arg_list]

    results = []
    first_error = None
    for index, future in enumerate(futures):
        try:
            results.append(future.result())
        except Exception as e:
            logger.error(f"Trial {index} failed: {e}", exc_info=True)
            first_error = first_error or e
            results.append(None)
    if first_error is not None:
        raise first_error
    return results
