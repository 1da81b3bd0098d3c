from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

from .config import get_settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def resolve_workers(requested: int | None = None) -> int:
    """Number of worker processes: explicit request, capped by QKD_THREADS."""
    cap = get_settings().QKD_THREADS
    n = requested if requested is not None else (cap or os.cpu_count() or 1)
    if cap is not None:
        n = min(n, cap)
    return max(1, int(n))


def ordered_map(
    fn: Callable[[T], R], items: Iterable[T], *, workers: int | None = None
) -> list[R]:
    """Apply ``fn`` to every item; results come back in input order.

    ``fn`` and the items must be picklable when more than one worker is used.
    """
    tasks: Sequence[T] = list(items)
    n = min(resolve_workers(workers), len(tasks))
    if n <= 1:
        return [fn(t) for t in tasks]
    logger.debug("dispatching %d tasks to %d workers", len(tasks), n)
    with ProcessPoolExecutor(max_workers=n) as executor:
        return list(executor.map(fn, tasks))
