# cltpc/inference/parallel.py
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Tuple, TypeVar

from ..config import BLOCK_ROWS

logger = logging.getLogger(__name__)

T = TypeVar("T")


def block_bounds(n_rows: int, block_rows: int = BLOCK_ROWS) -> List[Tuple[int, int]]:
    """Fixed row blocks; the partition depends only on n_rows and block_rows."""
    if block_rows < 1:
        raise ValueError(f"block_rows must be >= 1, got {block_rows}")
    return [(s, min(s + block_rows, n_rows)) for s in range(0, n_rows, block_rows)]


def map_blocks(fn: Callable[[int, int], T], n_rows: int, jobs: int = 1,
               block_rows: int = BLOCK_ROWS) -> List[T]:
    """
    Run fn(start, stop) over every block and return results in block order.
    Workers are threads: numpy releases the GIL inside the per-block kernels.
    """
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    bounds = block_bounds(n_rows, block_rows)
    logger.debug("%d rows -> %d blocks of <= %d rows, jobs=%d", n_rows, len(bounds), block_rows, jobs)
    if jobs == 1 or len(bounds) <= 1:
        return [fn(s, e) for s, e in bounds]
    with ThreadPoolExecutor(max_workers=min(jobs, len(bounds))) as ex:
        return list(ex.map(lambda b: fn(*b), bounds))
