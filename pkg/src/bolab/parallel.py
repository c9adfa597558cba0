"""Block partitioning of ensembles and the worker fan-out.

Ensembles are cut into blocks whose size depends only on the number of modes,
never on the worker count.  Workers take blocks round-robin; results are put
back in block order before any reduction, so every statistic is computed on
the same array in the same order whatever the fan-out.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field


def rows_per_block(n_modes: int) -> int:
    return max(64, min(8192, (1 << 20) // max(int(n_modes), 1)))


def blocks(total: int, rows: int) -> list[tuple[int, int]]:
    return [(start, min(rows, total - start)) for start in range(0, total, rows)]


@dataclass
class WorkerPool:
    """Thread fan-out with a merge barrier; records which worker took which block."""

    workers: int = 1
    assignments: list = field(default_factory=list)

    def __post_init__(self):
        if int(self.workers) < 1:
            raise ValueError("workers must be >= 1")
        self.workers = int(self.workers)

    def map_blocks(self, fn, parts, label="ensemble"):
        n = len(parts)
        width = max(1, min(self.workers, n))
        results = [None] * n

        def work(w):
            for b in range(w, n, width):
                results[b] = fn(*parts[b])

        if width == 1:
            work(0)
        else:
            with ThreadPoolExecutor(max_workers=width) as ex:
                list(ex.map(work, range(width)))
        for w in range(width):
            self.assignments.append({"stream": label, "worker": w, "blocks": list(range(w, n, width))})
        return results


def as_pool(workers) -> WorkerPool:
    if isinstance(workers, WorkerPool):
        return workers
    return WorkerPool(1 if workers is None else int(workers))
