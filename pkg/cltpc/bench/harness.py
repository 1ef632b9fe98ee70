# cltpc/bench/harness.py
"""
Benchmark protocol: fit -> compile -> EVI -> MAR -> MPE -> conditional sampling,
each timed over R independent runs on the training split. Masks are drawn once
per (seed, run) and shared by every masked query of that run.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config import (
    DEFAULT_ALPHA, DEFAULT_JOBS, DEFAULT_MASK_P, DEFAULT_PRECISION, DEFAULT_ROOT,
    DEFAULT_RUNS, DEFAULT_SEED, resolve_dtype,
)
from ..data.bitmatrix import BitMatrix, MaskSpec, gen_mask
from ..inference.engine import pc_conditional_sample, pc_evi, pc_mar, pc_mpe
from ..models.clt import SmoothingSpec, clt_evi, clt_mar, clt_mpe, fit_clt
from ..models.compile import compile_clt

logger = logging.getLogger(__name__)

ALGORITHMS = (
    "clt/chow-liu", "clt/evi", "clt/mar", "clt/mpe",
    "pc/compile", "pc/evi", "pc/mar", "pc/mpe", "pc/c-sampling",
)
REPORT_HEADER = ("dataset", "algorithm", "runs", "mean_s", "two_sigma_s", "mean_ll")
ABSENT = "---"


@dataclass(frozen=True)
class BenchConfig:
    runs: int = DEFAULT_RUNS
    jobs: int = DEFAULT_JOBS
    precision: int = DEFAULT_PRECISION
    mask_p: float = DEFAULT_MASK_P
    seed: int = DEFAULT_SEED
    alpha: float = DEFAULT_ALPHA
    root: int = DEFAULT_ROOT

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError(f"runs must be >= 1, got {self.runs}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {self.jobs}")
        resolve_dtype(self.precision)
        MaskSpec(self.mask_p, self.seed)
        SmoothingSpec(self.alpha)


@dataclass(frozen=True)
class BenchReport:
    dataset: str
    algorithm: str
    runs: int
    mean_seconds: float
    two_sigma_seconds: float
    mean_ll: Optional[float] = None

    def row(self) -> Tuple[str, ...]:
        ll = ABSENT if self.mean_ll is None else f"{self.mean_ll:.6f}"
        return (self.dataset, self.algorithm, str(self.runs),
                f"{self.mean_seconds:.6f}", f"{self.two_sigma_seconds:.6f}", ll)


def _timed(fn: Callable[[], object]) -> Tuple[object, float]:
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def _summarize(name: str, algorithm: str, seconds: List[float],
               lls: List[float] | None) -> BenchReport:
    t = np.asarray(seconds)
    mean_ll = None
    if lls is not None:
        mean_ll = float(np.mean(lls))
        if not np.isfinite(mean_ll):
            raise ValueError(f"{name}/{algorithm}: mean log-likelihood is not finite")
    report = BenchReport(dataset=name, algorithm=algorithm, runs=len(seconds),
                         mean_seconds=float(t.mean()), two_sigma_seconds=float(2.0 * t.std()),
                         mean_ll=mean_ll)
    logger.info("%s %s: %.3fs +- %.3f, mu_LL=%s", name, algorithm, report.mean_seconds,
                report.two_sigma_seconds, report.row()[-1])
    return report


def run_bench(name: str, data: BitMatrix, config: BenchConfig = BenchConfig()) -> List[BenchReport]:
    """One BenchReport per entry of ALGORITHMS, in that order."""
    seconds: Dict[str, List[float]] = {a: [] for a in ALGORITHMS}
    lls: Dict[str, List[float]] = {a: [] for a in ALGORITHMS}
    q = dict(jobs=config.jobs, precision=config.precision)

    for r in range(config.runs):
        clt, dt = _timed(lambda: fit_clt(data, config.alpha, config.root, jobs=config.jobs))
        seconds["clt/chow-liu"].append(dt)
        pc, dt = _timed(lambda: compile_clt(clt))
        seconds["pc/compile"].append(dt)

        # drawn outside the timed region, shared by MAR, MPE and sampling
        mask = gen_mask(data, MaskSpec(config.mask_p, config.seed + r))

        steps = (
            ("clt/evi", lambda: clt_evi(clt, data, **q)),
            ("clt/mar", lambda: clt_mar(clt, mask, **q)),
            ("clt/mpe", lambda: clt_mpe(clt, mask, **q).log_value),
            ("pc/evi", lambda: pc_evi(pc, data, **q)),
            ("pc/mar", lambda: pc_mar(pc, mask, **q)),
            ("pc/mpe", lambda: pc_mpe(pc, mask, **q).log_value),
            ("pc/c-sampling", lambda: pc_conditional_sample(pc, mask, config.seed + r, **q).log_value),
        )
        for algorithm, fn in steps:
            values, dt = _timed(fn)
            seconds[algorithm].append(dt)
            lls[algorithm].append(float(np.mean(values, dtype=np.float64)))
        logger.debug("%s: run %d/%d done", name, r + 1, config.runs)

    no_ll = {"clt/chow-liu", "pc/compile"}
    return [_summarize(name, a, seconds[a], None if a in no_ll else lls[a]) for a in ALGORITHMS]


def run_suite(datasets: Sequence[Tuple[str, BitMatrix]],
              config: BenchConfig = BenchConfig()) -> List[BenchReport]:
    reports: List[BenchReport] = []
    for name, data in datasets:
        reports.extend(run_bench(name, data, config))
    return reports


# ---------- output ----------

def write_report(path: str, reports: Sequence[BenchReport]) -> None:
    with open(path, "w") as f:
        f.write("\t".join(REPORT_HEADER) + "\n")
        for rep in reports:
            f.write("\t".join(rep.row()) + "\n")


def format_table(reports: Sequence[BenchReport]) -> str:
    header = ("Dataset", "Algorithm", "Runs", "Time (s)", "mu_LL")
    rows = [(r.dataset, r.algorithm, str(r.runs),
             f"{r.mean_seconds:.2f} +- {r.two_sigma_seconds:.2f}", r.row()[-1]) for r in reports]
    widths = [max(len(h), *(len(row[j]) for row in rows)) if rows else len(h)
              for j, h in enumerate(header)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in rows]
    return "\n".join(lines)
