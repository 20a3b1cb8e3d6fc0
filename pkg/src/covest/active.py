"""Batch active estimation: redesign the observation budget as data arrives.

Each iteration freezes the current design, draws one batch of masked samples
under it, folds the batch's unbiased estimate into the running average, and
re-solves the design from the running estimate's diagonal. The first design
is uniform. Because every batch is unbiased conditionally on its (data-
dependent) design, the merged estimate stays unbiased at every iteration.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .design import update_design
from .estimator import CovarianceEstimate, estimate_cov, merge_estimates, relative_frobenius_error
from .sampling import MaskDistribution, child_rng, mask_batch

__all__ = ["ActiveConfig", "IterationRecord", "ActiveTrace", "run_active", "run_fixed"]


@dataclass(frozen=True)
class ActiveConfig:
    """Loop parameters: budget m, batch size B, iteration count N."""

    budget: float
    batch_size: int
    iterations: int
    eps: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.budget <= 0:
            raise ValueError("budget must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be a positive integer")
        if self.iterations < 1:
            raise ValueError("iterations must be a positive integer")
        if not 0 <= self.eps <= 1:
            raise ValueError("eps must lie in [0, 1]")


@dataclass(frozen=True)
class IterationRecord:
    """What one iteration saw and produced."""

    iteration: int
    design: np.ndarray
    batch_estimate: CovarianceEstimate | None
    merged: CovarianceEstimate | None
    rel_error: float | None
    observed_count: int
    sample_count: int


@dataclass
class ActiveTrace:
    """Per-iteration records plus the design the loop would use next."""

    records: list = field(default_factory=list)
    final_design: np.ndarray | None = None
    final_estimate: CovarianceEstimate | None = None

    def errors(self) -> np.ndarray:
        """Relative errors by iteration (NaN where no truth was supplied)."""
        return np.array([np.nan if r.rel_error is None else r.rel_error for r in self.records])

    def sample_counts(self) -> np.ndarray:
        return np.array([r.sample_count for r in self.records])

    def designs(self) -> np.ndarray:
        return np.stack([r.design for r in self.records])

    def __len__(self) -> int:
        return len(self.records)


def _check_budget(n: int, budget: float, eps: float) -> None:
    if budget > n * (1 + 1e-12):
        raise ValueError(f"budget {budget} exceeds dimension {n}")
    if budget < n * eps - 1e-12:
        raise ValueError(f"budget {budget} cannot cover floor {eps} in dimension {n}")


def _run_batches(oracle, p0: MaskDistribution, cfg: ActiveConfig, truth, adapt: bool,
                 record_matrices: bool = True) -> ActiveTrace:
    p = p0
    estimate = CovarianceEstimate.zero(p0.n)
    trace = ActiveTrace()
    for t in range(cfg.iterations):
        rng = child_rng(cfg.seed, t)
        batch = mask_batch(oracle.draw(cfg.batch_size), p, rng)
        batch_estimate = estimate_cov(batch, p)
        estimate = merge_estimates(estimate, batch_estimate)
        rel = relative_frobenius_error(estimate, truth) if truth is not None else None
        trace.records.append(
            IterationRecord(
                iteration=t,
                design=p.p,
                batch_estimate=batch_estimate if record_matrices else None,
                merged=estimate if record_matrices else None,
                rel_error=rel,
                observed_count=batch.observed_count,
                sample_count=estimate.sample_count,
            )
        )
        if adapt:
            p = update_design(estimate, cfg.budget, cfg.eps).p
    trace.final_design = p.p
    trace.final_estimate = estimate
    return trace


def run_active(oracle, cfg: ActiveConfig, truth: np.ndarray | None = None,
               record_matrices: bool = True) -> ActiveTrace:
    """Run the adaptive loop against a sample stream.

    oracle supplies raw vectors via draw(count) and a dim attribute; masks are
    drawn here from per-iteration child streams of cfg.seed, so equal
    (oracle stream, cfg) reproduce the trace exactly. truth, when given, is
    only scored against, never consumed by the loop. Set record_matrices=False
    to keep the trace light (designs and errors only) at large dimension.
    """
    n = oracle.dim
    _check_budget(n, cfg.budget, cfg.eps)
    p0 = MaskDistribution.uniform(n, cfg.budget)
    return _run_batches(oracle, p0, cfg, truth, adapt=True, record_matrices=record_matrices)


def run_fixed(oracle, p: MaskDistribution, total: int, truth: np.ndarray | None = None,
              batch_size: int | None = None, seed: int = 0,
              record_matrices: bool = True) -> ActiveTrace:
    """Estimate under a frozen design, checkpointed like the adaptive loop.

    total must split into equal batches of batch_size (default: one batch) so
    fixed and adaptive curves share their checkpoint grid. With the same seed
    and stream, this is bitwise identical to the adaptive loop whenever the
    adaptive design updates are no-ops (for example a full budget).
    """
    if oracle.dim != p.n:
        raise ValueError("oracle dimension does not match the design")
    batch_size = int(total) if batch_size is None else int(batch_size)
    if total < 1 or batch_size < 1 or total % batch_size != 0:
        raise ValueError("total must be a positive multiple of batch_size")
    cfg = ActiveConfig(
        budget=p.m, batch_size=batch_size, iterations=total // batch_size, seed=seed
    )
    return _run_batches(oracle, p, cfg, truth, adapt=False, record_matrices=record_matrices)
