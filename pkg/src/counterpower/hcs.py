"""Hardware counter selection by partition-averaged random-forest importance."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .core import Dataset, fit_normalization
from .forest import train_forest


@dataclass(frozen=True)
class HcsConfig:
    n_select: int = 6
    ntree: int = 16
    m_partitions: int = 4
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("n_select", "ntree", "m_partitions"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple[str, ...]
    names: tuple[str, ...]
    avg_importance: np.ndarray = field(repr=False)
    per_partition_importance: np.ndarray = field(repr=False)
    config: Optional[HcsConfig] = None

    def ranking(self) -> list[tuple[str, float]]:
        """All counters, most important first (ties by name)."""
        order = rank_counters(self.names, self.avg_importance)
        return [(self.names[j], float(self.avg_importance[j])) for j in order]

    def __eq__(self, other):
        if not isinstance(other, SelectionResult):
            return NotImplemented
        return (self.selected == other.selected and self.names == other.names
                and np.array_equal(self.avg_importance, other.avg_importance)
                and np.array_equal(self.per_partition_importance,
                                   other.per_partition_importance))


def rank_counters(names, importance) -> list[int]:
    return sorted(range(len(names)), key=lambda j: (-importance[j], names[j]))


def partition_bounds(n_vectors: int, m: int) -> list[tuple[int, int]]:
    """Contiguous blocks of ``n_vectors // m``; the last block takes the remainder."""
    size = n_vectors // m
    return [(i * size, n_vectors if i == m - 1 else (i + 1) * size) for i in range(m)]


def partition_seed(rng_seed: int, i: int) -> int:
    return int(np.random.SeedSequence([rng_seed, i]).generate_state(1)[0])


def select_counters(all_vectors: Dataset, cfg: HcsConfig) -> SelectionResult:
    """Pick the ``cfg.n_select`` counters most relevant to power.

    The trace is split into ``cfg.m_partitions`` contiguous blocks.  Each block
    gets its own normalization and forest; the forests' importances (each
    summing to 1) are averaged and the top counters returned.
    """
    names = all_vectors.schema.names
    if cfg.n_select > len(names):
        raise ValueError(
            f"cannot select {cfg.n_select} counters from a schema of {len(names)}")
    if len(all_vectors) < 2 * cfg.m_partitions:
        raise ValueError(
            f"need at least {2 * cfg.m_partitions} vectors for {cfg.m_partitions} "
            f"partitions, got {len(all_vectors)}")
    if all_vectors.norm is not None:
        raise ValueError("select_counters expects raw counts")

    per_partition = np.zeros((cfg.m_partitions, len(names)))
    for i, (lo, hi) in enumerate(partition_bounds(len(all_vectors), cfg.m_partitions)):
        part = all_vectors.subset(np.arange(lo, hi))
        part = part.normalized(fit_normalization(part))
        forest = train_forest(part, cfg.ntree, partition_seed(cfg.rng_seed, i))
        per_partition[i] = forest.importance
    avg = per_partition.mean(axis=0)
    order = rank_counters(names, avg)
    selected = tuple(names[j] for j in order[:cfg.n_select])
    per_partition.setflags(write=False)
    avg.setflags(write=False)
    return SelectionResult(selected, names, avg, per_partition, cfg)


@dataclass(frozen=True)
class StabilityReport:
    results: dict
    stable_from: int

    @property
    def ntrees(self) -> list[int]:
        return sorted(self.results)

    @property
    def is_stable(self) -> bool:
        """True when every ntree in the sweep picked the same set."""
        return self.stable_from == self.ntrees[0]


def selection_stability(all_vectors: Dataset, cfg_range: Iterable[int],
                        cfg: Optional[HcsConfig] = None) -> StabilityReport:
    """Run selection for each ntree and find where the selected set settles.

    ``stable_from`` is the smallest ntree from which every larger ntree in the
    sweep selects the same set as the largest one.
    """
    base = cfg or HcsConfig()
    ntrees = sorted(set(int(t) for t in cfg_range))
    if not ntrees:
        raise ValueError("empty ntree sweep")
    results = {}
    for t in ntrees:
        results[t] = select_counters(
            all_vectors, HcsConfig(base.n_select, t, base.m_partitions, base.rng_seed))
    final = set(results[ntrees[-1]].selected)
    stable_from = ntrees[-1]
    for t in reversed(ntrees):
        if set(results[t].selected) != final:
            break
        stable_from = t
    return StabilityReport(results, stable_from)
