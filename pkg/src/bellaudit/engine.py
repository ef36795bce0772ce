"""Randomized-setting trial protocol.

Each trial draws two fair coins for the settings, lets the model's source
emit a hidden state, and records what the two wings observe. Only the
conspiracy class gets to see the settings before its source is sampled;
for every other model the hidden state is fixed without access to them.

Two execution modes exist. ``parallel`` treats trials as independent
laboratories: any trial can be computed by any worker, and the log is
merged by index. ``sequential`` runs trials in strict order and hands each
one the history of all earlier trials.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Literal, Sequence

import numpy as np

from bellaudit import rng
from bellaudit.errors import ConfigError, ContractError
from bellaudit.models import (
    ConspiracyModel,
    HiddenVariableModel,
    ModelClass,
    ModelDescriptor,
    SettingTable,
    build_model,
    select_batch,
)
from bellaudit.outcomes import Quadruple, select_actual

Mode = Literal["parallel", "sequential"]
MODES = ("parallel", "sequential")
WORKERS_ENV = "BELLAUDIT_WORKERS"
CHUNK = 1 << 17


@dataclass(frozen=True)
class TrialRecord:
    index: int
    a: int
    b: int
    x: int
    y: int
    revealed: Quadruple | None = None
    mode: Mode = "parallel"

    def __post_init__(self):
        if self.revealed is not None and (self.x, self.y) != select_actual(self.revealed, self.a, self.b):
            raise ContractError(f"trial {self.index}: outcomes disagree with the revealed quadruple")


@dataclass
class ExperimentConfig:
    model: ModelDescriptor
    table: SettingTable = field(default_factory=SettingTable.default)
    trials: int = 1000
    seed: int = 0
    mode: Mode = "parallel"
    reveal_hidden: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ContractError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.trials < 0:
            raise ContractError("trials must be nonnegative")

    def reveals(self) -> bool:
        """Whether records carry quadruples; only local and conspiracy models have them."""
        return self.reveal_hidden and self.model.model_class in (ModelClass.LOCAL_REALISTIC, ModelClass.CONSPIRACY)

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "table": self.table.to_dict(),
            "trials": self.trials,
            "seed": self.seed,
            "mode": self.mode,
            "reveal_hidden": self.reveal_hidden,
        }


@dataclass
class TrialLog:
    """Column-oriented trial log; iterating yields :class:`TrialRecord` objects."""

    index: np.ndarray
    a: np.ndarray
    b: np.ndarray
    x: np.ndarray
    y: np.ndarray
    revealed: np.ndarray | None = None
    mode: Mode = "parallel"

    def __len__(self):
        return int(self.index.shape[0])

    def __iter__(self) -> Iterator[TrialRecord]:
        for t in range(len(self)):
            yield self.record(t)

    def record(self, t: int) -> TrialRecord:
        rev = None if self.revealed is None else Quadruple(*(int(v) for v in self.revealed[t]))
        return TrialRecord(
            int(self.index[t]), int(self.a[t]), int(self.b[t]), int(self.x[t]), int(self.y[t]), rev, self.mode
        )

    @classmethod
    def empty(cls, mode: Mode = "parallel", revealed: bool = False) -> TrialLog:
        z = np.zeros(0, dtype=np.int8)
        return cls(np.zeros(0, dtype=np.int64), z, z.copy(), z.copy(), z.copy(),
                   np.zeros((0, 4), dtype=np.int8) if revealed else None, mode)

    @classmethod
    def from_records(cls, records: Sequence[TrialRecord], mode: Mode | None = None) -> TrialLog:
        if not records:
            return cls.empty(mode or "parallel")
        has_rev = [r.revealed is not None for r in records]
        if any(has_rev) and not all(has_rev):
            raise ContractError("either every record or no record may carry a revealed quadruple")
        col = lambda name: np.array([getattr(r, name) for r in records], dtype=np.int8)  # noqa: E731
        return cls(
            np.array([r.index for r in records], dtype=np.int64),
            col("a"), col("b"), col("x"), col("y"),
            np.array([tuple(r.revealed) for r in records], dtype=np.int8) if all(has_rev) else None,
            mode or records[0].mode,
        )

    @classmethod
    def concat(cls, parts: Sequence[TrialLog]) -> TrialLog:
        if not parts:
            return cls.empty()
        rev = None if parts[0].revealed is None else np.concatenate([p.revealed for p in parts])
        return cls(*(np.concatenate([getattr(p, k) for p in parts]) for k in ("index", "a", "b", "x", "y")),
                   rev, parts[0].mode)

    def equals(self, other: TrialLog) -> bool:
        same_rev = (self.revealed is None and other.revealed is None) or (
            self.revealed is not None and other.revealed is not None
            and np.array_equal(self.revealed, other.revealed)
        )
        return same_rev and all(
            np.array_equal(getattr(self, k), getattr(other, k)) for k in ("index", "a", "b", "x", "y")
        )


def draw_settings(stream: rng.TrialStream) -> tuple[int, int]:
    """Two independent fair coins, one per wing."""
    return 1 + stream.bit(rng.SETTINGS, 0), 1 + stream.bit(rng.SETTINGS, 1)


def draw_settings_batch(seed: int, start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
    words = rng.trial_words(seed, rng.SETTINGS, start, stop)
    bits = rng.to_bit(words[:, :2])
    return (1 + bits[:, 0]).astype(np.int8), (1 + bits[:, 1]).astype(np.int8)


def _check_mode(model: HiddenVariableModel, mode: str):
    if model.uses_history and mode == "parallel":
        raise ContractError(
            f"model {model.name!r} depends on trial history and requires mode='sequential' "
            "(parallel laboratories share no history)"
        )


def run_trial(config: ExperimentConfig, model: HiddenVariableModel, index: int,
              stream: rng.TrialStream, history: Sequence[TrialRecord] = ()) -> TrialRecord:
    """Run one trial through the per-trial model contract."""
    _check_mode(model, config.mode)
    if config.mode == "parallel" and history:
        raise ContractError("parallel-mode trials receive no history")
    table = config.table
    if isinstance(model, ConspiracyModel):
        a, b = draw_settings(stream)
        state = model.sample_source_with_settings(stream, history, a, b, table)
    else:
        state = model.sample_source(stream, history, table)
        a, b = draw_settings(stream)
    if model.is_local:
        x = model.measure("left", a, table, state)
        y = model.measure("right", b, table, state)
    else:
        x, y = model.measure_joint(a, b, table, state, stream)
    revealed = state.revealed if config.reveals() else None
    return TrialRecord(index, a, b, x, y, revealed, config.mode)


def run_reference(config: ExperimentConfig) -> TrialLog:
    """Trial-by-trial execution through :func:`run_trial`.

    Slow; it is the contract-level path that the vectorized
    :func:`run_experiment` is checked against.
    """
    model = build_model(config.model)
    records: list[TrialRecord] = []
    for t in range(config.trials):
        history = records if config.mode == "sequential" else ()
        records.append(run_trial(config, model, t, rng.TrialStream(config.seed, t), history))
    return TrialLog.from_records(records, config.mode) if records else TrialLog.empty(config.mode, config.reveals())


def _run_chunk(config: ExperimentConfig, model: HiddenVariableModel, start: int, stop: int) -> TrialLog:
    seed, table = config.seed, config.table
    if isinstance(model, ConspiracyModel):
        a, b = draw_settings_batch(seed, start, stop)
        state = model.sample_batch_with_settings(seed, start, stop, table, a, b)
    else:
        state = model.sample_batch(seed, start, stop, table)
        a, b = draw_settings_batch(seed, start, stop)
    x, y = model.measure_batch(a, b, table, state, seed, start, stop)
    if state.revealed is not None:
        rx, ry = select_batch(state.revealed, a, b)
        if not (np.array_equal(rx, x) and np.array_equal(ry, y)):
            raise ContractError(f"model {model.name!r} outcomes disagree with its revealed quadruples")
    revealed = state.revealed if config.reveals() else None
    return TrialLog(np.arange(start, stop, dtype=np.int64), a, b, x, y, revealed, config.mode)


def default_workers() -> int:
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            n = 0
        if n < 1:
            raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {env!r}")
        return n
    return os.cpu_count() or 1


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> TrialLog:
    """Run ``config.trials`` trials and return the merged log.

    Worker count only changes scheduling; the log is identical for any value.
    """
    model = build_model(config.model)
    _check_mode(model, config.mode)
    n = config.trials
    if n == 0:
        return TrialLog.empty(config.mode, config.reveals())
    if model.uses_history:
        a, b = draw_settings_batch(config.seed, 0, n)
        x, y, revealed = model.run_sequential(config.seed, a, b)
        return TrialLog(np.arange(n, dtype=np.int64), a, b, x, y,
                        revealed if config.reveals() else None, config.mode)
    # memoryless models ignore history, so sequential mode reduces to the same per-index computation
    workers = workers or default_workers()
    size = min(CHUNK, -(-n // workers))
    bounds = [(s, min(s + size, n)) for s in range(0, n, size)]
    if workers == 1 or len(bounds) == 1:
        parts = [_run_chunk(config, model, s, e) for s, e in bounds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda se: _run_chunk(config, model, *se), bounds))
    return TrialLog.concat(parts)
