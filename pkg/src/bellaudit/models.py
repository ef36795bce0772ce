"""Hidden-variable models driven by the trial engine.

Every model offers two interfaces that must agree bit for bit:

* the per-trial contract (``sample_source``, ``measure``, ``measure_joint``),
  which is what the theory talks about and what the reference engine uses;
* a vectorized batch path (``sample_batch`` / ``measure_batch``, or
  ``run_sequential`` for history-dependent models) used for large runs.

Both read their randomness from the same counter-based streams
(:mod:`bellaudit.rng`), so a trial's outcome does not depend on which path
produced it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, ClassVar, Sequence

import numba
import numpy as np

from bellaudit import rng
from bellaudit.errors import ConfigError, ContractError
from bellaudit.outcomes import Quadruple, check_setting

_NORM_TOL = 1e-12
_PLANES = {"xy": (0, 1), "xz": (0, 2), "yz": (1, 2)}


@dataclass(frozen=True)
class Direction:
    """A unit vector giving a polarizer orientation."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        norm2 = self.x * self.x + self.y * self.y + self.z * self.z
        if not abs(norm2 - 1.0) <= _NORM_TOL:
            raise ValueError(f"direction is not a unit vector: |d|^2 = {norm2!r}")

    @classmethod
    def normalized(cls, x: float, y: float, z: float) -> Direction:
        n = math.sqrt(x * x + y * y + z * z)
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return cls(x / n, y / n, z / n)

    @classmethod
    def from_angle(cls, degrees: float, plane: str = "xy") -> Direction:
        """Unit vector at ``degrees`` from the first axis of ``plane``, towards the second."""
        try:
            i, j = _PLANES[plane]
        except KeyError:
            raise ValueError(f"unknown plane {plane!r}; expected one of {sorted(_PLANES)}") from None
        theta = math.radians(degrees)
        comps = [0.0, 0.0, 0.0]
        comps[i] = math.cos(theta)
        comps[j] = math.sin(theta)
        return cls.normalized(*comps)

    def dot(self, other: Direction) -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)


@dataclass(frozen=True)
class SettingTable:
    """Maps the setting label in each wing to a measurement direction."""

    a1dir: Direction
    a2dir: Direction
    b1dir: Direction
    b2dir: Direction

    @classmethod
    def from_angles(cls, a1: float, a2: float, b1: float, b2: float, plane: str = "xy") -> SettingTable:
        return cls(*(Direction.from_angle(t, plane) for t in (a1, a2, b1, b2)))

    @classmethod
    def default(cls) -> SettingTable:
        """Coplanar 0 and 90 degrees on the left, 45 and 135 on the right."""
        return cls.from_angles(0.0, 90.0, 45.0, 135.0)

    def left(self, a: int) -> Direction:
        return self.a1dir if check_setting(a) == 1 else self.a2dir

    def right(self, b: int) -> Direction:
        return self.b1dir if check_setting(b) == 1 else self.b2dir

    def correlation(self, a: int, b: int) -> float:
        """Dot product of the selected left and right directions."""
        return self.left(a).dot(self.right(b))

    def left_matrix(self) -> np.ndarray:
        return np.array([self.a1dir.as_tuple(), self.a2dir.as_tuple()])

    def right_matrix(self) -> np.ndarray:
        return np.array([self.b1dir.as_tuple(), self.b2dir.as_tuple()])

    def dot_matrix(self) -> np.ndarray:
        """``c[a-1, b-1]`` for all four setting pairs, computed like :meth:`correlation`."""
        return np.array([[self.correlation(a, b) for b in (1, 2)] for a in (1, 2)])

    def to_dict(self) -> dict:
        return {k: list(getattr(self, k).as_tuple()) for k in ("a1dir", "a2dir", "b1dir", "b2dir")}

    @classmethod
    def from_dict(cls, data: dict) -> SettingTable:
        return cls(*(Direction(*map(float, data[k])) for k in ("a1dir", "a2dir", "b1dir", "b2dir")))


class ModelClass(str, Enum):
    LOCAL_REALISTIC = "local_realistic"
    QUANTUM = "quantum"
    CONSPIRACY = "conspiracy"
    SIGNALING = "signaling"


@dataclass(frozen=True)
class ModelDescriptor:
    name: str
    model_class: ModelClass
    params: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "class": self.model_class.value, "params": dict(self.params)}


@dataclass(frozen=True)
class HiddenState:
    """What the source emits for one trial.

    ``payload`` is private to the model. ``revealed`` carries the potential
    outcome quadruple for models that have one.
    """

    payload: Any = None
    revealed: Quadruple | None = None


@dataclass
class BatchState:
    payload: Any
    revealed: np.ndarray | None  # (n, 4) int8 in x1, x2, y1, y2 order


def _sign(v: np.ndarray) -> np.ndarray:
    # sign(0) := +1
    return np.where(v >= 0.0, 1, -1).astype(np.int8)


def _codes_to_quadruples(codes: np.ndarray) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.uint64)
    out = np.empty((codes.shape[0], 4), dtype=np.int8)
    for k in range(4):
        out[:, k] = 1 - 2 * ((codes >> np.uint64(k)) & np.uint64(1)).astype(np.int8)
    return out


def select_batch(revealed: np.ndarray, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``select_actual``."""
    x = np.where(a == 1, revealed[:, 0], revealed[:, 1])
    y = np.where(b == 1, revealed[:, 2], revealed[:, 3])
    return x.astype(np.int8), y.astype(np.int8)


class HiddenVariableModel:
    name: ClassVar[str]
    model_class: ClassVar[ModelClass]
    defaults: ClassVar[dict[str, float]] = {}
    uses_history: ClassVar[bool] = False

    def __init__(self, **params: float):
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise ConfigError(f"model {self.name!r} has no parameters {sorted(unknown)}")
        self.params = {**self.defaults, **{k: float(v) for k, v in params.items()}}
        self._validate()

    def _validate(self):
        pass

    def __repr__(self):
        return f"{type(self).__name__}({self.params})"

    @property
    def descriptor(self) -> ModelDescriptor:
        return ModelDescriptor(self.name, self.model_class, dict(self.params))

    @property
    def is_local(self) -> bool:
        return self.model_class in (ModelClass.LOCAL_REALISTIC, ModelClass.CONSPIRACY)

    # per-trial contract

    def sample_source(self, stream: rng.TrialStream, history: Sequence = (), table: SettingTable | None = None) -> HiddenState:
        raise NotImplementedError

    def measure(self, wing: str, setting: int, table: SettingTable, state: HiddenState) -> int:
        if not self.is_local:
            raise ContractError(
                f"model {self.name!r} ({self.model_class.value}) needs both settings; use measure_joint"
            )
        setting = check_setting(setting)
        if wing == "left":
            return state.revealed.x(setting)
        if wing == "right":
            return state.revealed.y(setting)
        raise ValueError(f"wing must be 'left' or 'right', got {wing!r}")

    def measure_joint(self, a: int, b: int, table: SettingTable, state: HiddenState, stream: rng.TrialStream) -> tuple[int, int]:
        return self.measure("left", a, table, state), self.measure("right", b, table, state)

    # vectorized path

    def sample_batch(self, seed: int, start: int, stop: int, table: SettingTable) -> BatchState:
        raise NotImplementedError

    def measure_batch(self, a, b, table, state: BatchState, seed: int, start: int, stop: int):
        return select_batch(state.revealed, a, b)


class UniformLHV(HiddenVariableModel):
    """Quadruple drawn uniformly from all 16, independently each trial."""

    name = "uniform-lhv"
    model_class = ModelClass.LOCAL_REALISTIC

    def sample_source(self, stream, history=(), table=None):
        q = Quadruple.from_code(int(stream.words(rng.SOURCE)[0] & np.uint64(15)))
        return HiddenState(payload=q, revealed=q)

    def sample_batch(self, seed, start, stop, table):
        words = rng.trial_words(seed, rng.SOURCE, start, stop)
        rev = _codes_to_quadruples(words[:, 0] & np.uint64(15))
        return BatchState(payload=None, revealed=rev)


class RotatingLHV(HiddenVariableModel):
    """Deterministic shared axis rotating by a fixed angle every trial.

    Trial ``t`` carries the angle ``phase0 + drift * t``. The left outcome
    is ``sign(a . lambda)`` and the right is ``-sign(b . lambda)``, where
    ``lambda`` is the unit vector at that angle in the xy-plane.
    """

    name = "rotating-lhv"
    model_class = ModelClass.LOCAL_REALISTIC
    # golden angle: equidistributes the axis over the circle
    defaults = {"phase0": 0.0, "drift": math.pi * (3.0 - math.sqrt(5.0))}

    def _phase(self, index):
        return self.params["phase0"] + self.params["drift"] * np.asarray(index, dtype=np.float64)

    @staticmethod
    def _outcomes(phi: np.ndarray, table: SettingTable) -> np.ndarray:
        lam = np.stack([np.cos(phi), np.sin(phi), np.zeros_like(phi)], axis=1)
        left = lam @ table.left_matrix().T
        right = lam @ table.right_matrix().T
        return np.concatenate([_sign(left), -_sign(right)], axis=1).astype(np.int8)

    def sample_source(self, stream, history=(), table=None):
        table = table or SettingTable.default()
        phi = self._phase([stream.index])
        q = Quadruple(*(int(v) for v in self._outcomes(phi, table)[0]))
        return HiddenState(payload=float(phi[0]), revealed=q)

    def measure(self, wing, setting, table, state):
        lam = np.array([[math.cos(state.payload), math.sin(state.payload), 0.0]])
        if wing == "left":
            return int(_sign(lam @ table.left_matrix()[[check_setting(setting) - 1]].T)[0, 0])
        if wing == "right":
            return -int(_sign(lam @ table.right_matrix()[[check_setting(setting) - 1]].T)[0, 0])
        raise ValueError(f"wing must be 'left' or 'right', got {wing!r}")

    def sample_batch(self, seed, start, stop, table):
        phi = self._phase(np.arange(start, stop))
        return BatchState(payload=phi, revealed=self._outcomes(phi, table))


# Delta = 0 quadruples used by the memory adversary. All satisfy X1 = Y2; the
# key says which one other cross-wing pair is also equal.
_SHARED_EQUAL = np.array(
    [
        [1, -1, 1, 1],  # AB=11 also equal
        [0, 0, 0, 0],  # unused
        [1, -1, -1, 1],  # AB=21 also equal
        [1, 1, -1, 1],  # AB=22 also equal
    ],
    dtype=np.int8,
)
_ALL_UNEQUAL = np.array([1, 1, -1, -1], dtype=np.int8)


@numba.njit(cache=True)
def _memory_choice(memory, u_choice, code, xprev, strength):
    q = np.empty(4, dtype=np.int8)
    if u_choice < strength:
        guess = 0
        for k in range(1, 4):
            if memory[k] > memory[guess]:
                guess = k
        if guess == 1:
            other = 0
            for k in (2, 3):
                if memory[k] < memory[other]:
                    other = k
            for k in range(4):
                q[k] = _SHARED_EQUAL[other, k] * xprev
        else:
            for k in range(4):
                q[k] = _ALL_UNEQUAL[k] * xprev
    else:
        for k in range(4):
            q[k] = 1 - 2 * ((code >> k) & 1)
    return q


@numba.njit(cache=True)
def _memory_kernel(a, b, u_choice, codes, decay, strength):
    n = a.shape[0]
    revealed = np.empty((n, 4), dtype=np.int8)
    x = np.empty(n, dtype=np.int8)
    y = np.empty(n, dtype=np.int8)
    memory = np.zeros(4)
    keep = 1.0 - decay
    xprev = np.int8(1)
    for t in range(n):
        q = _memory_choice(memory, u_choice[t], codes[t], xprev, strength)
        revealed[t] = q
        # settings are read only after the quadruple is fixed
        x[t] = q[a[t] - 1]
        y[t] = q[1 + b[t]]
        for k in range(4):
            memory[k] = decay * memory[k]
        idx = 2 * (a[t] - 1) + (b[t] - 1)
        memory[idx] = memory[idx] + keep
        xprev = x[t]
    return x, y, revealed


class MemoryLHV(HiddenVariableModel):
    """Local adversary that adapts its quadruple to the past.

    It keeps an exponentially decayed count of past setting pairs and bets
    that the most frequent one comes next. With probability ``strength`` it
    emits a Delta = 0 quadruple tuned to that bet, signed by the previous
    left outcome; otherwise a uniform quadruple. ``decay`` in [0, 1) is the
    memory factor (0 remembers only the last trial).
    """

    name = "memory-lhv"
    model_class = ModelClass.LOCAL_REALISTIC
    defaults = {"decay": 0.9, "strength": 1.0}
    uses_history = True

    def _validate(self):
        if not 0.0 <= self.params["decay"] < 1.0:
            raise ConfigError("memory-lhv decay must lie in [0, 1)")
        if not 0.0 <= self.params["strength"] <= 1.0:
            raise ConfigError("memory-lhv strength must lie in [0, 1]")

    def memory_from_history(self, history) -> tuple[np.ndarray, int]:
        decay = self.params["decay"]
        keep = 1.0 - decay
        memory = np.zeros(4)
        xprev = 1
        for rec in history:
            for k in range(4):
                memory[k] = decay * memory[k]
            idx = 2 * (rec.a - 1) + (rec.b - 1)
            memory[idx] = memory[idx] + keep
            xprev = rec.x
        return memory, xprev

    def sample_source(self, stream, history=(), table=None):
        memory, xprev = self.memory_from_history(history)
        words = stream.words(rng.SOURCE)
        q = _memory_choice(
            memory,
            float(rng.to_uniform(words[0])),
            np.int64(words[1] & np.uint64(15)),
            np.int8(xprev),
            self.params["strength"],
        )
        quad = Quadruple(*(int(v) for v in q))
        return HiddenState(payload=(tuple(memory), xprev), revealed=quad)

    def sample_batch(self, seed, start, stop, table):
        raise ContractError("memory-lhv depends on history and cannot run in parallel mode; use mode='sequential'")

    def run_sequential(self, seed: int, a: np.ndarray, b: np.ndarray):
        """Run trials ``0..len(a)-1`` in order; returns ``(x, y, revealed)``."""
        words = rng.trial_words(seed, rng.SOURCE, 0, len(a))
        u_choice = rng.to_uniform(words[:, 0])
        codes = (words[:, 1] & np.uint64(15)).astype(np.int64)
        return _memory_kernel(
            np.asarray(a, dtype=np.int64),
            np.asarray(b, dtype=np.int64),
            u_choice,
            codes,
            self.params["decay"],
            self.params["strength"],
        )


class SingletSampler(HiddenVariableModel):
    """Quantum singlet statistics: fair marginals and ``Pr{X=Y} = (1 - a.b)/2``.

    There is no quadruple; outcomes are only defined jointly.
    """

    name = "singlet"
    model_class = ModelClass.QUANTUM

    def sample_source(self, stream, history=(), table=None):
        return HiddenState()

    def measure_joint(self, a, b, table, state, stream):
        c = table.correlation(a, b)
        x = 1 - 2 * stream.bit(rng.NOISE, 0)
        y = x if stream.uniform(rng.NOISE, 1) < (1.0 - c) / 2.0 else -x
        return x, y

    def sample_batch(self, seed, start, stop, table):
        return BatchState(payload=None, revealed=None)

    def measure_batch(self, a, b, table, state, seed, start, stop):
        words = rng.trial_words(seed, rng.NOISE, start, stop)
        c = table.dot_matrix()[a - 1, b - 1]
        x = (1 - 2 * rng.to_bit(words[:, 0])).astype(np.int8)
        same = rng.to_uniform(words[:, 1]) < (1.0 - c) / 2.0
        return x, np.where(same, x, -x).astype(np.int8)


class ConspiracyModel(HiddenVariableModel):
    """Local outcome functions, but the quadruple is chosen knowing the settings.

    With probability ``strength`` the source picks a quadruple that makes
    X = Y at AB=12 and X != Y at the other pairs; otherwise it is uniform.
    """

    name = "conspiracy"
    model_class = ModelClass.CONSPIRACY
    defaults = {"strength": 0.8}

    def _validate(self):
        if not 0.0 <= self.params["strength"] <= 1.0:
            raise ConfigError("conspiracy strength must lie in [0, 1]")

    def sample_source(self, stream, history=(), table=None):
        raise ContractError("conspiracy model requires settings; call sample_source_with_settings")

    @staticmethod
    def _rigged(a, b, sign):
        base = np.where((a == 1) & (b == 2), 1, -1).astype(np.int8)
        return np.stack([sign, sign, base * sign, base * sign], axis=-1).astype(np.int8)

    def sample_source_with_settings(self, stream, history, a: int, b: int, table=None) -> HiddenState:
        words = stream.words(rng.SOURCE)
        if rng.to_uniform(words[0]) < self.params["strength"]:
            sign = np.int8(1 - 2 * int(rng.to_bit(words[2])))
            q = Quadruple(*(int(v) for v in self._rigged(np.int64(a), np.int64(b), sign)))
        else:
            q = Quadruple.from_code(int(words[1] & np.uint64(15)))
        return HiddenState(payload=q, revealed=q)

    def sample_batch(self, seed, start, stop, table):
        raise ContractError("conspiracy model requires settings; use sample_batch_with_settings")

    def sample_batch_with_settings(self, seed, start, stop, table, a, b) -> BatchState:
        words = rng.trial_words(seed, rng.SOURCE, start, stop)
        rigged = rng.to_uniform(words[:, 0]) < self.params["strength"]
        sign = (1 - 2 * rng.to_bit(words[:, 2])).astype(np.int8)
        rev = np.where(
            rigged[:, None],
            self._rigged(a, b, sign),
            _codes_to_quadruples(words[:, 1] & np.uint64(15)),
        ).astype(np.int8)
        return BatchState(payload=None, revealed=rev)


class SignalingModel(HiddenVariableModel):
    """Negative control: the left outcome is computed from the right setting.

    With ``shift = 0`` it reproduces singlet statistics exactly. A positive
    ``shift`` pushes ``Pr{X=+1}`` up by that amount whenever B = 2, which is
    visible in the left marginal.
    """

    name = "signaling"
    model_class = ModelClass.SIGNALING
    defaults = {"shift": 0.1}

    def _validate(self):
        if not 0.0 <= self.params["shift"] <= 0.5:
            raise ConfigError("signaling shift must lie in [0, 0.5]")

    def sample_source(self, stream, history=(), table=None):
        return HiddenState()

    def measure_joint(self, a, b, table, state, stream):
        c = table.correlation(a, b)
        y = 1 - 2 * stream.bit(rng.NOISE, 0)
        x = y if stream.uniform(rng.NOISE, 1) < (1.0 - c) / 2.0 else -y
        if b == 2 and stream.uniform(rng.NOISE, 2) < 2.0 * self.params["shift"]:
            x = 1
        return x, y

    def sample_batch(self, seed, start, stop, table):
        return BatchState(payload=None, revealed=None)

    def measure_batch(self, a, b, table, state, seed, start, stop):
        words = rng.trial_words(seed, rng.NOISE, start, stop)
        c = table.dot_matrix()[a - 1, b - 1]
        y = (1 - 2 * rng.to_bit(words[:, 0])).astype(np.int8)
        x = np.where(rng.to_uniform(words[:, 1]) < (1.0 - c) / 2.0, y, -y)
        forced = (b == 2) & (rng.to_uniform(words[:, 2]) < 2.0 * self.params["shift"])
        return np.where(forced, 1, x).astype(np.int8), y


MODELS: dict[str, type[HiddenVariableModel]] = {
    cls.name: cls
    for cls in (UniformLHV, RotatingLHV, MemoryLHV, SingletSampler, ConspiracyModel, SignalingModel)
}


def builtin_models() -> list[ModelDescriptor]:
    return [cls().descriptor for cls in MODELS.values()]


def build_model(descriptor: ModelDescriptor | str, **overrides: float) -> HiddenVariableModel:
    if isinstance(descriptor, str):
        name, params = descriptor, {}
    else:
        name, params = descriptor.name, dict(descriptor.params)
    try:
        cls = MODELS[name]
    except KeyError:
        raise ConfigError(f"unknown model {name!r}; known: {sorted(MODELS)}") from None
    if not isinstance(descriptor, str) and descriptor.model_class != cls.model_class:
        raise ConfigError(f"model {name!r} has class {cls.model_class.value}, not {descriptor.model_class.value}")
    return cls(**{**params, **overrides})
