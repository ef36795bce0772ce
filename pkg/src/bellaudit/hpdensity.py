"""Slab-variable density of the Hess-Philipp construction and its locality audit.

The domain ``Omega = [-3, 3n)`` is cut into unit slabs ``[i-1, i)`` for
``i = -2 .. 3n``. Within slab ``i`` the joint density of the local
variables is

    rho_ab(u, v; i) = sigma_a(u) 1{i-1 <= u < i} * tau_b(v) 1{i-1 <= v < i},

a product of a left-only and a right-only factor. The slab index ``i`` is
shared by both wings, so if its distribution moves with ``a`` *and* ``b``
the model is not local, however local ``u`` and ``v`` look.

Integrals use the tensor midpoint rule on ``cells_per_unit`` cells per unit
length. Cell edges fall on the integers, so midpoints never touch a slab
boundary. Each integral is repeated with half the step; if the two differ
by more than the configured tolerance a :class:`QuadratureWarning` is
issued.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Literal, Sequence

import numpy as np

from bellaudit.errors import ContractError, QuadratureWarning
from bellaudit.models import Direction

WeightFn = Callable[[Direction, np.ndarray], np.ndarray]
OutcomeFn = Callable[[Direction, np.ndarray], np.ndarray]

FIRST_SLAB = -2
OMEGA_LO = -3.0
VERDICT_TOLERANCE = 1e-6


@dataclass(frozen=True)
class QuadratureConfig:
    cells_per_unit: int = 8
    tolerance: float = 1e-9

    def __post_init__(self):
        if int(self.cells_per_unit) != self.cells_per_unit or self.cells_per_unit < 4:
            raise ValueError("cells_per_unit must be an integer >= 4")
        if not self.tolerance > 0:
            raise ValueError("quadrature tolerance must be positive")


@dataclass(frozen=True)
class SlabDensitySpec:
    n: int
    a: Direction
    b: Direction
    sigma: WeightFn
    tau: WeightFn
    omega_lo: float = OMEGA_LO
    omega_hi: float | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        if self.omega_hi is None:
            object.__setattr__(self, "omega_hi", float(3 * self.n))
        if self.omega_lo != OMEGA_LO or self.omega_hi != 3 * self.n:
            raise ValueError(f"Omega must be [-3, 3n) = [-3, {3 * self.n}), got [{self.omega_lo}, {self.omega_hi})")

    @property
    def slabs(self) -> range:
        return range(FIRST_SLAB, 3 * self.n + 1)


@dataclass(frozen=True)
class OutcomeFields:
    A_fn: OutcomeFn
    B_fn: OutcomeFn


def _check_slab(i: int, n: int | None = None):
    if i < FIRST_SLAB or (n is not None and i > 3 * n):
        raise ContractError(f"slab index {i} outside [-2, {'3n' if n is None else 3 * n}]")


def in_slab(u, i: int):
    """``1{i-1 <= u < i}`` as an int array (or int)."""
    u = np.asarray(u, dtype=np.float64)
    out = ((i - 1 <= u) & (u < i)).astype(np.int64)
    return int(out) if out.ndim == 0 else out


def kappa2(u, v, i: int, j: int):
    """``delta_ij * 1{i-1 <= u < i} * 1{j-1 <= v < j}``."""
    if i != j:
        return 0 if np.ndim(u) == 0 and np.ndim(v) == 0 else np.zeros(np.broadcast(u, v).shape, dtype=np.int64)
    return in_slab(u, i) * in_slab(v, j)


def kappa(u, v, i: int):
    """``1{i-1 <= u < i} * 1{i-1 <= v < i}``; the Kronecker delta of :func:`kappa2` absorbed."""
    return in_slab(u, i) * in_slab(v, i)


def sigma_slab(spec: SlabDensitySpec, u, i: int) -> np.ndarray:
    """Left weight restricted to slab ``i``."""
    u = np.asarray(u, dtype=np.float64)
    return np.asarray(spec.sigma(spec.a, u), dtype=np.float64) * in_slab(u, i)


def tau_slab(spec: SlabDensitySpec, v, i: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    return np.asarray(spec.tau(spec.b, v), dtype=np.float64) * in_slab(v, i)


def density(spec: SlabDensitySpec, u, v, i: int):
    _check_slab(i, spec.n)
    out = sigma_slab(spec, u, i) * tau_slab(spec, v, i)
    return float(out) if np.ndim(out) == 0 else out


def _midpoints(spec: SlabDensitySpec, cells_per_unit: int) -> np.ndarray:
    cells = int(round((spec.omega_hi - spec.omega_lo) * cells_per_unit))
    return spec.omega_lo + (np.arange(cells) + 0.5) / cells_per_unit


def _midpoint_integral(spec: SlabDensitySpec, outc: OutcomeFields, i: int, cells_per_unit: int) -> float:
    nodes = _midpoints(spec, cells_per_unit)
    U, V = np.meshgrid(nodes, nodes, indexing="ij")
    integrand = (
        np.asarray(outc.A_fn(spec.a, U), dtype=np.float64)
        * np.asarray(outc.B_fn(spec.b, V), dtype=np.float64)
        * density(spec, U, V, i)
    )
    h = 1.0 / cells_per_unit
    return float(integrand.sum() * h * h)


def _slab_integral(spec, outc, i, quadrature) -> tuple[float, float]:
    """Integral over Omega at the configured and halved step; returns (fine value, change)."""
    coarse = _midpoint_integral(spec, outc, i, quadrature.cells_per_unit)
    fine = _midpoint_integral(spec, outc, i, 2 * quadrature.cells_per_unit)
    return fine, abs(fine - coarse)


def _warn_if_coarse(change: float, quadrature: QuadratureConfig, what: str):
    if change > quadrature.tolerance:
        warnings.warn(
            f"{what}: halving the step moved the integral by {change:.3g} > {quadrature.tolerance:.3g}; "
            "increase cells_per_unit",
            QuadratureWarning,
            stacklevel=3,
        )


def marginal_i(spec: SlabDensitySpec, outc: OutcomeFields, i: int, quadrature: QuadratureConfig = QuadratureConfig()) -> float:
    """``integral over Omega of A_a(u) B_b(v) rho_ab(u, v; i) du dv``."""
    _check_slab(i, spec.n)
    value, change = _slab_integral(spec, outc, i, quadrature)
    _warn_if_coarse(change, quadrature, f"slab {i}")
    return value


def expectation(spec: SlabDensitySpec, outc: OutcomeFields, quadrature: QuadratureConfig = QuadratureConfig()) -> float:
    """Sum of the slab integrals in fixed slab order."""
    total, worst = 0.0, 0.0
    for i in spec.slabs:
        value, change = _slab_integral(spec, outc, i, quadrature)
        total += value
        worst = max(worst, change)
    _warn_if_coarse(worst, quadrature, "expectation")
    return total


def correlation_target(spec: SlabDensitySpec) -> float:
    """The singlet value ``-a.b`` an outcome family would have to reproduce."""
    return -spec.a.dot(spec.b)


# --- weight families --------------------------------------------------------


def _slab_index(u: np.ndarray) -> np.ndarray:
    return np.floor(u).astype(np.int64) + 1


def _piecewise(u, values: dict[int, float]) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    idx = _slab_index(u)
    out = np.zeros(u.shape, dtype=np.float64)
    for i, w in values.items():
        out = np.where(idx == i, w, out)
    return out


def reference_sigma(a: Direction, u) -> np.ndarray:
    """``|a1|`` on slabs -2 and -1, ``1 - |a1|`` on slabs 0 and 1, zero beyond."""
    p = abs(a.x)
    return _piecewise(u, {-2: p, -1: p, 0: 1.0 - p, 1: 1.0 - p})


def reference_tau(b: Direction, v) -> np.ndarray:
    """``|b1|`` on slabs -2 and 0, ``1 - |b1|`` on slabs -1 and 1, zero beyond."""
    q = abs(b.x)
    return _piecewise(v, {-2: q, -1: 1.0 - q, 0: q, 1: 1.0 - q})


def reference_family(n: int = 1) -> Callable[[Direction, Direction], SlabDensitySpec]:
    """Slab -2 carries mass ``|a1| |b1|``; slabs -1..1 carry the complementary products.

    The four masses sum to one for every ``a, b``. Slabs 2..3n are empty.
    """
    return lambda a, b: SlabDensitySpec(n, a, b, reference_sigma, reference_tau)


def uniform_family(n: int = 1) -> Callable[[Direction, Direction], SlabDensitySpec]:
    """Constant weights on all of Omega: every slab gets mass ``1/(3n+3)`` whatever the settings."""
    w = 1.0 / math.sqrt(3 * n + 3)

    def weight(_d, u):
        return np.full(np.shape(u), w)

    return lambda a, b: SlabDensitySpec(n, a, b, weight, weight)


def constant_outcomes(left: int = 1, right: int = 1) -> OutcomeFields:
    return OutcomeFields(lambda _d, u: np.full(np.shape(u), float(left)), lambda _d, v: np.full(np.shape(v), float(right)))


def reference_outcomes() -> OutcomeFields:
    """``A = B = +1`` throughout, so each slab integral is that slab's probability."""
    return constant_outcomes(1, 1)


FAMILIES = {"reference": reference_family, "uniform": uniform_family}


# --- locality audit ---------------------------------------------------------


@dataclass
class Witness:
    slab: int
    varied_wing: Literal["a", "b"]
    fixed: Direction
    first: Direction
    second: Direction
    deviation: float

    def to_dict(self) -> dict:
        return {
            "slab": self.slab,
            "varied_wing": self.varied_wing,
            "fixed": list(self.fixed.as_tuple()),
            "first": list(self.first.as_tuple()),
            "second": list(self.second.as_tuple()),
            "deviation": self.deviation,
        }


@dataclass
class LocalityAuditReport:
    per_slab_b_dependence: dict[int, float]
    per_slab_a_dependence: dict[int, float]
    witnesses: list[Witness]
    verdict: Literal["local", "non_local"]
    tolerance: float = VERDICT_TOLERANCE
    marginals: np.ndarray | None = None  # [a index, b index, slab offset]
    normalization: np.ndarray | None = None  # sum over slabs, per (a, b)
    max_quadrature_change: float = 0.0
    quadrature_warning: bool = False
    a_grid: list[Direction] = field(default_factory=list)
    b_grid: list[Direction] = field(default_factory=list)

    @property
    def max_deviation(self) -> float:
        return max([*self.per_slab_b_dependence.values(), *self.per_slab_a_dependence.values(), 0.0])

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "tolerance": self.tolerance,
            "max_deviation": self.max_deviation,
            "per_slab_b_dependence": {str(k): v for k, v in self.per_slab_b_dependence.items()},
            "per_slab_a_dependence": {str(k): v for k, v in self.per_slab_a_dependence.items()},
            "witnesses": [w.to_dict() for w in self.witnesses],
            "normalization": None if self.normalization is None else self.normalization.tolist(),
            "max_quadrature_change": self.max_quadrature_change,
            "quadrature_warning": self.quadrature_warning,
            "a_grid": [list(d.as_tuple()) for d in self.a_grid],
            "b_grid": [list(d.as_tuple()) for d in self.b_grid],
        }


def locality_audit(
    spec_builder: Callable[[Direction, Direction], SlabDensitySpec],
    outc: OutcomeFields,
    a_grid: Sequence[Direction],
    b_grid: Sequence[Direction],
    quadrature: QuadratureConfig = QuadratureConfig(),
    tolerance: float = VERDICT_TOLERANCE,
) -> LocalityAuditReport:
    """Sweep the slab marginals over a grid of settings and look for remote-setting dependence.

    For each slab the b-dependence is the largest spread of the marginal as
    ``b`` varies with ``a`` held fixed, maximized over ``a``; the
    a-dependence is the mirror image.
    """
    if not a_grid or not b_grid:
        raise ContractError("locality audit needs nonempty direction grids")
    a_grid, b_grid = list(a_grid), list(b_grid)
    slabs = list(spec_builder(a_grid[0], b_grid[0]).slabs)
    marg = np.empty((len(a_grid), len(b_grid), len(slabs)))
    worst = 0.0
    for ia, a in enumerate(a_grid):
        for ib, b in enumerate(b_grid):
            spec = spec_builder(a, b)
            for k, i in enumerate(slabs):
                marg[ia, ib, k], change = _slab_integral(spec, outc, i, quadrature)
                worst = max(worst, change)
    coarse = worst > quadrature.tolerance
    if coarse:
        _warn_if_coarse(worst, quadrature, "locality audit")

    b_dep, a_dep, witnesses = {}, {}, []
    for k, i in enumerate(slabs):
        spread_b = marg[:, :, k].max(axis=1) - marg[:, :, k].min(axis=1)
        ia = int(np.argmax(spread_b))
        b_dep[i] = float(spread_b[ia])
        if b_dep[i] > tolerance:
            hi, lo = int(np.argmax(marg[ia, :, k])), int(np.argmin(marg[ia, :, k]))
            witnesses.append(Witness(i, "b", a_grid[ia], b_grid[hi], b_grid[lo], b_dep[i]))

        spread_a = marg[:, :, k].max(axis=0) - marg[:, :, k].min(axis=0)
        ib = int(np.argmax(spread_a))
        a_dep[i] = float(spread_a[ib])
        if a_dep[i] > tolerance:
            hi, lo = int(np.argmax(marg[:, ib, k])), int(np.argmin(marg[:, ib, k]))
            witnesses.append(Witness(i, "a", b_grid[ib], a_grid[hi], a_grid[lo], a_dep[i]))

    return LocalityAuditReport(
        per_slab_b_dependence=b_dep,
        per_slab_a_dependence=a_dep,
        witnesses=witnesses,
        verdict="non_local" if witnesses else "local",
        tolerance=tolerance,
        marginals=marg,
        normalization=marg.sum(axis=2),
        max_quadrature_change=worst,
        quadrature_warning=coarse,
        a_grid=a_grid,
        b_grid=b_grid,
    )
