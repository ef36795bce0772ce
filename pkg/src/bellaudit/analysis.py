"""Estimators and statistical audits over trial logs.

The headline number is the equality-form Bell statistic

    S = P(X=Y | AB=12) - P(X=Y | AB=11) - P(X=Y | AB=21) - P(X=Y | AB=22),

which is at most 0 for any local realistic model whose settings are
independent fair coins, and equals sqrt(2) - 1 for the singlet at the
default table.

Finite-sample control comes from the per-trial score
``s_t = +4 * 1{X=Y}`` if AB=12 and ``-4 * 1{X=Y}`` otherwise. Given the
past, the expected score equals the Delta of that trial's quadruple, so it
is <= 0 whatever the model remembers, provided the settings are freshly
randomized. The Hoeffding-Azuma inequality for increments in [-4, 4] then
bounds the mean score by ``sqrt(32 ln(1/delta) / n)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from bellaudit.engine import TrialLog
from bellaudit.errors import ContractError, DegenerateTableError, UndefinedCellError
from bellaudit.models import SettingTable
from bellaudit.outcomes import SETTING_PAIRS

Pair = tuple[int, int]


def _pair_key(pair: Pair) -> str:
    return f"{pair[0]}{pair[1]}"


@dataclass
class BellEstimate:
    p_hat: dict[Pair, float]
    counts: dict[Pair, int]
    s_hat: float
    score_mean: float
    epsilon: float
    confidence: float
    n_trials: int

    @property
    def violates_bound(self) -> bool:
        return self.s_hat > self.epsilon

    def to_dict(self) -> dict:
        return {
            "p_hat": {_pair_key(k): v for k, v in self.p_hat.items()},
            "counts": {_pair_key(k): v for k, v in self.counts.items()},
            "s_hat": self.s_hat,
            "score_mean": self.score_mean,
            "epsilon": self.epsilon,
            "confidence": self.confidence,
            "n_trials": self.n_trials,
            "violates_bound": self.violates_bound,
        }


@dataclass
class IndependenceReport:
    statistic: float
    dof: int
    p_value: float
    table: np.ndarray  # rows: AB = 11, 12, 21, 22; columns: quadruple code 0..15

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "dof": self.dof, "p_value": self.p_value, "table": self.table.tolist()}


@dataclass
class ProportionTest:
    wing: str
    own_setting: int
    p_remote1: float
    p_remote2: float
    n_remote1: int
    n_remote2: int
    z: float
    p_value: float


@dataclass
class NoSignalingReport:
    tests: list[ProportionTest]
    alpha: float
    min_p_value: float
    rejected: bool
    correction: str = field(default="bonferroni")

    def to_dict(self) -> dict:
        return {
            "tests": [asdict(t) for t in self.tests],
            "alpha": self.alpha,
            "min_p_value": self.min_p_value,
            "rejected": self.rejected,
            "correction": self.correction,
        }


def _pair_masks(log: TrialLog):
    a = np.asarray(log.a)
    b = np.asarray(log.b)
    return {pair: (a == pair[0]) & (b == pair[1]) for pair in SETTING_PAIRS}


def conditional_equality_freqs(log: TrialLog) -> tuple[dict[Pair, float], dict[Pair, int]]:
    """Relative frequency of X = Y within each setting pair, with the pair counts."""
    equal = np.asarray(log.x) == np.asarray(log.y)
    p_hat, counts = {}, {}
    for pair, mask in _pair_masks(log).items():
        n = int(np.count_nonzero(mask))
        if n == 0:
            raise UndefinedCellError(pair)
        counts[pair] = n
        p_hat[pair] = int(np.count_nonzero(equal & mask)) / n
    return p_hat, counts


def bell_statistic(p_hat: dict[Pair, float]) -> float:
    missing = [p for p in SETTING_PAIRS if p not in p_hat]
    if missing:
        raise UndefinedCellError(missing[0])
    return p_hat[(1, 2)] - p_hat[(1, 1)] - p_hat[(2, 1)] - p_hat[(2, 2)]


def chsh_quantum_prediction(table: SettingTable) -> float:
    """Closed-form singlet value of the Bell statistic for ``table``."""
    c = table.dot_matrix()
    return (c[0, 0] + c[1, 0] + c[1, 1] - c[0, 1] - 2.0) / 2.0


def martingale_scores(log: TrialLog) -> np.ndarray:
    equal = (np.asarray(log.x) == np.asarray(log.y)).astype(np.int64)
    sign = np.where((np.asarray(log.a) == 1) & (np.asarray(log.b) == 2), 4, -4)
    return sign * equal


def martingale_score_mean(log: TrialLog) -> float:
    if len(log) == 0:
        raise ContractError("score mean of an empty log is undefined")
    return float(martingale_scores(log).mean())


def concentration_bound(n_trials: int, confidence: float) -> float:
    """Deviation ``eps`` with ``P(score mean >= eps) <= 1 - confidence`` under local realism."""
    if n_trials < 1:
        raise ValueError("n_trials must be at least 1")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    return math.sqrt(32.0 * math.log(1.0 / (1.0 - confidence)) / n_trials)


def estimate(log: TrialLog, confidence: float = 0.99) -> BellEstimate:
    p_hat, counts = conditional_equality_freqs(log)
    return BellEstimate(
        p_hat=p_hat,
        counts=counts,
        s_hat=bell_statistic(p_hat),
        score_mean=martingale_score_mean(log),
        epsilon=concentration_bound(len(log), confidence),
        confidence=confidence,
        n_trials=len(log),
    )


def setting_quadruple_table(log: TrialLog) -> np.ndarray:
    if log.revealed is None:
        raise ContractError("freedom test needs revealed quadruples in every record")
    rev = np.asarray(log.revealed)
    codes = ((rev == -1).astype(np.int64) << np.arange(4)).sum(axis=1)
    rows = 2 * (np.asarray(log.a, dtype=np.int64) - 1) + (np.asarray(log.b, dtype=np.int64) - 1)
    table = np.zeros((4, 16), dtype=np.int64)
    np.add.at(table, (rows, codes), 1)
    return table


def freedom_test(log: TrialLog) -> IndependenceReport:
    """Chi-square test that the setting pair is independent of the revealed quadruple."""
    table = setting_quadruple_table(log)
    # empty rows or columns have zero expected counts; drop them and shrink dof
    reduced = table[table.sum(axis=1) > 0][:, table.sum(axis=0) > 0]
    if reduced.shape[0] < 2 or reduced.shape[1] < 2:
        raise DegenerateTableError(
            f"contingency table has {reduced.shape[0]} populated setting pairs and "
            f"{reduced.shape[1]} populated quadruples; need at least 2 of each"
        )
    res = stats.chi2_contingency(reduced, correction=False)
    return IndependenceReport(float(res.statistic), int(res.dof), float(res.pvalue), table)


def _two_proportion(k1: int, n1: int, k2: int, n2: int) -> tuple[float, float]:
    pooled = (k1 + k2) / (n1 + n2)
    se = math.sqrt(pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2))
    diff = k1 / n1 - k2 / n2
    if se == 0.0:
        return 0.0, 1.0
    z = diff / se
    return z, float(2.0 * stats.norm.sf(abs(z)))


def no_signaling_test(log: TrialLog, alpha: float = 0.001) -> NoSignalingReport:
    """Does either wing's marginal move with the remote setting?

    Four two-proportion z-tests, one per (wing, local setting); the log is
    rejected when the smallest p-value falls below ``alpha / 4``.
    """
    masks = _pair_masks(log)
    for pair, mask in masks.items():
        if not mask.any():
            raise UndefinedCellError(pair)
    xplus = np.asarray(log.x) == 1
    yplus = np.asarray(log.y) == 1
    tests = []
    for wing, plus in (("left", xplus), ("right", yplus)):
        for own in (1, 2):
            if wing == "left":
                m1, m2 = masks[(own, 1)], masks[(own, 2)]
            else:
                m1, m2 = masks[(1, own)], masks[(2, own)]
            n1, n2 = int(m1.sum()), int(m2.sum())
            k1, k2 = int((plus & m1).sum()), int((plus & m2).sum())
            z, p = _two_proportion(k1, n1, k2, n2)
            tests.append(ProportionTest(wing, own, k1 / n1, k2 / n2, n1, n2, z, p))
    min_p = min(t.p_value for t in tests)
    return NoSignalingReport(tests, alpha, min_p, min_p < alpha / len(tests))
