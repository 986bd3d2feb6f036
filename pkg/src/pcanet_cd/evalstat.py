"""Confusion counts, kappa, error rates, run aggregation and Welch's t-test.

Undefined quantities (a rate with an empty denominator, the std of a single
run) are returned as ``None``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionError, ParameterError

SIGNIFICANCE_LEVEL = 5e-3


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ParameterError("confusion counts must be non-negative")
        if self.total < 1:
            raise ParameterError("confusion matrix is empty")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def confusion(pred, ref) -> ConfusionMatrix:
    """Pixel-wise counts with *changed* as the positive class.

    ``pred`` and ``ref`` may be ReferenceMap objects or 0/1 arrays.
    """
    p = np.asarray(getattr(pred, "labels", pred)) != 0
    r = np.asarray(getattr(ref, "labels", ref)) != 0
    if p.shape != r.shape:
        raise DimensionError(f"prediction shape {p.shape} does not match reference shape {r.shape}")
    tp = int(np.count_nonzero(p & r))
    tn = int(np.count_nonzero(~p & ~r))
    fp = int(np.count_nonzero(p & ~r))
    fn = int(np.count_nonzero(~p & r))
    return ConfusionMatrix(tp, tn, fp, fn)


def kappa(cm: ConfusionMatrix) -> float:
    n = cm.total
    po = (cm.tp + cm.tn) / n
    pe = ((cm.tp + cm.fp) * (cm.tp + cm.fn) + (cm.tn + cm.fn) * (cm.tn + cm.fp)) / (n * n)
    if pe == 1:
        # both marginals collapse onto the same single class
        return 1.0 if po == 1 else 0.0
    return (po - pe) / (1 - pe)


def error_rates(cm: ConfusionMatrix) -> dict:
    """False-alarm, missed-detection and overall error rates plus PCC."""
    fa = cm.fp / (cm.fp + cm.tn) if cm.fp + cm.tn else None
    missed = cm.fn / (cm.fn + cm.tp) if cm.fn + cm.tp else None
    oe = (cm.fp + cm.fn) / cm.total
    return {"false_alarm": fa, "missed": missed, "overall_error": oe, "pcc": 1 - oe}


@dataclass(frozen=True)
class RunAggregate:
    kappas: tuple
    mean: float
    std: float | None


def _mean(values) -> float:
    # shifting by the first element keeps constant inputs exact
    v0 = float(values[0])
    return v0 + math.fsum(v - v0 for v in values) / len(values)


def aggregate(kappas: Sequence[float]) -> RunAggregate:
    k = tuple(float(v) for v in kappas)
    if not k:
        raise ParameterError("nothing to aggregate")
    mean = _mean(k)
    std = None
    if len(k) >= 2:
        std = math.sqrt(math.fsum((v - mean) ** 2 for v in k) / (len(k) - 1))
    return RunAggregate(k, mean, std)


# ---------------------------------------------------------------------------
# Student t distribution
# ---------------------------------------------------------------------------


def _beta_cf(a: float, b: float, x: float, tol: float = 1e-15, max_iter: int = 10_000) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    d = tiny if abs(d) < tiny else d
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc_regularized(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function ``I_x(a, b)``."""
    if a <= 0 or b <= 0:
        raise ParameterError("beta parameters must be positive")
    if x <= 0:
        return 0.0
    if x >= 1:
        return 1.0
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    # the fraction converges fast on this side of the mode; use symmetry otherwise
    if x < (a + 1) / (a + b + 2):
        return front * _beta_cf(a, b, x) / a
    return 1.0 - front * _beta_cf(b, a, 1.0 - x) / b


def t_two_sided_p(t: float, dof: float) -> float:
    """``P(|T| >= |t|)`` for Student's t with ``dof`` degrees of freedom."""
    if math.isnan(t):
        return math.nan
    if math.isinf(t):
        return 0.0
    return betainc_regularized(dof / 2.0, 0.5, dof / (dof + t * t))


@dataclass(frozen=True)
class TTestReport:
    t_value: float
    p_value: float
    dof: float | None
    significant: bool


def welch_t_test(a: Sequence[float], b: Sequence[float], level: float = SIGNIFICANCE_LEVEL) -> TTestReport:
    """Two-sample unequal-variance t-test of ``mean(a) - mean(b)``.

    With ``a`` the baseline and ``b`` the proposed method, a better ``b``
    gives a negative statistic.
    """
    xa = np.asarray(a, dtype=np.float64)
    xb = np.asarray(b, dtype=np.float64)
    na, nb = xa.size, xb.size
    if na < 2 or nb < 2:
        raise ParameterError("each sample needs at least two values")
    ma, mb = _mean(xa), _mean(xb)
    va = math.fsum((xa - ma) ** 2) / (na - 1)
    vb = math.fsum((xb - mb) ** 2) / (nb - 1)
    sa, sb = va / na, vb / nb
    se2 = sa + sb
    if se2 == 0:
        if ma == mb:
            return TTestReport(0.0, 1.0, None, False)
        t = math.copysign(math.inf, ma - mb)
        return TTestReport(t, 0.0, None, 0.0 < level)
    t = (ma - mb) / math.sqrt(se2)
    dof = se2 * se2 / (sa * sa / (na - 1) + sb * sb / (nb - 1))
    p = t_two_sided_p(t, dof)
    return TTestReport(t, p, dof, p < level)
