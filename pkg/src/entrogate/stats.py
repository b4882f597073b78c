"""Summary statistics and the paired t-test, implemented from first principles.

The t-distribution tail comes from the regularized incomplete beta function,
evaluated with the modified Lentz continued fraction. An exact sign-flip
permutation test backs the degenerate case where every paired difference is
identical (zero variance, non-zero mean).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from entrogate.errors import DomainError
from entrogate.ledger import FrameRecord, Outcome

_EPS = 1e-16
_TINY = 1e-300
_MAX_ITER = 10_000
MAX_ENUMERATED_PAIRS = 20


@dataclass(frozen=True)
class Summary:
    count: int
    mean: float
    sd: Optional[float]
    min: float
    max: float
    p50: float
    p95: float
    p99: float

    def to_dict(self) -> dict:
        return asdict(self)


def nearest_rank(sorted_values: Sequence[float], pct: float) -> float:
    """Nearest-rank percentile: the ``ceil(pct/100 * n)``-th smallest value."""
    n = len(sorted_values)
    rank = max(1, math.ceil(pct / 100.0 * n))
    return sorted_values[rank - 1]


def sample_sd(values: Sequence[float]) -> Optional[float]:
    n = len(values)
    if n < 2:
        return None
    mean = math.fsum(values) / n
    return math.sqrt(math.fsum((x - mean) ** 2 for x in values) / (n - 1))


def summarize(values: Iterable[float]) -> Summary:
    """Count, mean, sample sd (n-1), extremes and nearest-rank percentiles.

    ``sd`` is ``None`` for a single value rather than zero.
    """
    xs = [float(v) for v in values]
    if not xs:
        raise DomainError("cannot summarize an empty series")
    s = sorted(xs)
    return Summary(
        count=len(xs),
        mean=math.fsum(xs) / len(xs),
        sd=sample_sd(xs),
        min=s[0],
        max=s[-1],
        p50=nearest_rank(s, 50),
        p95=nearest_rank(s, 95),
        p99=nearest_rank(s, 99),
    )


def _betacf(a: float, b: float, x: float) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _TINY:
            d = _TINY
        c = 1.0 + aa / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta failed to converge (a={a}, b={b}, x={x})")


def betainc_regularized(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta ``I_x(a, b)`` for ``a, b > 0``, ``0 <= x <= 1``."""
    if a <= 0 or b <= 0:
        raise DomainError("betainc requires a > 0 and b > 0")
    if not 0.0 <= x <= 1.0:
        raise DomainError("betainc requires 0 <= x <= 1")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b) + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(log_front)
    # the continued fraction converges fastest on this side of the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_tailed_p(t: float, df: float) -> float:
    """Two-tailed p-value of Student's t with ``df`` degrees of freedom."""
    if df <= 0:
        raise DomainError("degrees of freedom must be > 0")
    if math.isinf(t):
        return 0.0
    x = df / (df + t * t)
    return min(1.0, max(0.0, betainc_regularized(df / 2.0, 0.5, x)))


def sign_flip_p_value(diffs: Sequence[float]) -> float:
    """Exact two-sided sign-flip permutation p-value for the mean difference.

    Counts the sign assignments whose absolute mean is at least the observed
    one. Equal-magnitude differences use a binomial count; otherwise all
    ``2**n`` assignments are enumerated, which limits ``n`` to 20.
    """
    d = np.asarray(diffs, dtype=np.float64)
    n = d.size
    if n == 0:
        raise DomainError("no differences")
    observed = abs(d.sum())
    tol = 1e-12 * max(1.0, float(np.abs(d).sum()))
    mags = np.abs(d)
    if np.all(mags == mags[0]):
        if mags[0] == 0:
            return 1.0
        s_obs = abs(int(np.sign(d).sum()))
        hits = sum(math.comb(n, k) for k in range(n + 1) if abs(2 * k - n) >= s_obs)
        return hits / 2**n
    if n > MAX_ENUMERATED_PAIRS:
        raise DomainError(f"exact sign-flip enumeration limited to n <= {MAX_ENUMERATED_PAIRS}")
    hits = 0
    # chunk over the leading signs so memory stays bounded
    tail = min(n, 14)
    head = n - tail
    tail_signs = np.array(list(itertools.product((1.0, -1.0), repeat=tail)))
    tail_sums = tail_signs @ mags[head:]
    for head_signs in itertools.product((1.0, -1.0), repeat=head):
        base = float(np.dot(head_signs, mags[:head])) if head else 0.0
        hits += int(np.count_nonzero(np.abs(base + tail_sums) >= observed - tol))
    return hits / 2**n


@dataclass(frozen=True)
class PairedTestResult:
    n: int
    mean_diff: float
    sd_diff: float
    t_statistic: float
    degrees_of_freedom: int
    p_value_two_tailed: float
    method: str  # "t", "sign-flip" or "degenerate"

    def to_dict(self) -> dict:
        out = asdict(self)
        if math.isinf(self.t_statistic):
            out["t_statistic"] = None
        return out


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> PairedTestResult:
    """Paired t-test of ``a`` against ``b``, pairing by index.

    Differences are ``a[i] - b[i]``. Zero-variance differences are handled
    explicitly: all-zero gives ``t = 0, p = 1``; a constant non-zero
    difference gives an infinite ``t`` with the exact sign-flip p-value.
    """
    if len(a) != len(b):
        raise DomainError(f"paired samples differ in length ({len(a)} vs {len(b)})")
    n = len(a)
    if n < 2:
        raise DomainError("paired t-test needs at least 2 pairs")
    d = [float(x) - float(y) for x, y in zip(a, b)]
    mean = math.fsum(d) / n
    sd = sample_sd(d)
    df = n - 1
    if sd == 0.0 or all(x == d[0] for x in d):
        if mean == 0.0:
            return PairedTestResult(n, 0.0, 0.0, 0.0, df, 1.0, "degenerate")
        t = math.copysign(math.inf, mean)
        return PairedTestResult(n, mean, 0.0, t, df, sign_flip_p_value(d), "sign-flip")
    t = mean / (sd / math.sqrt(n))
    return PairedTestResult(n, mean, sd, t, df, t_two_tailed_p(t, df), "t")


def throughput(ledger: Iterable[FrameRecord], wall_duration_ns: int) -> float:
    """Inferred frames per second of wall time."""
    if wall_duration_ns <= 0:
        raise DomainError("wall duration must be > 0")
    inferred = sum(1 for r in ledger if r.decision is Outcome.INFERRED)
    return inferred / (wall_duration_ns / 1e9)
