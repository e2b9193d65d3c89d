"""Ordinary least squares on a one-categorical dummy design, with diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .tails import f_tail, t_tail_two_sided


@dataclass(frozen=True)
class DummyDesign:
    """Design of n observations of one categorical variable with P levels.

    The model matrix is an intercept column plus P-1 indicator columns, one
    per non-reference period in ascending order; the reference period
    (default: the last) is the omitted level.
    """

    period_of: tuple[int, ...]
    period_count: int
    reference_period: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "period_of", tuple(int(p) for p in self.period_of))
        ref = self.period_count if self.reference_period is None else self.reference_period
        object.__setattr__(self, "reference_period", int(ref))
        if self.period_count < 2:
            raise NumericalError(f"need at least 2 periods, got {self.period_count}")
        if not 1 <= self.reference_period <= self.period_count:
            raise NumericalError(
                f"reference period {self.reference_period} outside 1..{self.period_count}"
            )
        bad = [p for p in self.period_of if not 1 <= p <= self.period_count]
        if bad:
            raise NumericalError(f"period indices outside 1..{self.period_count}: {sorted(set(bad))}")
        present = set(self.period_of)
        empty = [p for p in range(1, self.period_count + 1) if p not in present]
        if empty:
            raise NumericalError(f"rank-deficient design: no observations for periods {empty}")

    @property
    def n(self) -> int:
        return len(self.period_of)

    @property
    def non_reference_periods(self) -> tuple[int, ...]:
        return tuple(p for p in range(1, self.period_count + 1) if p != self.reference_period)

    def matrix(self) -> np.ndarray:
        x = np.zeros((self.n, self.period_count))
        x[:, 0] = 1.0
        column = {p: j + 1 for j, p in enumerate(self.non_reference_periods)}
        for i, p in enumerate(self.period_of):
            if p != self.reference_period:
                x[i, column[p]] = 1.0
        return x


@dataclass(frozen=True)
class CoefStats:
    standard_error: float
    t_stat: float
    p_value: float


@dataclass(frozen=True)
class OlsFit:
    intercept: float
    coefficients: tuple[float, ...]
    intercept_stats: CoefStats
    coef_stats: tuple[CoefStats, ...]
    r2: float
    adj_r2: float
    residual_se: float
    ss_regression: float
    ss_residual: float
    ss_total: float
    df_regression: int
    df_residual: int
    f_stat: float
    f_significance: float
    reference_period: int
    degenerate: bool = False

    @property
    def period_count(self) -> int:
        return len(self.coefficients) + 1


def adjusted_r2(r2: float, n: int, terms: int) -> float:
    """Shrink r2 for model size: 1 - (1 - r2) * (n - 1) / (n - terms)."""
    if n <= terms:
        raise NumericalError(f"adjusted r2 needs n > number of terms, got n={n}, terms={terms}")
    return 1.0 - (1.0 - r2) * (n - 1) / (n - terms)


def solve_with_partial_pivoting(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve a @ x = b by Gaussian elimination with partial pivoting.

    ``b`` may have several right-hand-side columns.  Sized for the small
    dense symmetric systems this package produces.
    """
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    if b.ndim == 1:
        b = b[:, None]
    n = a.shape[0]
    if a.shape != (n, n) or b.shape[0] != n:
        raise ValueError(f"incompatible shapes {a.shape} and {b.shape}")
    scale = np.abs(a).max()
    if scale == 0.0:
        raise NumericalError("singular system: zero matrix")
    for col in range(n):
        pivot = col + int(np.argmax(np.abs(a[col:, col])))
        if abs(a[pivot, col]) < 1e-12 * scale:
            raise NumericalError(f"singular system: no usable pivot in column {col}")
        if pivot != col:
            a[[col, pivot]] = a[[pivot, col]]
            b[[col, pivot]] = b[[pivot, col]]
        factors = a[col + 1 :, col] / a[col, col]
        a[col + 1 :, col:] -= factors[:, None] * a[col, col:]
        b[col + 1 :] -= factors[:, None] * b[col]
    x = np.zeros_like(b)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - a[row, row + 1 :] @ x[row + 1 :]) / a[row, row]
    return x


def ols_dummy_fit(values, design: DummyDesign) -> OlsFit:
    """Fit intercept + per-period offsets by solving the normal equations.

    Coefficient standard errors come from the diagonal of
    residual_se^2 * (X'X)^-1; t statistics use df_residual.  A perfect fit
    or constant response is returned flagged degenerate instead of
    propagating NaNs.
    """
    y = np.asarray(values, dtype=float)
    if y.ndim != 1 or y.size != design.n:
        raise ValueError(f"expected {design.n} response values, got array of shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise NumericalError("response contains non-finite values")
    n, p = design.n, design.period_count
    if n <= p:
        raise NumericalError(f"need more observations than periods: n={n}, periods={p}")

    x = design.matrix()
    gram = x.T @ x
    solution = solve_with_partial_pivoting(gram, np.hstack([(x.T @ y)[:, None], np.eye(p)]))
    beta = solution[:, 0]
    gram_inv = solution[:, 1:]

    fitted = x @ beta
    resid = y - fitted
    y_mean = float(y.mean())
    ss_residual = float(resid @ resid)
    ss_regression = float(((fitted - y_mean) ** 2).sum())
    ss_total = float(((y - y_mean) ** 2).sum())
    df_regression = p - 1
    df_residual = n - p
    ms_residual = ss_residual / df_residual
    residual_se = math.sqrt(ms_residual)

    degenerate = ss_total == 0.0 or ms_residual == 0.0
    if ss_total == 0.0:
        r2, adj = 0.0, 0.0
        f_stat, f_sig = 0.0, 1.0
    else:
        r2 = ss_regression / ss_total
        adj = adjusted_r2(r2, n, p)
        if ms_residual == 0.0:
            f_stat, f_sig = math.inf, 0.0
        else:
            f_stat = (ss_regression / df_regression) / ms_residual
            f_sig = f_tail(f_stat, df_regression, df_residual)

    se = residual_se * np.sqrt(np.diag(gram_inv))

    def stats_for(estimate: float, std_err: float) -> CoefStats:
        if std_err == 0.0:
            if estimate == 0.0:
                return CoefStats(0.0, 0.0, 1.0)
            return CoefStats(0.0, math.copysign(math.inf, estimate), 0.0)
        t = estimate / std_err
        return CoefStats(float(std_err), float(t), t_tail_two_sided(t, df_residual))

    return OlsFit(
        intercept=float(beta[0]),
        coefficients=tuple(float(v) for v in beta[1:]),
        intercept_stats=stats_for(float(beta[0]), float(se[0])),
        coef_stats=tuple(stats_for(float(b), float(s)) for b, s in zip(beta[1:], se[1:])),
        r2=float(r2),
        adj_r2=float(adj),
        residual_se=float(residual_se),
        ss_regression=ss_regression,
        ss_residual=ss_residual,
        ss_total=ss_total,
        df_regression=df_regression,
        df_residual=df_residual,
        f_stat=float(f_stat),
        f_significance=float(f_sig),
        reference_period=design.reference_period,
        degenerate=degenerate,
    )
