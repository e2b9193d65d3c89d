"""Balanced two-factor analysis of variance with replication."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .tails import f_tail


@dataclass(frozen=True)
class FactorialSample:
    """Fully populated a x b x r array of observations (a, b, r all >= 2)."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 3:
            raise NumericalError(f"factorial sample must be 3-dimensional, got shape {arr.shape}")
        a, b, r = arr.shape
        if a < 2 or b < 2 or r < 2:
            raise NumericalError(
                f"need at least 2 levels per factor and 2 replicates, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)):
            raise NumericalError("factorial sample contains non-finite values")
        object.__setattr__(self, "values", arr)

    @property
    def levels_a(self) -> int:
        return self.values.shape[0]

    @property
    def levels_b(self) -> int:
        return self.values.shape[1]

    @property
    def replicates(self) -> int:
        return self.values.shape[2]


@dataclass(frozen=True)
class AnovaRow:
    source: str
    ss: float
    df: int
    ms: float | None = None
    f: float | None = None
    p: float | None = None


@dataclass(frozen=True)
class AnovaTable:
    factor_a: AnovaRow
    factor_b: AnovaRow
    interaction: AnovaRow
    error: AnovaRow
    total: AnovaRow
    degenerate: bool = False

    def __post_init__(self):
        parts = self.factor_a.ss + self.factor_b.ss + self.interaction.ss + self.error.ss
        scale = max(abs(self.total.ss), 1.0)
        if abs(parts - self.total.ss) > 1e-6 * scale:
            raise NumericalError(
                f"sum-of-squares decomposition does not add up: {parts} vs {self.total.ss}"
            )
        df_parts = self.factor_a.df + self.factor_b.df + self.interaction.df + self.error.df
        if df_parts != self.total.df:
            raise NumericalError(f"degrees of freedom do not add up: {df_parts} vs {self.total.df}")

    def rows(self) -> tuple[AnovaRow, ...]:
        return (self.factor_a, self.factor_b, self.interaction, self.error, self.total)

    def to_json_dict(self) -> dict:
        rows = []
        for row in self.rows():
            item: dict = {"source": row.source, "ss": row.ss, "df": row.df}
            if row.ms is not None:
                item["ms"] = row.ms
            if row.f is not None:
                item["f"] = row.f
                item["p"] = row.p
            rows.append(item)
        return {"rows": rows, "degenerate": self.degenerate}


def two_way_anova(
    sample: FactorialSample, name_a: str = "factor_a", name_b: str = "factor_b"
) -> AnovaTable:
    """Decompose a balanced replicated two-factor sample into SS/df/MS/F/p rows.

    With cell means m_ij, level means m_i. and m_.j, and grand mean m:
    SS_A = br * sum_i (m_i. - m)^2, SS_B = ar * sum_j (m_.j - m)^2,
    SS_AB = r * sum_ij (m_ij - m_i. - m_.j + m)^2, SS_E = sum (y - m_ij)^2.
    F ratios use the error mean square; a zero error mean square is reported
    as F = inf with p = 0 and the table flagged degenerate.
    """
    y = sample.values
    a, b, r = y.shape
    grand = float(y.mean())
    mean_a = y.mean(axis=(1, 2))
    mean_b = y.mean(axis=(0, 2))
    mean_cell = y.mean(axis=2)

    ss_a = float(b * r * ((mean_a - grand) ** 2).sum())
    ss_b = float(a * r * ((mean_b - grand) ** 2).sum())
    ss_ab = float(r * ((mean_cell - mean_a[:, None] - mean_b[None, :] + grand) ** 2).sum())
    ss_e = float(((y - mean_cell[:, :, None]) ** 2).sum())
    ss_t = float(((y - grand) ** 2).sum())

    df_a = a - 1
    df_b = b - 1
    df_ab = df_a * df_b
    df_e = a * b * (r - 1)
    df_t = a * b * r - 1

    ms_e = ss_e / df_e
    degenerate = ms_e == 0.0

    def effect_row(source: str, ss: float, df: int) -> AnovaRow:
        ms = ss / df
        if degenerate:
            return AnovaRow(source, ss, df, ms, math.inf, 0.0)
        f = ms / ms_e
        return AnovaRow(source, ss, df, ms, f, f_tail(f, df, df_e))

    return AnovaTable(
        factor_a=effect_row(name_a, ss_a, df_a),
        factor_b=effect_row(name_b, ss_b, df_b),
        interaction=effect_row("interaction", ss_ab, df_ab),
        error=AnovaRow("error", ss_e, df_e, ms_e),
        total=AnovaRow("total", ss_t, df_t),
        degenerate=degenerate,
    )
