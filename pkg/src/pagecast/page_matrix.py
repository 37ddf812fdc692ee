"""Stacked Page matrix construction and coordinate mapping.

A length-T series reshapes into an L x P matrix (P = floor(T/L)) whose
column j holds observations (j-1)L+1 .. jL; the per-series matrices are
then concatenated column-wise, so series n occupies columns
(n-1)P+1 .. nP of the stacked L x NP matrix.  Missing entries are filled
with zero and tracked in a boolean ``filled`` mask.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidL, OutOfRange, TooFewRows
from .ingestion import TimeSeriesBatch


@dataclass
class StackedPageMatrix:
    """L x (N*P) stacked Page matrix with a fill mask.

    ``data[i, j]`` is zero wherever ``filled[i, j]`` is False.  ``P`` is the
    per-series column count, so the stacked width is N*P.
    """

    data: np.ndarray
    filled: np.ndarray
    L: int
    P: int
    N: int

    @property
    def width(self) -> int:
        return self.N * self.P

    def series_block(self, n: int) -> np.ndarray:
        """Columns belonging to series ``n`` (0-based)."""
        return self.data[:, n * self.P:(n + 1) * self.P]


def build_stacked_page(batch: TimeSeriesBatch, L: int,
                       square: bool = False) -> StackedPageMatrix:
    """Reshape a batch into its stacked Page matrix.

    Uses the first L*floor(T/L) observations of each series; the trailing
    T mod L observations are excluded (callers that forecast keep the raw
    tail separately).  With ``square=True`` the observed entries are squared
    first.  Missing entries become 0 with ``filled`` False.
    """
    n, t = batch.values.shape
    p = t // L if L >= 1 else 0
    if L < 1 or p < 1:
        raise InvalidL(f"L={L} invalid for T={t}: need 1 <= L <= T")
    span = L * p
    vals = batch.zero_filled()[:, :span]
    if square:
        vals = vals * vals
    mask = batch.observed[:, :span]
    # (n, p, L) -> per-series column-major blocks, stacked along series.
    data = np.concatenate([vals[i].reshape(p, L).T for i in range(n)], axis=1)
    filled = np.concatenate([mask[i].reshape(p, L).T for i in range(n)], axis=1)
    return StackedPageMatrix(np.ascontiguousarray(data),
                             np.ascontiguousarray(filled), L, p, n)


def coords_of(t: int, n: int, L: int, P: int) -> tuple[int, int]:
    """Map 1-based (time t, series n) to 1-based (row, column).

    Inverse of the layout used by :func:`build_stacked_page`:
    row = ((t-1) mod L) + 1, col = floor((t-1)/L) + 1 + P*(n-1).
    """
    if not 1 <= t <= L * P:
        raise OutOfRange(f"t={t} outside [1, {L * P}]")
    if n < 1:
        raise OutOfRange(f"series index n={n} must be >= 1")
    row = (t - 1) % L + 1
    col = (t - 1) // L + 1 + P * (n - 1)
    return row, col


def drop_last_row(m: StackedPageMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Split the matrix into its first L-1 rows and its last row."""
    if m.L < 2:
        raise TooFewRows("need at least 2 rows to drop one")
    return m.data[:-1, :], m.data[-1, :]
