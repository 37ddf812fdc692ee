"""Batch mean/variance imputation and forecasting on one data segment.

Mean imputation: zero-fill missing entries of the stacked Page matrix,
hard-threshold the SVD to rank k, and read estimates back off the
reconstruction.  Forecasting: drop the last matrix row, regress it on the
de-noised remainder through the truncated factors (principal component
regression, i.e. the minimum-norm least-squares solution on the retained
subspace), then apply the coefficients to the most recent raw window.
Variance estimation runs the same machinery on the squared observations and
subtracts the squared mean estimate, clamped at zero.
"""

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch
from .ingestion import TimeSeriesBatch
from .page_matrix import StackedPageMatrix, build_stacked_page, drop_last_row
from .svd_engine import (
    REL_FLOOR,
    TruncatedSVD,
    svd_with_spectrum,
)


@dataclass
class DenoisedSegment:
    """Rank-k reconstruction of a stacked Page matrix plus its factors."""

    mhat: np.ndarray
    svd: TruncatedSVD
    L: int
    P: int
    N: int


@dataclass
class ImputeResult:
    """Per-(series, time) estimates over a batch.

    ``in_model`` is False for the trailing T mod L observations, which the
    Page matrix cannot represent; those entries of ``values`` carry the raw
    observation (NaN where missing) unchanged.
    """

    values: np.ndarray
    in_model: np.ndarray


@dataclass
class ForecastModel:
    """Linear forecaster: coefficients over the previous L-1 values.

    ``beta[j]`` multiplies the value at lag L-1-j, i.e. ``beta`` pairs
    elementwise with a chronological history window (oldest first).
    ``degenerate`` flags an all-zero training matrix, where beta is 0.
    """

    beta: np.ndarray
    svd_tilde: TruncatedSVD
    L: int
    degenerate: bool = False


@dataclass
class VarianceForecaster:
    """Pair of forecasters tracking the mean and the second moment."""

    mean_model: ForecastModel
    second_moment_model: ForecastModel


def denoise(page: StackedPageMatrix, k: int | None = None) -> DenoisedSegment:
    """Hard singular value thresholding of a stacked Page matrix."""
    svd, _ = svd_with_spectrum(page.data, k)
    return DenoisedSegment(svd.reconstruct(), svd, page.L, page.P, page.N)


def _unstack(mhat: np.ndarray, L: int, P: int, N: int) -> np.ndarray:
    """Inverse of the Page layout: matrix -> (N, L*P) time-ordered values."""
    out = np.empty((N, L * P))
    for n in range(N):
        out[n] = mhat[:, n * P:(n + 1) * P].T.reshape(-1)
    return out


def impute_mean(batch: TimeSeriesBatch, L: int, k: int | None = None) -> ImputeResult:
    """Estimate the latent mean at every in-segment (series, time) point."""
    page = build_stacked_page(batch, L)
    seg = denoise(page, k)
    return _to_result(batch, seg)


def _to_result(batch: TimeSeriesBatch, seg: DenoisedSegment) -> ImputeResult:
    span = seg.L * seg.P
    values = batch.values.copy()
    values[:, :span] = _unstack(seg.mhat, seg.L, seg.P, seg.N)
    in_model = np.zeros_like(batch.observed)
    in_model[:, :span] = True
    return ImputeResult(values, in_model)


def pcr_coefficients(svd_tilde: TruncatedSVD, last_row: np.ndarray) -> tuple[np.ndarray, bool]:
    """Minimum-norm least squares for last_row ~ reconstruction^T @ beta.

    Solved through the truncated factors: beta = U diag(1/s) V^T last_row,
    excluding singular values below REL_FLOOR relative to the largest
    (zero directions contribute nothing).  Returns (beta, degenerate).
    """
    s = svd_tilde.s
    rows = svd_tilde.U.shape[0]
    if s.size == 0 or s[0] <= 0.0:
        return np.zeros(rows), True
    keep = s > REL_FLOOR * s[0]
    z = svd_tilde.V[:, keep].T @ last_row
    beta = svd_tilde.U[:, keep] @ (z / s[keep])
    return beta, False


def fit_forecaster(batch: TimeSeriesBatch, L: int,
                   k: int | None = None) -> ForecastModel:
    """Fit the linear forecaster for one segment.

    The stacked Page matrix loses its last row, the remainder is de-noised
    to rank k, and the raw last row is regressed on it.
    """
    page = build_stacked_page(batch, L)
    z_tilde, z_last = drop_last_row(page)
    cap = None if k is None else min(k, L - 1)
    svd, _ = svd_with_spectrum(z_tilde, cap)
    beta, degenerate = pcr_coefficients(svd, z_last)
    return ForecastModel(beta, svd, L, degenerate)


def forecast_mean(fm: ForecastModel, history: np.ndarray) -> float:
    """One-step forecast: dot product of the chronological history with beta.

    ``history`` holds the most recent L-1 values, oldest first; missing
    entries (NaN) are replaced by zero.
    """
    history = np.asarray(history, dtype=np.float64)
    if history.ndim != 1 or len(history) != len(fm.beta):
        raise LengthMismatch(
            f"history length {history.shape} != {len(fm.beta)}")
    history = np.where(np.isfinite(history), history, 0.0)
    return float(history @ fm.beta)


def impute_variance(batch: TimeSeriesBatch, L: int, k1: int | None = None,
                    k2: int | None = None) -> ImputeResult:
    """Estimate the latent time-varying variance over the segment.

    Subtracts the squared mean reconstruction from the second-moment
    reconstruction, entrywise, clamped at zero.  k1 ranks the mean model,
    k2 the squared-observation model.
    """
    page = build_stacked_page(batch, L)
    page_sq = build_stacked_page(batch, L, square=True)
    seg_mean = denoise(page, k1)
    seg_sq = denoise(page_sq, k2)
    var = np.clip(seg_sq.mhat - seg_mean.mhat**2, 0.0, None)
    span = seg_mean.L * seg_mean.P
    values = np.full_like(batch.values, np.nan)
    values[:, :span] = _unstack(var, seg_mean.L, seg_mean.P, seg_mean.N)
    in_model = np.zeros_like(batch.observed)
    in_model[:, :span] = True
    return ImputeResult(values, in_model)


def fit_variance_forecaster(batch: TimeSeriesBatch, L: int,
                            k1: int | None = None,
                            k2: int | None = None) -> VarianceForecaster:
    """Fit the forecaster pair (raw series and squared series)."""
    mean_model = fit_forecaster(batch, L, k1)
    squared = TimeSeriesBatch(list(batch.names),
                              np.where(batch.observed, batch.values, 0.0)**2,
                              batch.observed.copy(), batch.t0, batch.step)
    second_model = fit_forecaster(squared, L, k2)
    return VarianceForecaster(mean_model, second_model)


def forecast_variance(vf: VarianceForecaster, history: np.ndarray) -> float:
    """One-step variance forecast from the raw (unsquared) history window."""
    history = np.asarray(history, dtype=np.float64)
    history = np.where(np.isfinite(history), history, 0.0)
    mean = forecast_mean(vf.mean_model, history)
    second = forecast_mean(vf.second_moment_model, history**2)
    return max(0.0, second - mean * mean)
