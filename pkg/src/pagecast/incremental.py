"""Streaming model: half-overlapping sub-models on a geometric retrain schedule.

The stream is cut into segments of ``Tprime`` observations starting every
``Tprime/2``, so each observation past the first half-segment belongs to
exactly two sub-models.  A sub-model is fully retrained from raw data when
its observation count crosses floor(T0 * (1+gamma)^l) for l up to a cap
(a larger cap for the first segment, which grows from T0 all the way to
Tprime); between retrains, completed Page-matrix columns are appended to its
SVDs incrementally.  Below ``T0`` total observations the model answers with
the running mean of everything seen (fallback mode).
"""

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import InvalidParams, UnknownSeries, UntrainedModel, WidthMismatch
from .estimator import pcr_coefficients
from .ingestion import TimeSeriesBatch
from .svd_engine import append_columns, svd_with_spectrum


class RetrainAction(Enum):
    FALLBACK = "fallback"
    FULL_RETRAIN = "full_retrain"
    INCREMENTAL_UPDATE = "incremental_update"


@dataclass
class HyperParams:
    """Knobs of the incremental scheme.

    T0: minimum observation count before anything is trained.
    Tprime: sub-model span, in observations (N per time step).
    gamma: retrain growth factor in (0, 1].
    L / k1 / k2: optional fixed overrides for the Page-matrix window and
        the mean/variance model ranks (otherwise data-driven).
    coeff_window: how many recent sub-models to average coefficients over.
    """

    T0: int = 100
    Tprime: int = 2_500_000
    gamma: float = 0.5
    L: int | None = None
    k1: int | None = None
    k2: int | None = None
    coeff_window: int = 10

    def __post_init__(self):
        if self.T0 < 1:
            raise InvalidParams(f"T0 must be >= 1, got {self.T0}")
        if self.Tprime < 2 * self.T0:
            raise InvalidParams(
                f"Tprime must be >= 2*T0, got {self.Tprime} < {2 * self.T0}")
        if not 0.0 < self.gamma <= 1.0:
            raise InvalidParams(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.coeff_window < 1:
            raise InvalidParams("coeff_window must be >= 1")
        if self.L is not None and self.L < 2:
            raise InvalidParams("L override must be >= 2")


def submodel_index(tprime_obs: int, Tprime: int) -> int:
    """Index of the older active sub-model after ``tprime_obs`` observations:
    max(0, floor(2 t' / T') - 1)."""
    if tprime_obs < 0:
        raise InvalidParams("observation count must be nonnegative")
    return max(0, (2 * tprime_obs) // Tprime - 1)


def q0_limit(hp: HyperParams) -> int:
    """Largest schedule exponent for the first segment:
    floor(ln(Tprime/T0) / ln(1+gamma))."""
    return int(math.floor(math.log(hp.Tprime / hp.T0) / math.log1p(hp.gamma)))


def q_limit(hp: HyperParams) -> int:
    """Largest schedule exponent for later segments: floor(ln 2 / ln(1+gamma))."""
    return int(math.floor(math.log(2.0) / math.log1p(hp.gamma)))


def retrain_thresholds(hp: HyperParams, first_segment: bool) -> list[int]:
    """Deduplicated schedule points floor(T0 * (1+gamma)^l), l = 0..cap."""
    cap = q0_limit(hp) if first_segment else q_limit(hp)
    out: list[int] = []
    for level in range(cap + 1):
        v = int(math.floor(hp.T0 * (1.0 + hp.gamma) ** level))
        if not out or v > out[-1]:
            out.append(v)
    return out


def retrain_decision(tprime_obs: int, s_i: int, hp: HyperParams) -> RetrainAction:
    """Classify one schedule instant for the segment starting at ``s_i``.

    Fallback below T0 total observations; a full retrain exactly on the
    geometric schedule of the segment's local count; otherwise an
    incremental update.  (The streaming path triggers retrains on the first
    *crossing* of each point so multi-series steps cannot skip them; with
    one series per step the two coincide.)
    """
    if tprime_obs < hp.T0:
        return RetrainAction.FALLBACK
    points = retrain_thresholds(hp, first_segment=(s_i == 0))
    if (tprime_obs - s_i) in points:
        return RetrainAction.FULL_RETRAIN
    return RetrainAction.INCREMENTAL_UPDATE


class _RawWindow:
    """Recent raw steps with amortized O(1) appends and front pruning."""

    def __init__(self, n_series: int):
        self._vals = np.empty((n_series, 64))
        self._mask = np.empty((n_series, 64), dtype=bool)
        self._lo = 0
        self._hi = 0
        self.start_step = 0

    @property
    def n_cols(self) -> int:
        return self._hi - self._lo

    def append(self, values_col: np.ndarray, mask_col: np.ndarray) -> None:
        if self._hi == self._vals.shape[1]:
            self._regrow()
        self._vals[:, self._hi] = values_col
        self._mask[:, self._hi] = mask_col
        self._hi += 1

    def _regrow(self) -> None:
        n = self.n_cols
        cap = max(64, 2 * (n + 1))
        vals = np.empty((self._vals.shape[0], cap))
        mask = np.empty((self._vals.shape[0], cap), dtype=bool)
        vals[:, :n] = self._vals[:, self._lo:self._hi]
        mask[:, :n] = self._mask[:, self._lo:self._hi]
        self._vals, self._mask = vals, mask
        self._lo, self._hi = 0, n

    def prune_before(self, global_step: int) -> None:
        drop = min(global_step - self.start_step, self.n_cols)
        if drop > 0:
            self._lo += drop
            self.start_step += drop

    def slice_steps(self, start: int, end: int) -> tuple[np.ndarray, np.ndarray]:
        """Raw (values, mask) for global steps [start, end)."""
        if start < self.start_step:
            raise InvalidParams(
                f"step {start} already pruned (window starts at {self.start_step})")
        a = self._lo + (start - self.start_step)
        b = self._lo + (end - self.start_step)
        return self._vals[:, a:b], self._mask[:, a:b]

    def tail(self, width: int) -> tuple[np.ndarray, np.ndarray]:
        """Last ``width`` steps, left-padded as missing if not enough."""
        have = min(width, self.n_cols)
        vals = np.full((self._vals.shape[0], width), np.nan)
        mask = np.zeros((self._vals.shape[0], width), dtype=bool)
        if have:
            vals[:, width - have:] = self._vals[:, self._hi - have:self._hi]
            mask[:, width - have:] = self._mask[:, self._hi - have:self._hi]
        return vals, mask

    def state(self) -> tuple[np.ndarray, np.ndarray, int]:
        return (self._vals[:, self._lo:self._hi].copy(),
                self._mask[:, self._lo:self._hi].copy(), self.start_step)

    @classmethod
    def from_state(cls, vals: np.ndarray, mask: np.ndarray,
                   start_step: int) -> "_RawWindow":
        win = cls(vals.shape[0])
        win._vals = vals.copy()
        win._mask = mask.copy()
        win._lo, win._hi = 0, vals.shape[1]
        win.start_step = start_step
        return win


class SubModel:
    """One trained segment: imputation/forecast factors for mean and variance."""

    def __init__(self, index: int, start_step: int, n_series: int,
                 thresholds: list[int]):
        self.index = index
        self.start_step = start_step
        self.N = n_series
        self.steps = 0
        self.pending = list(thresholds)
        self.retrain_history: list[int] = []
        self.L: int | None = None
        self.P = 0
        self.P0 = 0
        self.k1 = 0
        self.k2 = 0
        self.mean_svd = None
        self.var_svd = None
        self.fc_mean_svd = None
        self.fc_var_svd = None
        self.last_row_mean: np.ndarray | None = None
        self.last_row_var: np.ndarray | None = None
        self.beta_mean: np.ndarray | None = None
        self.beta_var: np.ndarray | None = None
        self.buf: np.ndarray | None = None
        self.buf_len = 0

    @property
    def trained(self) -> bool:
        return self.mean_svd is not None

    @property
    def obs_count(self) -> int:
        return self.steps * self.N

    @property
    def start_obs(self) -> int:
        return self.start_step * self.N

    def col_position(self, n: int, j: int) -> int:
        """Physical row of V for per-series column j of series n.

        Full retrains lay columns out series-major; incrementally appended
        blocks arrive time-major (one column per series per block), so the
        two regions index differently.
        """
        if j < self.P0:
            return n * self.P0 + j
        return self.N * self.P0 + (j - self.P0) * self.N + n

    def covers_local_step(self, local: int) -> bool:
        return self.trained and 0 <= local < self.L * self.P


class PredictionModel:
    """Ordered sub-models plus the stream state needed to keep training.

    Writers (insert / create) must be serialized by the caller; readers see
    a consistent object between inserts.
    """

    def __init__(self, names: list[str], hp: HyperParams | None = None,
                 t0: float = 0.0, step: float = 1.0):
        if len(names) < 1:
            raise InvalidParams("need at least one series")
        self.names = list(names)
        self.N = len(names)
        self.hp = hp if hp is not None else HyperParams()
        self.t0 = t0
        self.step = step
        self.n_steps = 0
        self.obs_sum = 0.0
        self.obs_sumsq = 0.0
        self.obs_cnt = 0
        self.half_steps = max(1, self.hp.Tprime // (2 * self.N))
        self.submodels: list[SubModel] = []
        self.raw = _RawWindow(self.N)
        self._coeff_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self.query_stats = {"factor_entries": 0}

    # --- basic state ----------------------------------------------------

    @property
    def total_obs(self) -> int:
        """Observation slots seen so far: N per inserted time step."""
        return self.n_steps * self.N

    @property
    def fallback_mean(self) -> float:
        return self.obs_sum / self.obs_cnt if self.obs_cnt else 0.0

    @property
    def fallback_var(self) -> float:
        if not self.obs_cnt:
            return 0.0
        mu = self.fallback_mean
        return max(0.0, self.obs_sumsq / self.obs_cnt - mu * mu)

    def trained_submodels(self) -> list[SubModel]:
        return [sm for sm in self.submodels if sm.trained]

    @property
    def in_fallback(self) -> bool:
        return self.total_obs < self.hp.T0 or not self.trained_submodels()

    def series_index(self, series) -> int:
        if isinstance(series, str):
            try:
                return self.names.index(series)
            except ValueError:
                raise UnknownSeries(f"no series named {series!r}") from None
        idx = int(series)
        if not 0 <= idx < self.N:
            raise UnknownSeries(f"series index {idx} outside [0, {self.N})")
        return idx

    def segments_for_step(self, step: int) -> list[SubModel]:
        """Sub-models whose segment contains the global step (newest last)."""
        j = step // self.half_steps
        out = []
        for idx in (j - 1, j):
            if 0 <= idx < len(self.submodels):
                out.append(self.submodels[idx])
        return out

    def recent_window(self, width: int) -> tuple[np.ndarray, np.ndarray]:
        """Last ``width`` raw steps (values NaN where missing, plus mask)."""
        return self.raw.tail(width)

    # --- insertion --------------------------------------------------------

    def insert(self, values: np.ndarray, observed: np.ndarray | None = None) -> None:
        """Insert one time step of N values; NaN entries count as missing."""
        values = np.asarray(values, dtype=np.float64).reshape(-1)
        if len(values) != self.N:
            raise WidthMismatch(f"row has {len(values)} values, model has {self.N}")
        if observed is None:
            observed = np.isfinite(values)
        else:
            observed = np.asarray(observed, dtype=bool).reshape(-1)
            if len(observed) != self.N:
                raise WidthMismatch("mask width mismatch")
            observed = observed & np.isfinite(np.where(observed, values, 0.0))
        self._insert_step(values, observed)

    def _insert_step(self, values: np.ndarray, observed: np.ndarray) -> None:
        step = self.n_steps
        if observed.any():
            v = values[observed]
            self.obs_sum += float(v.sum())
            self.obs_sumsq += float((v * v).sum())
            self.obs_cnt += int(observed.sum())
        self.raw.append(np.where(observed, values, np.nan), observed)
        self.n_steps += 1

        newest = step // self.half_steps
        while len(self.submodels) <= newest:
            j = len(self.submodels)
            self.submodels.append(SubModel(
                j, j * self.half_steps, self.N,
                retrain_thresholds(self.hp, first_segment=(j == 0))))
            if len(self.submodels) >= 2:
                keep_from = self.submodels[-2].start_step
                margin = max((sm.L or 2) for sm in self.submodels) + 2
                self.raw.prune_before(max(0, min(keep_from, self.n_steps - margin)))

        zero_row = np.where(observed, values, 0.0)
        for sm in self.segments_for_step(step):
            self._feed(sm, zero_row)

    def _feed(self, sm: SubModel, zero_row: np.ndarray) -> None:
        sm.steps += 1
        if sm.trained:
            sm.buf[:, sm.buf_len] = zero_row
            sm.buf_len += 1

        crossed = [th for th in sm.pending if th <= sm.obs_count]
        if crossed and self._window_for(sm.steps) is not None:
            for th in crossed:
                sm.pending.remove(th)
            self._full_retrain(sm)
            self._coeff_cache.clear()
        elif sm.trained and sm.buf_len == sm.L:
            self._append_block(sm)
            self._coeff_cache.clear()

    def _window_for(self, t_seg: int) -> int | None:
        """Page window for a segment of ``t_seg`` steps, or None if infeasible.

        L = floor(sqrt(N * t_seg / 10)) clamped into [2, t_seg]; a window is
        usable only if the stacked matrix is wide enough (L <= N*floor(t_seg/L)).
        """
        if self.hp.L is not None:
            L = self.hp.L
        else:
            L = int(math.floor(math.sqrt(self.N * t_seg / 10.0)))
            L = max(2, min(L, t_seg))
        if L < 2 or L > t_seg:
            return None
        if L > self.N * (t_seg // L):
            return None
        return L

    def _full_retrain(self, sm: SubModel) -> None:
        vals, mask = self.raw.slice_steps(sm.start_step, self.n_steps)
        t_seg = vals.shape[1]
        L = self._window_for(t_seg)
        zf = np.where(mask, vals, 0.0)
        P = t_seg // L
        span = L * P
        data = np.concatenate(
            [zf[i, :span].reshape(P, L).T for i in range(self.N)], axis=1)
        data_sq = data * data

        mean_svd, _ = svd_with_spectrum(data, self.hp.k1)
        var_svd, _ = svd_with_spectrum(data_sq, self.hp.k2)
        k1, k2 = mean_svd.rank, var_svd.rank
        fc_mean_svd, _ = svd_with_spectrum(data[:-1, :], min(k1, L - 1))
        fc_var_svd, _ = svd_with_spectrum(data_sq[:-1, :], min(k2, L - 1))

        sm.L, sm.P, sm.P0 = L, P, P
        sm.k1, sm.k2 = k1, k2
        sm.mean_svd, sm.var_svd = mean_svd, var_svd
        sm.fc_mean_svd, sm.fc_var_svd = fc_mean_svd, fc_var_svd
        sm.last_row_mean = data[-1, :].copy()
        sm.last_row_var = data_sq[-1, :].copy()
        sm.beta_mean, _ = pcr_coefficients(fc_mean_svd, sm.last_row_mean)
        sm.beta_var, _ = pcr_coefficients(fc_var_svd, sm.last_row_var)
        sm.buf = np.zeros((self.N, L))
        sm.buf_len = t_seg - span
        if sm.buf_len:
            sm.buf[:, :sm.buf_len] = zf[:, span:]
        sm.retrain_history.append(self.total_obs)

    def _append_block(self, sm: SubModel) -> None:
        """Fold the L buffered steps into the factors as N new columns."""
        B = sm.buf.T.copy()
        B_sq = B * B
        sm.mean_svd = append_columns(sm.mean_svd, B, sm.k1)
        sm.var_svd = append_columns(sm.var_svd, B_sq, sm.k2)
        kf1 = min(sm.k1, sm.L - 1)
        kf2 = min(sm.k2, sm.L - 1)
        sm.fc_mean_svd = append_columns(sm.fc_mean_svd, B[:-1, :], kf1)
        sm.fc_var_svd = append_columns(sm.fc_var_svd, B_sq[:-1, :], kf2)
        sm.last_row_mean = np.concatenate([sm.last_row_mean, B[-1, :]])
        sm.last_row_var = np.concatenate([sm.last_row_var, B_sq[-1, :]])
        sm.beta_mean, _ = pcr_coefficients(sm.fc_mean_svd, sm.last_row_mean)
        sm.beta_var, _ = pcr_coefficients(sm.fc_var_svd, sm.last_row_var)
        sm.P += 1
        sm.buf_len = 0

    # --- coefficients -----------------------------------------------------

    def averaged_coefficients(self, window: int | None = None
                              ) -> tuple[np.ndarray, np.ndarray]:
        """Lag-aligned elementwise mean of beta over the last sub-models.

        Sub-models fitted with different windows yield different coefficient
        lengths; shorter vectors are zero-padded at the old-lag end before
        averaging, which treats absent lags as zero coefficients.
        """
        m = self.hp.coeff_window if window is None else window
        if m < 1:
            raise InvalidParams("window must be >= 1")
        if m in self._coeff_cache:
            return self._coeff_cache[m]
        fitted = [sm for sm in self.submodels if sm.beta_mean is not None]
        if not fitted:
            raise UntrainedModel("no trained sub-model")
        last = fitted[-min(m, len(fitted)):]
        width = max(len(sm.beta_mean) for sm in last)
        bm = np.zeros(width)
        bv = np.zeros(width)
        for sm in last:
            pad = width - len(sm.beta_mean)
            bm[pad:] += sm.beta_mean
            bv[pad:] += sm.beta_var
        bm /= len(last)
        bv /= len(last)
        self._coeff_cache[m] = (bm, bv)
        return bm, bv


def create_model(batch: TimeSeriesBatch, hp: HyperParams | None = None) -> PredictionModel:
    """Train a model by replaying the batch one time step at a time.

    Produces state identical to calling :meth:`PredictionModel.insert` for
    every step in order.
    """
    model = PredictionModel(batch.names, hp, t0=batch.t0, step=batch.step)
    values = batch.values
    observed = batch.observed
    for step in range(batch.n_steps):
        model._insert_step(values[:, step].astype(np.float64),
                           observed[:, step])
    return model
