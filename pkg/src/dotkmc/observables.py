"""Photon-stream accumulators and derived measurement curves.

Photons emitted by a trajectory are folded on the fly into the measurable
quantities: a time-in-period decay histogram of the exciton line, per-class
emission counters, a two-detector coincidence histogram (Hanbury Brown-Twiss
beam-splitter model) and a histogram of dark-run lengths (blinking).

Emission lines of different charge configurations are spectrally distinct, so
the monitored quantities (decay, coincidences, blinking) follow the exciton
line only; the per-class counters see every photon.

Accumulators from independent trajectories merge by element-wise addition.
Coincidence and dark-run statistics are finalized per trajectory: correlations
never span trajectory boundaries.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .kinetics import ExcitonClass, CLASS_INDEX, CLASS_ORDER

__all__ = [
    "PhotonRecord",
    "AccumulatorSet",
    "decay_histogram",
    "emission_probability",
    "g2_correlate",
    "blink_runs",
    "batch_standard_error",
]

DETECTOR_LABELS = ("i", "ii")


@dataclass(frozen=True)
class PhotonRecord:
    """One emitted photon, as forwarded to the sinks."""

    t_abs: float
    t_in_period: float
    cycle_index: int
    exciton_class: ExcitonClass
    detector: int  # 0 -> arm (i), 1 -> arm (ii)

    @property
    def detector_label(self) -> str:
        return DETECTOR_LABELS[self.detector]


class AccumulatorSet:
    """Mergeable histogram set fed by one trajectory at a time.

    Parameters fix the binning up front; merging requires identical binning.
    ``g2_max_lag=None`` disables coincidence collection (the per-photon buffers
    are the only memory cost that grows with trajectory length).
    """

    def __init__(
        self,
        period_t: float,
        *,
        decay_bin: float = 0.05,
        collect_decay: bool = True,
        g2_delta_t: float = 1.0,
        g2_max_lag: float | None = None,
        collect_blink: bool = True,
        batch_cycles: int | None = None,
    ):
        if period_t <= 0.0:
            raise ValueError("period_t must be positive")
        if decay_bin <= 0.0:
            raise ValueError("decay_bin must be positive")
        if g2_delta_t <= 0.0:
            raise ValueError("g2_delta_t must be positive")
        if g2_max_lag is not None and g2_max_lag <= 0.0:
            raise ValueError("g2_max_lag must be positive")
        if batch_cycles is not None and batch_cycles < 1:
            raise ValueError("batch_cycles must be >= 1")
        self.period_t = period_t
        self.decay_bin = decay_bin
        self.collect_decay = collect_decay
        self.g2_delta_t = g2_delta_t
        self.g2_max_lag = g2_max_lag
        self.collect_blink = collect_blink
        self.batch_cycles = batch_cycles
        #: exciton photons per completed batch of ``batch_cycles`` cycles;
        #: blinking correlates emission across periods, so error bars on the
        #: per-cycle rate must come from batch means, not binomial counting
        self.x_batch_counts: list[int] = []

        self.n_decay_bins = int(np.ceil(period_t / decay_bin)) if collect_decay else 0
        self.decay_hist = np.zeros(self.n_decay_bins, dtype=np.int64)
        self.class_counts = np.zeros(len(CLASS_ORDER), dtype=np.int64)
        self.detector_counts = np.zeros(2, dtype=np.int64)
        self.n_cycles_seen = 0
        if g2_max_lag is not None:
            self._g2_lag_bins = int(round(g2_max_lag / g2_delta_t))
            self.g2_hist = np.zeros(2 * self._g2_lag_bins + 1, dtype=np.int64)
        else:
            self._g2_lag_bins = 0
            self.g2_hist = np.zeros(0, dtype=np.int64)
        self.blink_hist: Counter[int] = Counter()

        self._in_trajectory = False
        self._traj_cycles = 0
        self._blink_prev_bright = -1
        self._g2_buf = ([], [])  # X-photon time-bin indices per detector arm

    # -- trajectory lifecycle -------------------------------------------------

    def begin_trajectory(self, n_cycles: int) -> None:
        if self._in_trajectory:
            raise RuntimeError("previous trajectory not finalized")
        if n_cycles < 1:
            raise ValueError("n_cycles must be >= 1")
        span = n_cycles * self.period_t
        if self.g2_max_lag is not None and not self.g2_max_lag < span:
            raise ValueError(
                f"g2_max_lag={self.g2_max_lag} ns exceeds trajectory span {span} ns"
            )
        self._in_trajectory = True
        self._traj_cycles = n_cycles
        self._blink_prev_bright = -1
        self._g2_buf = ([], [])
        if self.batch_cycles is not None:
            self._batch_buf = [0] * (n_cycles // self.batch_cycles)

    def add_photon(self, t_abs, t_in_period, cycle, class_idx, arm) -> None:
        """Record one photon (class_idx indexes CLASS_ORDER, arm is 0 or 1)."""
        self.class_counts[class_idx] += 1
        self.detector_counts[arm] += 1
        if class_idx == 0:  # exciton line
            if self.collect_decay:
                b = int(t_in_period / self.decay_bin)
                if b >= self.n_decay_bins:
                    b = self.n_decay_bins - 1
                self.decay_hist[b] += 1
            if self.g2_max_lag is not None:
                self._g2_buf[arm].append(int(t_abs / self.g2_delta_t))
            if self.collect_blink and cycle != self._blink_prev_bright:
                gap = cycle - self._blink_prev_bright - 1
                if gap > 0:
                    self.blink_hist[gap] += 1
                self._blink_prev_bright = cycle
            if self.batch_cycles is not None:
                b = cycle // self.batch_cycles
                if b < len(self._batch_buf):  # trailing partial batch dropped
                    self._batch_buf[b] += 1

    def end_trajectory(self) -> None:
        if not self._in_trajectory:
            raise RuntimeError("no trajectory in progress")
        if self.collect_blink:
            gap = self._traj_cycles - 1 - self._blink_prev_bright
            if gap > 0:
                self.blink_hist[gap] += 1
        if self.g2_max_lag is not None:
            _accumulate_coincidences(
                self._g2_buf[0], self._g2_buf[1], self._g2_lag_bins, self.g2_hist
            )
        if self.batch_cycles is not None:
            self.x_batch_counts.extend(self._batch_buf)
            self._batch_buf = []
        self.n_cycles_seen += self._traj_cycles
        self._in_trajectory = False
        self._g2_buf = ([], [])

    # -- merging ---------------------------------------------------------------

    def _config(self) -> tuple:
        return (
            self.period_t,
            self.decay_bin,
            self.collect_decay,
            self.g2_delta_t,
            self.g2_max_lag,
            self.collect_blink,
            self.batch_cycles,
        )

    def merge(self, other: "AccumulatorSet") -> "AccumulatorSet":
        """Element-wise sum of two finalized accumulator sets."""
        if self._in_trajectory or other._in_trajectory:
            raise RuntimeError("cannot merge while a trajectory is in progress")
        if self._config() != other._config():
            raise ValueError("accumulator configurations differ")
        out = AccumulatorSet(
            self.period_t,
            decay_bin=self.decay_bin,
            collect_decay=self.collect_decay,
            g2_delta_t=self.g2_delta_t,
            g2_max_lag=self.g2_max_lag,
            collect_blink=self.collect_blink,
            batch_cycles=self.batch_cycles,
        )
        out.decay_hist = self.decay_hist + other.decay_hist
        out.class_counts = self.class_counts + other.class_counts
        out.detector_counts = self.detector_counts + other.detector_counts
        out.g2_hist = self.g2_hist + other.g2_hist
        out.blink_hist = self.blink_hist + other.blink_hist
        out.x_batch_counts = self.x_batch_counts + other.x_batch_counts
        out.n_cycles_seen = self.n_cycles_seen + other.n_cycles_seen
        return out


def _accumulate_coincidences(bins_i, bins_ii, lag_bins, out) -> None:
    """Add the symmetrized cross-arm coincidence counts to ``out``.

    Every pair (photon in arm i at bin p, photon in arm ii at bin q) with
    |q - p| <= lag_bins contributes at both lags q - p and p - q, which makes
    the stored histogram exactly symmetric.
    """
    a = np.asarray(bins_i, dtype=np.int64)
    b = np.asarray(bins_ii, dtype=np.int64)
    if a.size == 0 or b.size == 0:
        return
    chunk = 1 << 15
    width = 2 * lag_bins + 1
    for s in range(0, a.size, chunk):
        blk = a[s : s + chunk]
        lo = np.searchsorted(b, blk - lag_bins, side="left")
        hi = np.searchsorted(b, blk + lag_bins, side="right")
        counts = hi - lo
        total = int(counts.sum())
        if total == 0:
            continue
        starts = np.repeat(lo, counts)
        offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        lags = b[starts + offsets] - np.repeat(blk, counts)
        h = np.bincount(lags + lag_bins, minlength=width)
        out += h
        out += h[::-1]


def decay_histogram(
    acc: AccumulatorSet, p_in: float | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Normalized exciton decay curve vs time in period.

    Counts are divided by (cycles * bin width), and additionally by the mean
    injected pair number ``p_in`` when given (non-resonant runs). Returns
    (bin centers in ns, normalized counts).
    """
    if acc.n_cycles_seen == 0:
        raise ValueError("empty accumulator: no cycles recorded")
    if not acc.collect_decay:
        raise ValueError("accumulator was built without decay collection")
    norm = acc.n_cycles_seen * acc.decay_bin
    if p_in is not None:
        if p_in <= 0.0:
            raise ValueError("p_in must be positive for non-resonant normalization")
        norm *= p_in
    centers = (np.arange(acc.n_decay_bins) + 0.5) * acc.decay_bin
    return centers, acc.decay_hist / norm


def emission_probability(acc: AccumulatorSet, cls: ExcitonClass) -> float:
    """Photons of the given class emitted per excitation cycle."""
    if acc.n_cycles_seen == 0:
        raise ValueError("empty accumulator: no cycles recorded")
    return float(acc.class_counts[CLASS_INDEX[cls]]) / acc.n_cycles_seen


def g2_correlate(
    acc: AccumulatorSet,
    delta_t: float,
    max_lag: float,
    normalization: str = "plateau",
) -> tuple[np.ndarray, np.ndarray]:
    """Second-order correlation curve from the accumulated coincidences.

    ``normalization="raw"`` returns plain coincidence counts; ``"plateau"``
    divides by the mean coincidence level over the outermost lag decade
    (|tau| > max_lag / 10). Returns (tau in ns, curve).
    """
    if acc.g2_max_lag is None:
        raise ValueError("accumulator was built without coincidence collection")
    if delta_t != acc.g2_delta_t or max_lag != acc.g2_max_lag:
        raise ValueError(
            "requested binning differs from the accumulator's "
            f"(delta_t={acc.g2_delta_t}, max_lag={acc.g2_max_lag})"
        )
    lag_bins = acc._g2_lag_bins
    tau = np.arange(-lag_bins, lag_bins + 1) * delta_t
    raw = acc.g2_hist.astype(float)
    if normalization == "raw":
        return tau, raw
    if normalization != "plateau":
        raise ValueError(f"unknown normalization {normalization!r}")
    window = np.abs(tau) > max_lag / 10.0
    plateau = raw[window].mean() if window.any() else 0.0
    if plateau <= 0.0:
        raise ValueError("no coincidences in the plateau window; cannot normalize")
    return tau, raw / plateau


def batch_standard_error(acc: AccumulatorSet) -> float:
    """Standard error of the per-cycle exciton rate from batch means.

    Valid when the batch length exceeds the correlation time of the emission
    record (blinking runs); requires ``batch_cycles`` collection.
    """
    if acc.batch_cycles is None:
        raise ValueError("accumulator was built without batch collection")
    counts = np.asarray(acc.x_batch_counts, dtype=float)
    if counts.size < 2:
        raise ValueError("need at least two completed batches")
    means = counts / acc.batch_cycles
    return float(np.std(means, ddof=1) / np.sqrt(counts.size))


def blink_runs(cycle_indices, n_cycles: int) -> Counter:
    """Histogram of dark-run lengths from the bright-cycle indices.

    A dark run is a maximal block of consecutive cycles without an exciton
    photon; leading and trailing runs count. Returns Counter{length: runs}.
    """
    if n_cycles < 1:
        raise ValueError("n_cycles must be >= 1")
    hist: Counter[int] = Counter()
    prev = -1
    for c in cycle_indices:
        if c < 0 or c >= n_cycles:
            raise ValueError(f"cycle index {c} outside [0, {n_cycles})")
        if c < prev:
            raise ValueError("cycle indices must be sorted ascending")
        if c == prev:
            continue
        gap = c - prev - 1
        if gap > 0:
            hist[gap] += 1
        prev = c
    gap = n_cycles - 1 - prev
    if gap > 0:
        hist[gap] += 1
    return hist
