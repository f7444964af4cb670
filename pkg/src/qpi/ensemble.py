"""Seeded trajectory ensembles and their time-series statistics.

Trajectory ``i`` draws its noise from ``numpy.random.default_rng(base_seed + i)``.
Trajectories are simulated in fixed-size blocks; block results are merged in
index order with the pairwise mean/variance update, so the output does not
depend on how many worker processes ran the blocks.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)


class EnsembleError(RuntimeError):
    """A trajectory block failed; carries the affected seed range."""


@dataclass(frozen=True)
class EnsembleConfig:
    n_traj: int
    base_seed: int
    dt: float
    t_final: float
    output_stride: int = 1
    batch_size: int = 250
    workers: int = 1
    window: tuple = None

    def __post_init__(self):
        if self.n_traj < 1:
            raise ValueError("n_traj must be positive")
        if self.output_stride < 1:
            raise ValueError("output_stride must be >= 1")
        if self.dt <= 0 or self.t_final <= 0:
            raise ValueError("dt and t_final must be positive")

    @property
    def n_steps(self):
        return int(round(self.t_final / self.dt))

    @property
    def times(self):
        n_out = self.n_steps // self.output_stride + 1
        return np.arange(n_out) * self.output_stride * self.dt

    def seeds(self):
        return np.arange(self.n_traj) + self.base_seed


def noise_blocks(seeds, dt, n_steps, chunk=2000):
    """Yield ``(n_chunk, B)`` Wiener increments, one independent stream per seed."""
    gens = [np.random.default_rng(int(s)) for s in seeds]
    sd = np.sqrt(dt)
    done = 0
    while done < n_steps:
        m = min(chunk, n_steps - done)
        block = np.empty((m, len(gens)))
        for b, g in enumerate(gens):
            block[:, b] = g.normal(0.0, sd, m)
        yield block
        done += m


def aggregate(samples, axis=-1):
    """Sample mean and ``n-1`` standard deviation; a single sample has std 0."""
    x = np.asarray(samples, dtype=float)
    n = x.shape[axis]
    if n == 0:
        raise ValueError("cannot aggregate an empty sample")
    mean = x.mean(axis=axis)
    if n == 1:
        return mean, np.zeros_like(mean)
    return mean, x.std(axis=axis, ddof=1)


@dataclass
class _Moments:
    n: int
    mean: np.ndarray
    m2: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def of(cls, x):
        # x: (n_out, B)
        mean = x.mean(axis=1)
        return cls(x.shape[1], mean, ((x - mean[:, None]) ** 2).sum(axis=1),
                   x.min(axis=1), x.max(axis=1))

    def merge(self, other):
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.n / n)
        m2 = self.m2 + other.m2 + delta ** 2 * (self.n * other.n / n)
        return _Moments(n, mean, m2, np.minimum(self.lo, other.lo),
                        np.maximum(self.hi, other.hi))


@dataclass
class EnsembleStats:
    """Per-output-time aggregates plus per-trajectory steady-window means.

    ``window_means[name]`` holds, for every trajectory, the time average of
    the observable over ``window`` (empty when no window was requested).
    ``first[name]`` is the series of trajectory 0.
    """

    times: np.ndarray
    mean: dict
    std: dict
    n_traj: int
    base_seed: int
    window: tuple = None
    window_means: dict = field(default_factory=dict)
    first: dict = field(default_factory=dict)
    minimum: dict = field(default_factory=dict)
    maximum: dict = field(default_factory=dict)

    def window_mask(self, window=None):
        lo, hi = self.window if window is None else window
        return (self.times >= lo - 1e-9) & (self.times <= hi + 1e-9)

    def steady_mean_se(self, name):
        """Standard error of the window-averaged mean from per-trajectory averages."""
        w = self.window_means[name]
        if len(w) < 2:
            return 0.0
        return float(np.std(w, ddof=1) / np.sqrt(len(w)))


def _window_mask(times, window):
    if window is None:
        return None
    lo, hi = window
    mask = (times >= lo - 1e-9) & (times <= hi + 1e-9)
    if not mask.any():
        raise ValueError(f"window {window} contains no output times")
    return mask


def _run_block(simulate_block, seeds):
    return simulate_block(seeds)


def run_ensemble(simulate_block, ens):
    """Run ``ens.n_traj`` trajectories and aggregate every observable.

    Parameters
    ----------
    simulate_block : callable
        ``simulate_block(seeds) -> {name: (n_out, B) array}``.  Must be
        picklable when ``ens.workers > 1``.
    ens : EnsembleConfig
    """
    seeds = ens.seeds()
    times = ens.times
    mask = _window_mask(times, ens.window)
    blocks = [seeds[i:i + ens.batch_size] for i in range(0, len(seeds), ens.batch_size)]

    def results():
        if ens.workers > 1 and len(blocks) > 1:
            with ProcessPoolExecutor(ens.workers) as pool:
                futures = [pool.submit(_run_block, simulate_block, b) for b in blocks]
                for b, fut in zip(blocks, futures):
                    yield b, fut
        else:
            for b in blocks:
                yield b, None

    moments = {}
    wmeans = {}
    first = {}
    for b, fut in results():
        try:
            out = fut.result() if fut is not None else simulate_block(b)
        except Exception as exc:
            raise EnsembleError(
                f"trajectories with seeds {b[0]}..{b[-1]} failed: {exc}") from exc
        for name, arr in out.items():
            arr = np.asarray(arr, dtype=float)
            if arr.shape[0] != len(times):
                raise EnsembleError(f"observable {name} has {arr.shape[0]} samples, "
                                    f"expected {len(times)}")
            m = _Moments.of(arr)
            moments[name] = m if name not in moments else moments[name].merge(m)
            if name not in first:
                first[name] = arr[:, 0].copy()
            if mask is not None:
                wmeans.setdefault(name, []).append(arr[mask].mean(axis=0))
    mean = {k: v.mean for k, v in moments.items()}
    if ens.n_traj > 1:
        std = {k: np.sqrt(np.maximum(v.m2, 0) / (v.n - 1)) for k, v in moments.items()}
    else:
        std = {k: np.zeros_like(v.mean) for k, v in moments.items()}
    wm = {k: np.concatenate(v) for k, v in wmeans.items()}
    return EnsembleStats(times, mean, std, ens.n_traj, ens.base_seed, ens.window, wm, first,
                         {k: v.lo for k, v in moments.items()},
                         {k: v.hi for k, v in moments.items()})


def steady_window_summary(stats, window=None):
    """Per observable: window average of the mean series and max std in the window."""
    lo, hi = stats.window if window is None else window
    spacing = stats.times[1] - stats.times[0] if len(stats.times) > 1 else 0.0
    if lo > hi or lo < stats.times[0] - 1e-9 or hi > stats.times[-1] + spacing + 1e-9:
        raise ValueError(f"window ({lo}, {hi}) outside simulated range")
    mask = stats.window_mask((lo, hi))
    if not mask.any():
        raise ValueError("window contains no output times")
    return {name: (float(stats.mean[name][mask].mean()), float(stats.std[name][mask].max()))
            for name in stats.mean}


def window_slope(stats, name, window=None):
    """Least-squares slope of the mean series of ``name`` over the window.

    A steady window should show ``|slope| < 1e-3`` per unit time.
    """
    mask = stats.window_mask(window)
    t = stats.times[mask]
    if len(t) < 2:
        return 0.0
    return float(np.polyfit(t, stats.mean[name][mask], 1)[0])
