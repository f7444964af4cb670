"""Wiener increments, step-indexed history buffers and integral filters.

Everything here lives on a uniform time grid ``t_n = n * dt``.  Delays and
filter windows are stored as whole numbers of steps; see :func:`grid_steps`.
Buffers and filters carry an optional trailing batch shape so the same code
serves one trajectory or a vectorised block of them.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

EXPONENTIAL = "exponential"
MODULATED = "modulated"


def sample_increment(rng, dt, size=None):
    """Draw Wiener increments with mean 0 and variance ``dt``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return rng.normal(0.0, math.sqrt(dt), size)


_warned = set()


def grid_steps(tau, dt, name="tau"):
    """Round a duration to a whole number of steps.

    A warning records requested and effective values when the relative
    rounding error exceeds 1e-9.
    """
    if tau < 0:
        raise ValueError(f"{name} must be non-negative")
    n = int(round(tau / dt))
    eff = n * dt
    if tau > 0 and abs(eff - tau) > 1e-9 * tau and (name, tau, dt) not in _warned:
        _warned.add((name, tau, dt))
        logger.warning("%s=%r is not a multiple of dt=%r; using %r (%d steps)",
                       name, tau, dt, eff, n)
    return n


class NoiseHistory:
    """Ring buffer of past increments and error-signal samples.

    Parameters
    ----------
    dt : float
        Grid spacing.
    capacity : int
        Largest lag (in steps) that can be looked up.  A window of ``W``
        samples needs ``capacity >= W - 1``; a delay of ``d`` steps needs
        ``capacity >= d``.
    batch_shape : tuple, optional
        Trailing shape of each stored sample.

    Notes
    -----
    Lag 0 is the sample pushed most recently.  Lags reaching before the first
    push return zeros, which is the pre-history convention used throughout.
    """

    def __init__(self, dt, capacity, batch_shape=()):
        if dt <= 0:
            raise ValueError("dt must be positive")
        if capacity < 0:
            raise ValueError("capacity must be non-negative")
        self.dt = float(dt)
        self.capacity = int(capacity)
        self.batch_shape = tuple(batch_shape)
        size = self.capacity + 1
        self._dw = np.zeros((size,) + self.batch_shape)
        self._err = np.zeros((size,) + self.batch_shape)
        self.count = 0

    @classmethod
    def for_window(cls, dt, tau_i=0.0, tau_p=0.0, batch_shape=()):
        """Buffer sized for ``max(tau_i, tau_p)``."""
        cap = max(grid_steps(tau_i, dt, "tau_i"), grid_steps(tau_p, dt, "tau_p"))
        return cls(dt, cap, batch_shape)

    @property
    def depth(self):
        """Number of valid samples currently held."""
        return min(self.count, self.capacity + 1)

    @property
    def time(self):
        """Grid time of the most recent sample."""
        return (self.count - 1) * self.dt

    def push(self, dw, err=0.0):
        i = self.count % (self.capacity + 1)
        self._dw[i] = dw
        self._err[i] = err
        self.count += 1

    def _lookup(self, buf, lag):
        if lag < 0 or lag > self.capacity:
            raise IndexError(f"lag {lag} outside buffer capacity {self.capacity}")
        if lag >= self.count:
            return np.zeros(self.batch_shape) if self.batch_shape else 0.0
        return buf[(self.count - 1 - lag) % (self.capacity + 1)]

    def increment(self, lag=0):
        return self._lookup(self._dw, lag)

    def error(self, lag=0):
        return self._lookup(self._err, lag)

    def errors(self, n):
        """Last ``n`` error samples, most recent first, zero-filled."""
        return np.stack([self.error(l) for l in range(n)])


def delayed_increment(hist, tau_p):
    """Return ``dW(t - tau_p)`` from the history, zero before the record starts."""
    lag = grid_steps(tau_p, hist.dt, "tau_p")
    if lag > hist.capacity:
        raise IndexError(f"delay of {lag} steps exceeds buffer capacity {hist.capacity}")
    return hist.increment(lag)


@dataclass(frozen=True)
class FilterSpec:
    """Integral-filter kernel.

    ``kind`` is ``"exponential"`` for the truncated exponential window or
    ``"modulated"`` for a boxcar window multiplied by ``cos`` or ``sin`` of
    ``omega * s``.  The ``sin`` variant is scaled by ``m * omega``.
    """

    kind: str
    tau_i: float
    omega: float = 1.0
    quadrature: str = "cos"
    m: float = 1.0

    def __post_init__(self):
        if self.kind not in (EXPONENTIAL, MODULATED):
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if self.tau_i <= 0:
            raise ValueError("tau_i must be positive")
        if self.quadrature not in ("cos", "sin"):
            raise ValueError("quadrature must be 'cos' or 'sin'")

    def window(self, dt):
        return max(grid_steps(self.tau_i, dt, "tau_i"), 1)


def filter_evaluate(hist, spec, goal_samples=None):
    """Direct window sum of the filter over the stored error samples.

    Parameters
    ----------
    hist : NoiseHistory
        Must hold at least one sample; its ``error`` buffer supplies ``e(s)``.
    spec : FilterSpec
    goal_samples : array_like, optional
        Values subtracted from the stored samples, most recent first.  Use
        this when the buffer holds raw currents rather than errors.

    Returns
    -------
    float or ndarray
        ``(1/tau_i) * sum_l e(t - l dt) * w_l * dt`` over the last
        ``W = tau_i / dt`` samples (lag ``l = 0 .. W-1``).
    """
    if hist.count == 0:
        raise ValueError("filter needs at least one stored sample")
    dt = hist.dt
    W = spec.window(dt)
    if W - 1 > hist.capacity:
        raise IndexError("filter window exceeds buffer capacity")
    e = hist.errors(W)
    if goal_samples is not None:
        g = np.asarray(goal_samples, dtype=float)[:W]
        e = e - g.reshape(g.shape + (1,) * (e.ndim - 1))
    lags = np.arange(W)
    valid = (lags < hist.count).astype(float)
    if spec.kind == EXPONENTIAL:
        w = np.exp(-lags * dt / spec.tau_i)
    else:
        s = (hist.count - 1 - lags) * dt
        if spec.quadrature == "cos":
            w = np.cos(spec.omega * s)
        else:
            w = spec.m * spec.omega * np.sin(spec.omega * s)
    w = w * valid
    return np.tensordot(w, e, axes=(0, 0)) * dt / spec.tau_i


class ExponentialFilter:
    """O(1) recursive form of the truncated exponential window.

    After ``update(e_n)`` the value equals
    ``(dt/tau) * sum_{l<W} exp(-l dt/tau) e_{n-l}``, identical to
    :func:`filter_evaluate` on the same samples.  The value before the first
    update is 0.
    """

    def __init__(self, tau_i, dt, batch_shape=()):
        self.dt = float(dt)
        self.tau_i = float(tau_i)
        self.W = max(grid_steps(tau_i, dt, "tau_i"), 1)
        self.decay = math.exp(-self.dt / self.tau_i)
        self.tail = math.exp(-self.W * self.dt / self.tau_i)
        self._buf = np.zeros((self.W,) + tuple(batch_shape))
        self.value = np.zeros(batch_shape) if batch_shape else 0.0
        self.count = 0

    def update(self, e):
        i = self.count % self.W
        old = self._buf[i]
        # the sample leaving the window carries weight exp(-W dt / tau)
        self.value = self.decay * self.value + (self.dt / self.tau_i) * (e - self.tail * old)
        self._buf[i] = e
        self.count += 1
        return self.value


class ModulatedFilter:
    """Running boxcar sums of ``e(s) cos(omega s)`` and ``e(s) sin(omega s)``.

    ``update(e, t)`` returns ``(J_X, J_P)`` with
    ``J_X = (1/tau) sum e cos(omega s) dt`` and
    ``J_P = (m omega/tau) sum e sin(omega s) dt`` over the last ``W`` samples.
    """

    def __init__(self, tau_i, dt, omega, m=1.0, batch_shape=()):
        self.dt = float(dt)
        self.tau_i = float(tau_i)
        self.omega = float(omega)
        self.m = float(m)
        self.W = max(grid_steps(tau_i, dt, "tau_i"), 1)
        shape = (self.W,) + tuple(batch_shape)
        self._c = np.zeros(shape)
        self._s = np.zeros(shape)
        self.sum_c = np.zeros(batch_shape)
        self.sum_s = np.zeros(batch_shape)
        self.count = 0

    def update(self, e, t):
        i = self.count % self.W
        ec = e * math.cos(self.omega * t)
        es = e * math.sin(self.omega * t)
        self.sum_c = self.sum_c + ec - self._c[i]
        self.sum_s = self.sum_s + es - self._s[i]
        self._c[i] = ec
        self._s[i] = es
        self.count += 1
        return self.values()

    def values(self):
        jx = self.sum_c * self.dt / self.tau_i
        jp = self.m * self.omega * self.sum_s * self.dt / self.tau_i
        return jx, jp


def momentum_estimator(Jx, Jp, t, m, omega):
    """Combine quadrature filters into a lab-frame momentum error estimate."""
    return -m * omega * Jx * np.sin(omega * t) + Jp * np.cos(omega * t)
