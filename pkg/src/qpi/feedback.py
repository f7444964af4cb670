"""PI controller configuration and the scalar feedback amplitude.

The amplitude ``alpha_p(t) e(t - tau_p) + alpha_i(t) J(t)`` multiplies the
Hermitian feedback generator of each model.  Coefficients are constants or
per-step arrays on the simulation grid.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .stochastic import grid_steps


def from_mixing(theta, f_pi):
    """Split a total strength into ``((1 - theta) f_pi, theta f_pi)``."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"mixing ratio must lie in [0, 1], got {theta}")
    if f_pi < 0:
        raise ValueError("total feedback strength must be non-negative")
    alpha_i = theta * f_pi
    return f_pi - alpha_i, alpha_i


def error_signal(j, g):
    return j - g


def _zero_goal(t):
    return 0.0


@dataclass(frozen=True)
class PIController:
    """Immutable feedback configuration.

    Parameters
    ----------
    alpha_p, alpha_i : float or ndarray
        Proportional and integral gains.  Arrays are indexed by step number.
    tau_p : float
        Delay of the proportional branch.
    tau_i : float
        Integral-filter time (ignored when ``alpha_i`` is zero).
    theta, f_pi : float, optional
        Mixing ratio and total strength when built by :meth:`mixed`.
    goal : callable, optional
        Set point ``g(t)``; defaults to zero.
    """

    alpha_p: object = 0.0
    alpha_i: object = 0.0
    tau_p: float = 0.0
    tau_i: float = 1.0
    theta: Optional[float] = None
    f_pi: Optional[float] = None
    goal: Callable = _zero_goal

    def __post_init__(self):
        if self.tau_p < 0:
            raise ValueError("tau_p must be non-negative")
        if self.tau_i <= 0:
            raise ValueError("tau_i must be positive")
        for name in ("alpha_p", "alpha_i"):
            v = getattr(self, name)
            if np.isscalar(v) and v < 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def mixed(cls, theta, f_pi, **kw):
        ap, ai = from_mixing(theta, f_pi)
        return cls(alpha_p=ap, alpha_i=ai, theta=theta, f_pi=f_pi, **kw)

    def delay_steps(self, dt):
        return grid_steps(self.tau_p, dt, "tau_p")

    def window_steps(self, dt):
        return max(grid_steps(self.tau_i, dt, "tau_i"), 1)

    def gains(self, step=0):
        """Return ``(alpha_p, alpha_i)`` at a grid index."""
        ap, ai = self.alpha_p, self.alpha_i
        if not np.isscalar(ap):
            ap = ap[step]
        if not np.isscalar(ai):
            ai = ai[step]
        return ap, ai


def feedback_amplitude(ctrl, hist, J, t):
    """Scalar multiplying the feedback generator at time ``t``.

    The proportional branch reads the error stored ``tau_p`` ago from
    ``hist`` (zero before the record starts); ``J`` is the current filter
    output.
    """
    step = int(round(t / hist.dt))
    ap, ai = ctrl.gains(step)
    e_delayed = hist.error(ctrl.delay_steps(hist.dt))
    return ap * e_delayed + ai * J
