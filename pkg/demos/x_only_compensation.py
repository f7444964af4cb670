"""Stabilising the oscillator when only position can be actuated.

Without a momentum drive the thermal damping cannot be cancelled, so the
ensemble settles at a fraction alpha of the requested quadratures.  The
fraction follows from the steady conditional variance; dividing the targets
by it removes the bias.  Feedback uses the position error from a quarter
period earlier as a stand-in for momentum, so mistiming that delay by
epsilon shows up directly as bias.

Run with ``python demos/x_only_compensation.py`` (about a minute).
"""

import math

from qpi import oscillator as osc
from qpi.ensemble import EnsembleConfig, run_ensemble, steady_window_summary

MODEL = osc.OscillatorModel()
T = MODEL.period
DT = T / 500
T_FINAL = 400.0
N_TRAJ = 300


def steady(strategy, alpha, **kw):
    run = osc.OscillatorRun(MODEL, osc.ControlGoal(6.0, 4.0, alpha), strategy, DT, T_FINAL,
                            **kw)
    stride = 10
    stats = run_ensemble(osc.OscillatorBlock(run, stride),
                         EnsembleConfig(N_TRAJ, 0, DT, T_FINAL, stride, window=(300.0, 400.0)))
    s = steady_window_summary(stats)
    bias = math.hypot(s["dX"][0], s["dP"][0])
    err = math.sqrt(s["err2"][0])
    return s["X"][0], s["P"][0], bias, max(s["X"][1], s["P"][1]), err


def main():
    table = osc.second_moments_evolve(MODEL, dt=DT, t_final=T_FINAL + DT)
    alpha = osc.compensation_factor(MODEL, table)
    print(f"Compensation factor alpha = {alpha:.5f} (from Vx = {table.steady[0]:.4f})\n")

    print("Quarter-period delayed P feedback, targets (6, 4)")
    for label, a in (("uncompensated", 1.0), ("compensated", alpha)):
        X, P, bias, sd, _ = steady("x_P", a, tau_p=T / 4)
        print(f"  {label:<14} X={X:.3f}  P={P:.3f}  bias {bias:.3f}  max std {sd:.3f}")

    print("\nMistimed delay T/4 + epsilon, compensated")
    for frac in (0.0, 0.05, 0.1, 0.2):
        _, _, bias, sd, _ = steady("x_P", alpha, tau_p=T / 4 + frac * T)
        print(f"  epsilon {frac:.2f}T: bias {bias:.3f}  max std {sd:.3f}")

    print("\nControl error sqrt(<m w dX^2 + dP^2 / m w> / 2), compensated")
    for label, strategy, kw in (("P", "x_P", dict(tau_p=T / 4)),
                                ("I", "x_I", dict(tau_i=T / 2)),
                                ("PI theta=0.8", "x_PI", dict(tau_p=T / 4, tau_i=T / 2,
                                                              theta=0.8))):
        *_, err = steady(strategy, alpha, **kw)
        print(f"  {label:<13} {err:.4f}")


if __name__ == "__main__":
    main()
