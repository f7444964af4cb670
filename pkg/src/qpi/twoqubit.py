"""Two qubits under half-parity measurement and collective-x feedback.

The conditional state obeys the Ito equation

    d rho = { -i[H, rho] + k D[Lz] rho + (feedback drift) } dt + (innovation) dW

with ``H = h1 sz1 + h2 sz2``, measurement operator ``c = sqrt(k) Lz`` and
feedback generator ``Lx``.  The goal is ``g = <T_0|Lz|T_0> = 0`` so the
error signal equals the current ``j = 2<Lz> + dW / (dt sqrt(k eta))``.

Two layers live here.  Single-trajectory steppers work on 4x4 matrices and
mirror the equations term by term; :class:`TwoQubitEngine` advances a block
of trajectories at once using real superoperator matrices and is what the
ensemble runs use.  A third, independent stepper in the triplet basis
(:func:`triplet_component_step`) serves as a cross-check.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import quantum as q
from .feedback import PIController
from .stochastic import ExponentialFilter, NoiseHistory

LABELS = ("m", "0", "p", "S")


@dataclass(frozen=True)
class TwoQubitModel:
    """Local fields ``h1, h2``, measurement rate ``k`` and efficiency ``eta``."""

    h1: float = 0.1
    h2: float = 0.1
    k: float = 1.0
    eta: float = 0.4
    Lx: np.ndarray = field(init=False, repr=False, compare=False)
    Lz: np.ndarray = field(init=False, repr=False, compare=False)
    H: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("measurement rate k must be positive")
        if not 0 < self.eta <= 1:
            raise ValueError("efficiency eta must lie in (0, 1]")
        Lx, Lz = q.collective_spin()
        ops = q.two_qubit_ops()
        object.__setattr__(self, "Lx", Lx)
        object.__setattr__(self, "Lz", Lz)
        object.__setattr__(self, "H", self.h1 * ops["sz1"] + self.h2 * ops["sz2"])

    @property
    def c(self):
        return math.sqrt(self.k) * self.Lz

    @property
    def noise_scale(self):
        """``sqrt(k eta)``, the signal-to-noise factor of the current."""
        return math.sqrt(self.k * self.eta)


def measurement_current(model, rho, dW, dt):
    """Homodyne current ``2<Lz> + (dW/dt) / sqrt(k eta)``."""
    lz = q.expectation(model.Lz, rho).real
    return 2 * lz + dW / (dt * model.noise_scale)


def _base_drift(model, rho):
    return -1j * q.commutator(model.H, rho) + model.k * q.dissipator(model.Lz, rho)


def _markov_feedback_drift(model, alpha_p, rho):
    Lx, Lz = model.Lx, model.Lz
    return (-1j * alpha_p * q.commutator(Lx, Lz @ rho + rho @ Lz)
            + alpha_p ** 2 / (model.k * model.eta) * q.dissipator(Lx, rho))


def step_no_delay(model, ctrl, rho, hist, J, dt):
    """Euler-Maruyama step with instantaneous proportional feedback.

    Uses the increment pushed most recently into ``hist``.  ``J`` is the
    integral-filter value built from samples strictly before this step.
    """
    if ctrl.tau_p != 0:
        raise ValueError("step_no_delay needs tau_p = 0")
    step = int(round(hist.time / dt))
    ap, ai = ctrl.gains(step)
    dW = hist.increment(0)
    s = model.noise_scale
    drift = (_base_drift(model, rho) + _markov_feedback_drift(model, ap, rho)
             - 1j * ai * J * q.commutator(model.Lx, rho))
    A = s * model.Lz - 1j * (ap / s) * model.Lx
    rho = rho + drift * dt + q.innovation(A, rho) * dW
    return q.normalize(rho)


def step_with_delay(model, ctrl, rho, hist, J, dt):
    """Euler-Maruyama step with the proportional branch delayed by ``tau_p``.

    Before one full delay has elapsed no delayed current exists, so the whole
    proportional branch (kick and its ``D[Lx]`` companion) is switched off.
    """
    d = ctrl.delay_steps(dt)
    if d <= 0:
        raise ValueError("step_with_delay needs tau_p > 0")
    step = int(round(hist.time / dt))
    ap, ai = ctrl.gains(step)
    dW = hist.increment(0)
    drift = _base_drift(model, rho)
    if hist.count > d:
        j_del = hist.error(d)
        drift = drift + (-1j * ap * j_del * q.commutator(model.Lx, rho)
                         + ap ** 2 / (model.k * model.eta) * q.dissipator(model.Lx, rho))
    drift = drift - 1j * ai * J * q.commutator(model.Lx, rho)
    rho = rho + drift * dt + model.noise_scale * q.innovation(model.Lz, rho) * dW
    return q.normalize(rho)


def mean_drift(model, alpha_p, rho):
    """Drift of the ensemble-averaged state under instantaneous P feedback."""
    return _base_drift(model, rho) + _markov_feedback_drift(model, alpha_p, rho)


def deterministic_mean_step(model, alpha_p, rho, dt):
    """One RK4 step of the noise-free master equation for the average state."""
    f = lambda r: mean_drift(model, alpha_p, r)
    k1 = f(rho)
    k2 = f(rho + 0.5 * dt * k1)
    k3 = f(rho + 0.5 * dt * k2)
    k4 = f(rho + dt * k3)
    return rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def analytic_T0_steady(model, alpha_p):
    """Published closed form for the steady average ``T_0`` population.

    This expression is exact only for ``h1 + h2 = 0``; see
    :func:`exact_T0_steady` for the full stationary value of the same master
    equation.
    """
    s2 = (model.h1 + model.h2) ** 2
    k, eta, a2 = model.k, model.eta, alpha_p ** 2
    num = 4 * eta * s2 + k ** 2 * eta + 8 * eta ** 2 * k ** 2 + a2
    den = 12 * s2 + 3 * k ** 2 * eta + 8 * eta ** 2 * k ** 2 + 3 * a2
    return num / den


def exact_T0_steady(model, alpha_p):
    """Stationary ``T_0`` of the averaged master equation, solved in closed form.

    Derived by solving the linear stationary equations of the triplet block
    with symbolic algebra; valid for ``h1 = h2`` (triplet-confined dynamics).
    """
    a2 = alpha_p ** 2
    a4 = a2 * a2
    s = model.h1 + model.h2
    s2, s4 = s * s, s ** 4
    k, e = model.k, model.eta
    k2, k4 = k * k, k ** 4
    e2, e3 = e * e, e ** 3
    num = (a4 + 8 * a2 * e2 * k2 + 16 * a2 * e2 * s2 + 5 * a2 * e * k2 + 8 * a2 * e * s2
           + 32 * e3 * k4 + 32 * e3 * k2 * s2 + 4 * e2 * k4 + 20 * e2 * k2 * s2 + 16 * e2 * s4)
    den = (3 * a4 + 8 * a2 * e2 * k2 + 16 * a2 * e2 * s2 + 15 * a2 * e * k2 + 24 * a2 * e * s2
           + 32 * e3 * k4 + 32 * e3 * k2 * s2 + 12 * e2 * k4 + 60 * e2 * k2 * s2 + 48 * e2 * s4)
    return num / den


def stationary_mean_state(model, alpha_p, rho0=None):
    """Long-time limit of the averaged master equation started from ``rho0``.

    The Liouvillian can have several stationary states (for ``h1 = h2`` the
    singlet population is conserved), so every conserved linear functional
    is pinned to its value in ``rho0`` (default ``|T_1><T_1|``).
    """
    basis = hermitian_basis(4)
    L = real_superoperator(lambda r: mean_drift(model, alpha_p, r), basis)
    rho0 = q.projector(q.triplet_state("T_1")) if rho0 is None else rho0
    r0 = to_coordinates(np.asarray(rho0, dtype=complex), basis)
    # left null vectors are the conserved functionals
    _, sv, vt = np.linalg.svd(L.T)
    conserved = vt[sv < 1e-10 * max(sv[0], 1.0)]
    A = np.vstack([L, conserved])
    b = np.concatenate([np.zeros(len(L)), conserved @ r0])
    r, *_ = np.linalg.lstsq(A, b, rcond=None)
    return from_coordinates(r, basis)


# -- triplet-basis component stepper -----------------------------------------
#
# Index set (m, 0, p, S) = (T_-1, T_0, T_1, singlet).  Lz is diagonal with
# eigenvalues z; Lx couples m<->0<->p with weight 1/sqrt(2) and annihilates S;
# H = (h1+h2) Lz + (h1-h2)(|S><0| + |0><S|).

_Z = {"m": -1.0, "0": 0.0, "p": 1.0, "S": 0.0}
_R2 = 1 / math.sqrt(2)
_LX_NEIGHBOURS = {"m": ("0",), "0": ("m", "p"), "p": ("0",), "S": ()}
# Lx^2 = 1/2 (|m>+|p>)(<m|+<p|) + |0><0|
_LX2 = {("m", "m"): 0.5, ("m", "p"): 0.5, ("p", "m"): 0.5, ("p", "p"): 0.5, ("0", "0"): 1.0}
_STORED = (("m", "m"), ("0", "0"), ("p", "p"), ("S", "S"),
           ("p", "m"), ("0", "p"), ("0", "m"), ("S", "m"), ("S", "0"), ("S", "p"))
_FIELDS = ("t_m1", "t_0", "t_1", "t_s", "t_1m1", "t_01", "t_0m1", "t_sm1", "t_s0", "t_s1")


class _Components:
    """Read access ``r(a, b) = <a|rho|b>`` built from the stored upper set."""

    def __init__(self, dec):
        self.v = {}
        for (a, b), name in zip(_STORED, _FIELDS):
            x = complex(getattr(dec, name))
            self.v[(a, b)] = x
            self.v[(b, a)] = x.conjugate()
        for a in LABELS:
            for b in LABELS:
                self.v.setdefault((a, b), 0j)

    def __call__(self, a, b):
        return self.v[(a, b)]


def _lx_left(r, a, b):
    # (Lx r)_ab
    return _R2 * sum(r(c, b) for c in _LX_NEIGHBOURS[a])


def _lx_right(r, a, b):
    # (r Lx)_ab
    return _R2 * sum(r(a, c) for c in _LX_NEIGHBOURS[b])


def _lx_r_lx(r, a, b):
    return 0.5 * sum(r(c, d) for c in _LX_NEIGHBOURS[a] for d in _LX_NEIGHBOURS[b])


def _lx2_left(r, a, b):
    return sum(w * r(c, b) for (x, c), w in _LX2.items() if x == a)


def _lx2_right(r, a, b):
    return sum(w * r(a, c) for (c, y), w in _LX2.items() if y == b)


def triplet_component_step(state, model, ctrl, j_delayed, J, dW, dt):
    """Advance triplet populations and coherences by one Euler-Maruyama step.

    Parameters
    ----------
    state : TripletDecomposition
    model : TwoQubitModel
    ctrl : PIController
        Constant gains.  ``tau_p = 0`` selects the instantaneous form.
    j_delayed : float or None
        ``j(t - tau_p)`` for delayed feedback; ``None`` when no delayed sample
        exists yet (the proportional branch is then off).
    J : float
        Integral-filter value.
    dW : float
        Wiener increment shared with any stepper being compared.

    Each component is written element by element with the sparse actions of
    ``Lz``, ``Lx`` and ``H`` in the triplet basis; no 4x4 products are formed.
    """
    ap, ai = ctrl.gains(0)
    r = _Components(state)
    s = model.h1 + model.h2
    dh = model.h1 - model.h2
    k, sk = model.k, model.noise_scale
    markov = ctrl.tau_p == 0
    lz = sum(_Z[a] * r(a, a).real for a in LABELS)
    u = ai * J
    use_p = markov or j_delayed is not None
    if not markov and j_delayed is not None:
        u += ap * j_delayed
    c2 = ap ** 2 / (k * model.eta) if use_p else 0.0

    new = {}
    for a, b in _STORED:
        za, zb = _Z[a], _Z[b]
        rab = r(a, b)
        # -i[H, r]: diagonal part plus the singlet/T_0 mixing
        ham = -1j * s * (za - zb) * rab
        ham += -1j * dh * ((r("S", b) if a == "0" else 0) + (r("0", b) if a == "S" else 0)
                           - (r(a, "S") if b == "0" else 0) - (r(a, "0") if b == "S" else 0))
        meas = -0.5 * k * (za - zb) ** 2 * rab
        comm = _lx_left(r, a, b) - _lx_right(r, a, b)
        diss_x = _lx_r_lx(r, a, b) - 0.5 * (_lx2_left(r, a, b) + _lx2_right(r, a, b))
        drift = ham + meas - 1j * u * comm + c2 * diss_x
        noise = sk * (za + zb) * rab - 2 * sk * lz * rab
        if markov:
            # Lx (Lz r + r Lz) - (Lz r + r Lz) Lx, element by element
            left = _R2 * sum((_Z[c] + zb) * r(c, b) for c in _LX_NEIGHBOURS[a])
            right = _R2 * sum((za + _Z[c]) * r(a, c) for c in _LX_NEIGHBOURS[b])
            drift += -1j * ap * (left - right)
            noise += -1j * (ap / sk) * comm
        new[(a, b)] = rab + drift * dt + noise * dW
    tr = sum(new[(a, a)].real for a in LABELS)
    vals = []
    for (a, b), name in zip(_STORED, _FIELDS):
        v = new[(a, b)] / tr
        vals.append(v.real if a == b else v)
    return q.TripletDecomposition(*vals)


# -- batched engine ------------------------------------------------------------

def hermitian_basis(d):
    """Orthonormal basis of d x d Hermitian matrices under ``Tr[A B]``."""
    out = []
    for i in range(d):
        E = np.zeros((d, d), dtype=complex)
        E[i, i] = 1
        out.append(E)
    for i in range(d):
        for j in range(i + 1, d):
            S = np.zeros((d, d), dtype=complex)
            S[i, j] = S[j, i] = _R2
            A = np.zeros((d, d), dtype=complex)
            A[i, j], A[j, i] = -1j * _R2, 1j * _R2
            out.extend((S, A))
    return np.array(out)


def real_superoperator(fn, basis):
    """Matrix ``S[a, b] = Tr[B_a fn(B_b)]`` of a Hermiticity-preserving map."""
    n = len(basis)
    S = np.empty((n, n))
    for b in range(n):
        img = fn(basis[b])
        S[:, b] = np.einsum("aij,ji->a", basis, img).real
    return S


def to_coordinates(rho, basis):
    return np.einsum("aij,...ji->...a", basis, rho).real


def from_coordinates(r, basis):
    return np.tensordot(r, basis, axes=(-1, 0))


@dataclass
class PositivityMonitor:
    """Tracks the smallest eigenvalue seen and counts threshold crossings."""

    warn: float = q.POSITIVITY_WARN
    abort: float = -0.5
    min_eig: float = np.inf
    n_checked: int = 0
    n_below_warn: int = 0

    def check(self, lam, seeds=None):
        lo = float(np.min(lam))
        self.min_eig = min(self.min_eig, lo)
        self.n_checked += lam.size
        self.n_below_warn += int(np.sum(lam < self.warn))
        if lo < self.abort:
            i = int(np.argmin(lam))
            who = f" (trajectory seed {seeds[i]})" if seeds is not None else ""
            raise q.PositivityError(f"minimum eigenvalue {lo:.3e} below {self.abort}{who}")


class TwoQubitEngine:
    """Vectorised Euler-Maruyama over a block of trajectories.

    States are stored as real coordinates in a Hermitian basis, so each step
    is a single ``(B, 16) @ (16, 64)`` product plus elementwise updates.  The
    arithmetic is the same as :func:`step_no_delay` / :func:`step_with_delay`
    up to floating-point rounding.
    """

    def __init__(self, model, ctrl, dt):
        self.model = model
        self.ctrl = ctrl
        self.dt = float(dt)
        if not (np.isscalar(ctrl.alpha_p) and np.isscalar(ctrl.alpha_i)):
            raise ValueError("two-qubit runs use constant gains")
        self.d = ctrl.delay_steps(dt)
        self.markov = self.d == 0
        self.W = ctrl.window_steps(dt)
        basis = hermitian_basis(4)
        self.basis = basis
        ap = ctrl.alpha_p
        s = model.noise_scale
        Lx, Lz = model.Lx, model.Lz

        base = real_superoperator(lambda r: _base_drift(model, r), basis)
        dx = real_superoperator(lambda r: ap ** 2 / (model.k * model.eta) * q.dissipator(Lx, r), basis)
        kick = real_superoperator(lambda r: -1j * q.commutator(Lx, r), basis)
        if self.markov:
            base = base + real_superoperator(
                lambda r: -1j * ap * q.commutator(Lx, Lz @ r + r @ Lz), basis) + dx
            A = s * Lz - 1j * (ap / s) * Lx
        else:
            A = s * Lz
        lin = real_superoperator(lambda r: A @ r + r @ q.dag(A), basis)
        blocks = [base.T, kick.T, lin.T]
        if not self.markov:
            blocks.append(dx.T)
        self.M = np.ascontiguousarray(np.concatenate(blocks, axis=1))
        self.lz_vec = np.einsum("aij,ji->a", basis, Lz).real
        self.tr_vec = np.einsum("aii->a", basis).real
        # populations in the triplet basis are linear functionals too
        U = q.TRIPLET_BASIS
        self.pop_vecs = np.array([
            np.einsum("aij,ji->a", basis, np.outer(U[:, i], U[:, i].conj())).real
            for i in range(4)])

    def initial(self, rho0, n):
        r = to_coordinates(np.asarray(rho0, dtype=complex), self.basis)
        return np.tile(r, (n, 1))

    def states(self, r):
        return from_coordinates(r, self.basis)

    def run(self, rho0, noise, stride, observe):
        """Integrate a block and record observables every ``stride`` steps.

        Parameters
        ----------
        rho0 : ndarray
            Initial 4x4 state shared by the block.
        noise : iterable of ndarray
            Yields ``(n_chunk, B)`` arrays of increments in time order.
        stride : int
            Output decimation; observables are recorded at step 0 and every
            ``stride`` steps thereafter.
        observe : callable
            ``observe(r, engine) -> dict`` of ``(B,)`` arrays.
        """
        dt = self.dt
        ap, ai = self.ctrl.alpha_p, self.ctrl.alpha_i
        s = self.model.noise_scale
        first = True
        r = None
        out = []
        n = 0
        hist = filt = None
        for chunk in noise:
            B = chunk.shape[1]
            if first:
                r = self.initial(rho0, B)
                hist = NoiseHistory(dt, max(self.d, 0), (B,))
                filt = ExponentialFilter(self.ctrl.tau_i, dt, (B,)) if ai else None
                out.append(observe(r, self))
                first = False
            for dW in chunk:
                lz = r @ self.lz_vec
                j = 2 * lz + dW / (dt * s)
                hist.push(dW, j)
                J = filt.value if filt is not None else 0.0
                P = r @ self.M
                u = ai * J
                r_new = r + dt * P[:, :16] + dW[:, None] * (P[:, 32:48] - 2 * s * lz[:, None] * r)
                if not self.markov and n >= self.d:
                    u = u + ap * hist.error(self.d)
                    r_new += dt * P[:, 48:64]
                if ai or not self.markov:
                    r_new += dt * np.asarray(u)[..., None] * P[:, 16:32]
                r = r_new / (r_new @ self.tr_vec)[:, None]
                if filt is not None:
                    filt.update(j)
                n += 1
                if n % stride == 0:
                    out.append(observe(r, self))
        keys = out[0].keys()
        return {key: np.array([o[key] for o in out]) for key in keys}


def standard_observables(monitor=None, seeds=None, tol=np.inf):
    """Observable extractor: triplet populations and per-trajectory concurrence."""

    def observe(r, engine):
        pops = r @ engine.pop_vecs.T
        rho = engine.states(r)
        if monitor is not None:
            if not np.all(np.isfinite(r)):
                raise q.TraceCollapseError("non-finite state encountered")
            monitor.check(q.min_eigenvalue(rho), seeds)
        return {
            "T_-1": pops[:, 0], "T_0": pops[:, 1], "T_1": pops[:, 2], "S": pops[:, 3],
            "concurrence": q.concurrence(rho, tol=tol),
        }

    return observe


class TwoQubitBlock:
    """Picklable block simulator for :func:`qpi.ensemble.run_ensemble`.

    Records triplet populations, per-trajectory concurrence and the smallest
    eigenvalue of each state every ``stride`` steps.
    """

    def __init__(self, model, ctrl, dt, t_final, stride, rho0=None, positivity_abort=-0.5,
                 chunk=2000):
        self.model = model
        self.ctrl = ctrl
        self.dt = dt
        self.n_steps = int(round(t_final / dt))
        self.stride = stride
        self.rho0 = q.projector(q.triplet_state("T_1")) if rho0 is None else rho0
        self.positivity_abort = positivity_abort
        self.chunk = chunk

    def __call__(self, seeds):
        from .ensemble import noise_blocks
        engine = TwoQubitEngine(self.model, self.ctrl, self.dt)
        monitor = PositivityMonitor(abort=self.positivity_abort)
        observe = standard_observables(monitor, seeds)

        def with_min(r, eng):
            out = observe(r, eng)
            out["min_eig"] = q.min_eigenvalue(eng.states(r))
            return out

        noise = noise_blocks(seeds, self.dt, self.n_steps, self.chunk)
        return engine.run(self.rho0, noise, self.stride, with_min)
