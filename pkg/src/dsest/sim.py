"""Trajectory generation for descriptor plants and ODE estimators.

A rectangular pencil decomposes into four kinds of blocks; each solves
differently:

* underdetermined block -- an ODE in part of its coordinates, the remaining
  coordinates are genuinely free and must be *chosen* (they parameterize the
  solution set),
* finite block -- a plain linear ODE,
* nilpotent block -- purely algebraic, the state is a finite sum of input
  derivatives,
* overdetermined block -- an ODE plus algebraic consistency rows that the
  trajectory must satisfy identically.

Dynamic parts are integrated with fixed-step classical RK4; algebraic parts
are evaluated exactly from analytic input derivatives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .analysis import DescriptorSystem
from .decomp import PencilQKF, qkf
from .exceptions import SimulationError
from .linalg import DEFAULT_TOL, Tolerance, kernel, pseudo_inverse
from .signals import InputSignal
from .synthesis import EstimatorRealization

CONSISTENCY_ATOL = 1e-8
DEFAULT_HORIZON = 30.0
DEFAULT_DT = 1e-3


@dataclass
class SimulationTrace:
    """Uniformly sampled trajectory data.

    Arrays are (dim, n_samples); estimator fields are None for plant-only
    runs.  ``e = zhat - z``.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    w: Optional[np.ndarray] = None
    zhat: Optional[np.ndarray] = None
    e: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.t.ndim != 1 or len(self.t) < 2:
            raise SimulationError("trace needs at least two samples")
        if np.any(np.diff(self.t) <= 0):
            raise SimulationError("time grid must be strictly increasing")
        for name in ("x", "y", "z", "w", "zhat", "e"):
            arr = getattr(self, name)
            if arr is not None and not np.all(np.isfinite(arr)):
                raise SimulationError(f"non-finite samples in {name}")


def _time_grid(T: float, dt: float) -> np.ndarray:
    n_steps = int(round(T / dt))
    if n_steps < 1 or abs(n_steps * dt - T) > 1e-9 * max(1.0, T):
        n_steps = max(1, math.ceil(T / dt - 1e-12))
    return np.arange(n_steps + 1) * dt


def _as_signal(u, dim: int) -> InputSignal:
    if u is None:
        return InputSignal.zero(dim)
    if not isinstance(u, InputSignal):
        raise SimulationError("input must be an InputSignal (closed form)")
    if u.dim != dim:
        raise SimulationError(f"input has {u.dim} components, plant needs {dim}")
    return u


def _snap(M: np.ndarray, rel: float = 1e-12) -> np.ndarray:
    """Zero out entries at pure-roundoff level relative to the largest entry.

    The solver builds its runtime matrices as products T (block form) T^+
    where T collects the decomposition bases; the internal rotations cancel,
    so entries that are exactly zero in real arithmetic come out at ~1e-16
    relative magnitude.  Restoring those exact zeros matters: a 1e-16
    coupling from a fast-growing mode into a bounded state destroys the
    bounded state's accuracy on long horizons.
    """
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return M
    cutoff = rel * np.abs(M).max()
    out = M.copy()
    out[np.abs(out) < cutoff] = 0.0
    return out


class _PlantSolver:
    """Block-wise solution machinery for E x' = A x + B u.

    The pencil decomposition identifies which degrees of freedom are
    dynamic, algebraic, and free, but the dynamic ODE is re-expressed in
    the original state coordinates (X' = F X + ...) so that structural
    zeros of the plant survive in F and fast modes cannot contaminate
    decoupled slow states through basis roundoff.
    """

    def __init__(self, sys: DescriptorSystem, tol: Tolerance = DEFAULT_TOL):
        self.sys = sys
        dec = qkf(sys.E, sys.A, tol)
        self.dec = dec
        self.tol = tol
        Bt = dec.split_left(sys.B)
        self.B_eps, self.B_f, self.B_sigma, self.B_eta = Bt
        self.scale = max(1.0, max((np.abs(M).max() if M.size else 0.0)
                                  for M in (sys.E, sys.A, sys.B)))

        # Underdetermined block: column operation Z so that E_eps @ Z = [I 0];
        # the trailing columns of Z span the free directions.
        me, ne = dec.m_eps, dec.n_eps
        if ne:
            Zp = pseudo_inverse(dec.E_eps)
            Zn = kernel(dec.E_eps, tol, scale=self.scale).basis
            self.Z = np.hstack([Zp, Zn]) if Zn.size else Zp
            if self.Z.shape != (ne, ne):
                raise SimulationError("underdetermined block normalization failed")
            self.Zinv = np.linalg.inv(self.Z)
            self.AZ = dec.A_eps @ self.Z
        else:
            self.Z = np.zeros((0, 0))
            self.Zinv = self.Z
            self.AZ = np.zeros((me, 0))
        self.n_free = ne - me

        # Overdetermined block: row operation U so that U @ E_eta = [I; 0];
        # the trailing rows of U expose the algebraic consistency equations.
        meta_, neta = dec.m_eta, dec.n_eta
        if meta_:
            Up = pseudo_inverse(dec.E_eta)
            left_null = kernel(dec.E_eta.conj().T, tol, scale=self.scale).basis
            self.U = np.vstack([Up, left_null.conj().T]) if left_null.size else Up
            if self.U.shape != (meta_, meta_):
                raise SimulationError("overdetermined block normalization failed")
            UA = self.U @ dec.A_eta
            UB = self.U @ self.B_eta
            self.A_eta_dyn, self.A_eta_alg = UA[:neta], UA[neta:]
            self.B_eta_dyn, self.B_eta_alg = UB[:neta], UB[neta:]
        else:
            self.A_eta_dyn = np.zeros((0, 0))
            self.A_eta_alg = np.zeros((0, 0))
            self.B_eta_dyn = np.zeros((0, sys.l))
            self.B_eta_alg = np.zeros((0, sys.l))

        # Nilpotent block: x_sigma(t) = -sum_i J^i B u^(i)(t).
        self.sigma_coeffs = []
        Ji = np.eye(dec.n_sigma)
        for _ in range(dec.h if dec.n_sigma else 0):
            self.sigma_coeffs.append(-Ji @ self.B_sigma)
            Ji = dec.J_sigma @ Ji

        # Dynamic state v = (driven part of eps-block, finite block,
        # eta-block) in decomposed coordinates; X = Q_v v is its image in
        # original coordinates.  All runtime matrices are formed as
        # basis-sandwiched products so that the decomposition's internal
        # rotations cancel, then snapped to restore exact structural zeros.
        self.dims = (me, dec.n_f, dec.n_eta)
        self.n_dyn = sum(self.dims)
        Qb = dec.Q
        nf, ns, neta2 = dec.n_f, dec.n_sigma, dec.n_eta
        Q_eps = Qb[:, :ne]
        Q_f = Qb[:, ne:ne + nf]
        Q_sig = Qb[:, ne + nf:ne + nf + ns]
        Q_eta = Qb[:, ne + nf + ns:]
        Z1, Z2 = self.Z[:, :me], self.Z[:, me:]
        self.Q_v = np.hstack([Q_eps @ Z1, Q_f, Q_eta])
        D_v = np.zeros((self.n_dyn, self.n_dyn))
        D_v[:me, :me] = self.AZ[:, :me]
        D_v[me:me + nf, me:me + nf] = dec.J_f
        D_v[me + nf:, me + nf:] = self.A_eta_dyn
        B_v = np.vstack([self.B_eps[:me] if me else np.zeros((0, sys.l)),
                         self.B_f, self.B_eta_dyn]) \
            if self.n_dyn else np.zeros((0, sys.l))
        C_free = np.vstack([self.AZ[:, me:],
                            np.zeros((nf + neta2, self.n_free))]) \
            if self.n_dyn else np.zeros((0, self.n_free))
        Qv_pinv = pseudo_inverse(self.Q_v) if self.n_dyn \
            else np.zeros((0, sys.n))
        self.Qv_pinv = Qv_pinv
        self.F = _snap(self.Q_v @ D_v @ Qv_pinv) if self.n_dyn \
            else np.zeros((sys.n, sys.n))
        self.Gu = _snap(self.Q_v @ B_v) if self.n_dyn else np.zeros((sys.n, sys.l))
        self.Gfree = _snap(self.Q_v @ C_free) if self.n_dyn \
            else np.zeros((sys.n, self.n_free))
        self.free_map = _snap(Q_eps @ Z2)
        self.sigma_maps = [_snap(Q_sig @ c) for c in self.sigma_coeffs]
        # Algebraic consistency rows of the eta-block, expressed on X.
        self.R_alg = _snap(self.A_eta_alg @ Qv_pinv[me + nf:]) \
            if (neta2 and self.A_eta_alg.shape[0]) else np.zeros((0, sys.n))

    # -- algebraic evaluations ----------------------------------------------

    def sigma_state(self, u: InputSignal, t) -> np.ndarray:
        """Nilpotent-block state in decomposed coordinates."""
        t = np.asarray(t, dtype=float)
        out = np.zeros((self.dec.n_sigma,) + t.shape)
        for i, coeff in enumerate(self.sigma_coeffs):
            if coeff.size:
                out += coeff @ u.eval(t, order=i)
        return out

    def algebraic_x(self, u: InputSignal, free, t) -> np.ndarray:
        """Algebraic + free contribution to x at time(s) t."""
        t_arr = np.asarray(t, dtype=float)
        out = np.zeros((self.sys.n,) + t_arr.shape)
        for i, smap in enumerate(self.sigma_maps):
            if smap.size:
                out += smap @ u.eval(t, order=i)
        if self.n_free:
            out += self.free_map @ np.asarray(free(t), dtype=float)
        return out

    def assemble_x(self, X: np.ndarray, u: InputSignal, free, t) -> np.ndarray:
        return X + self.algebraic_x(u, free, t)

    def rhs(self, t: float, X: np.ndarray, u: InputSignal, free) -> np.ndarray:
        dX = self.F @ X + self.Gu @ u(t)
        if self.n_free:
            dX = dX + self.Gfree @ np.asarray(free(t), dtype=float)
        return dX

    # -- initial conditions --------------------------------------------------

    def initial_dynamic_state(self, x0: np.ndarray, u: InputSignal,
                              eps_signal):
        """Split a full x(0) into dynamic state + free signal, checking the
        algebraic constraints.  Returns (v0, free_signal_callable)."""
        x0 = np.asarray(x0, dtype=float).reshape(-1)
        if x0.shape != (self.sys.n,):
            raise SimulationError(
                f"x0 has length {x0.size}, plant state dimension is {self.sys.n}")
        xi0 = np.linalg.solve(self.dec.Q, x0)
        me, nf, neta = self.dims
        ne, ns = self.dec.n_eps, self.dec.n_sigma
        xi_eps = xi0[:ne]
        xi_f = xi0[ne:ne + nf]
        xi_sig = xi0[ne + nf:ne + nf + ns]
        xi_eta = xi0[ne + nf + ns:]

        atol = CONSISTENCY_ATOL * self.scale * max(1.0, np.abs(x0).max())
        if ns:
            expected = self.sigma_state(u, 0.0)
            gap = np.abs(xi_sig - expected)
            if gap.max() > atol:
                raise SimulationError(
                    "inconsistent initial state: nilpotent algebraic "
                    f"constraint violated by {gap.max():.3e} "
                    f"(component {int(gap.argmax())} of the nilpotent block)")
        if neta and self.A_eta_alg.shape[0]:
            res = self.A_eta_alg @ xi_eta + self.B_eta_alg @ u(0.0)
            if res.size and np.abs(res).max() > atol:
                row = int(np.abs(res).argmax())
                raise SimulationError(
                    "inconsistent initial state: overdetermined-block "
                    f"algebraic row {row} has residual {np.abs(res).max():.3e}")

        if ne:
            zeta0 = self.Zinv @ xi_eps
            zeta1_0, zeta2_0 = zeta0[:me], zeta0[me:]
        else:
            zeta1_0 = np.zeros(0)
            zeta2_0 = np.zeros(0)

        if eps_signal is None:
            const = zeta2_0.copy()

            def free(t):
                if np.ndim(t) == 0:
                    return const
                return np.repeat(const[:, None], np.shape(t)[0], axis=1)
        else:
            sig = eps_signal
            if isinstance(sig, InputSignal):
                if sig.dim != self.n_free:
                    raise SimulationError(
                        f"free-part signal has {sig.dim} components, "
                        f"expected {self.n_free}")
                free = sig
            elif callable(sig):
                free = lambda t: np.asarray(sig(t), dtype=float)  # noqa: E731
            else:
                raise SimulationError("eps_signal must be callable")

        v0 = np.concatenate([zeta1_0, xi_f, xi_eta])
        X0 = self.Q_v @ v0 if self.n_dyn else np.zeros(self.sys.n)
        return X0, free

    def eta_residual(self, X: np.ndarray, u_samples: np.ndarray) -> float:
        if not self.R_alg.shape[0]:
            return 0.0
        res = self.R_alg @ X + self.B_eta_alg @ u_samples
        return float(np.abs(res).max()) if res.size else 0.0


def _rk4(rhs: Callable[[float, np.ndarray], np.ndarray],
         v0: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Classical fixed-step RK4 on a uniform grid; returns (dim, len(t))."""
    out = np.empty((v0.size, len(t)))
    out[:, 0] = v0
    v = v0.astype(float).copy()
    for k in range(len(t) - 1):
        h = t[k + 1] - t[k]
        tk = t[k]
        k1 = rhs(tk, v)
        k2 = rhs(tk + h / 2, v + h / 2 * k1)
        k3 = rhs(tk + h / 2, v + h / 2 * k2)
        k4 = rhs(tk + h, v + h * k3)
        v = v + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[:, k + 1] = v
    return out


def solve_plant(sys: DescriptorSystem, x0, u: Optional[InputSignal] = None,
                T: float = DEFAULT_HORIZON, dt: float = DEFAULT_DT,
                tol: Tolerance = DEFAULT_TOL,
                eps_signal=None) -> SimulationTrace:
    """Simulate E x' = A x + B u from a consistent initial state.

    ``eps_signal`` chooses the free component of an underdetermined block;
    the default holds it constant at its initial value, which keeps x(0)
    exactly as supplied.
    """
    u = _as_signal(u, sys.l)
    solver = _PlantSolver(sys, tol)
    X0, free = solver.initial_dynamic_state(x0, u, eps_signal)
    t = _time_grid(T, dt)
    X = _rk4(lambda tk, Xk: solver.rhs(tk, Xk, u, free), X0, t)
    x = solver.assemble_x(X, u, free, t)
    u_samples = u.eval(t)
    y = sys.C @ x + sys.D @ u_samples
    z = sys.K @ x
    return SimulationTrace(
        t=t, x=x, y=y, z=z,
        meta={"dt": dt, "T": t[-1], "integrator_order": 4,
              "eta_residual_max": solver.eta_residual(X, u_samples),
              "block_dims": (solver.dec.n_eps, solver.dec.n_f,
                             solver.dec.n_sigma, solver.dec.n_eta)})


def estimation_error(sys: DescriptorSystem, est: EstimatorRealization,
                     x: np.ndarray, u_samples: np.ndarray,
                     w: np.ndarray) -> np.ndarray:
    """Estimation error zhat - z evaluated in compensated form.

    Forming zhat and z separately and subtracting loses precision whenever
    the plant has large (e.g. unstable) modes that the estimator cancels
    through the measured output.  Expanding zhat - z = R w + M_u u +
    (M_y C - K) x + M_y D u performs that cancellation exactly in the
    coefficient matrix, so the result stays accurate even when z itself is
    huge.
    """
    Mu, My = est.M[:, :sys.l], est.M[:, sys.l:]
    e = est.R @ w + (My @ sys.C - sys.K) @ x
    if u_samples.size:
        e = e + (Mu + My @ sys.D) @ u_samples
    return e


def run_estimator(est: EstimatorRealization, t: np.ndarray,
                  u_samples: np.ndarray, y_samples: np.ndarray,
                  w0) -> tuple[np.ndarray, np.ndarray]:
    """Integrate w' = N w + H (u; y) on sampled inputs; returns (w, zhat).

    Midpoint input values are averaged from the neighbouring samples.
    """
    t = np.asarray(t, dtype=float)
    u_samples = np.atleast_2d(np.asarray(u_samples, dtype=float))
    y_samples = np.atleast_2d(np.asarray(y_samples, dtype=float))
    if u_samples.shape[1] != len(t) or y_samples.shape[1] != len(t):
        raise SimulationError("sampling grids of u, y, t do not match")
    v = np.vstack([u_samples, y_samples]) if (u_samples.size or y_samples.size) \
        else np.zeros((0, len(t)))
    if v.shape[0] != est.H.shape[1]:
        raise SimulationError(
            f"estimator expects {est.H.shape[1]} input+output channels, "
            f"got {v.shape[0]}")
    w0 = np.asarray(w0, dtype=float).reshape(-1)
    if w0.shape != (est.s,):
        raise SimulationError(f"w0 has length {w0.size}, estimator order is {est.s}")

    w = np.empty((est.s, len(t)))
    w[:, 0] = w0
    wk = w0.copy()
    for k in range(len(t) - 1):
        h = t[k + 1] - t[k]
        va, vb = v[:, k], v[:, k + 1]
        vm = (va + vb) / 2
        k1 = est.N @ wk + est.H @ va
        k2 = est.N @ (wk + h / 2 * k1) + est.H @ vm
        k3 = est.N @ (wk + h / 2 * k2) + est.H @ vm
        k4 = est.N @ (wk + h * k3) + est.H @ vb
        wk = wk + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        w[:, k + 1] = wk
    zhat = est.R @ w + est.M @ v
    return w, zhat


def simulate(sys: DescriptorSystem, est: EstimatorRealization, x0, w0,
             u: Optional[InputSignal] = None, T: float = DEFAULT_HORIZON,
             dt: float = DEFAULT_DT, tol: Tolerance = DEFAULT_TOL,
             eps_signal=None) -> SimulationTrace:
    """Joint plant + estimator simulation with one RK4 pass.

    The estimator sees exact plant outputs at every RK4 stage, so the
    combined scheme keeps full fourth-order accuracy.
    """
    u = _as_signal(u, sys.l)
    solver = _PlantSolver(sys, tol)
    X0, free = solver.initial_dynamic_state(x0, u, eps_signal)
    w0 = np.asarray(w0, dtype=float).reshape(-1)
    if w0.shape != (est.s,):
        raise SimulationError(f"w0 has length {w0.size}, estimator order is {est.s}")
    n = sys.n

    def joint_rhs(tk, state):
        Xk, wk = state[:n], state[n:]
        dX = solver.rhs(tk, Xk, u, free)
        xk = solver.assemble_x(Xk, u, free, tk)
        ut = u(tk)
        yk = sys.C @ xk + sys.D @ ut
        dw = est.N @ wk + est.H @ np.concatenate([ut, yk])
        return np.concatenate([dX, dw])

    t = _time_grid(T, dt)
    traj = _rk4(joint_rhs, np.concatenate([X0, w0]), t)
    X, w = traj[:n], traj[n:]
    x = solver.assemble_x(X, u, free, t)
    u_samples = u.eval(t)
    y = sys.C @ x + sys.D @ u_samples
    z = sys.K @ x
    io = np.vstack([u_samples, y]) if (u_samples.size or y.size) \
        else np.zeros((0, len(t)))
    zhat = est.R @ w + est.M @ io
    return SimulationTrace(
        t=t, x=x, y=y, z=z, w=w, zhat=zhat,
        e=estimation_error(sys, est, x, u_samples, w),
        meta={"dt": dt, "T": t[-1], "integrator_order": 4,
              "eta_residual_max": solver.eta_residual(X, u_samples),
              "block_dims": (solver.dec.n_eps, solver.dec.n_f,
                             solver.dec.n_sigma, solver.dec.n_eta)})


@dataclass(frozen=True)
class DecayMetrics:
    sup_tail: np.ndarray          # sup over [t, T] of the error norm
    fitted_rate: Optional[float]  # least-squares exponent over the final half
    convergent: bool
    verdict: str


def decay_metrics(trace: SimulationTrace) -> DecayMetrics:
    """Tail supremum and fitted exponential decay rate of the error."""
    if trace.e is None:
        raise SimulationError("trace has no error signal")
    enorm = np.linalg.norm(trace.e, axis=0) if trace.e.shape[0] else \
        np.zeros(len(trace.t))
    sup_tail = np.maximum.accumulate(enorm[::-1])[::-1]
    peak = sup_tail[0]
    if peak == 0.0:
        return DecayMetrics(sup_tail, None, True, "convergent (error identically zero)")

    half = len(trace.t) // 2
    tt, vv = trace.t[half:], sup_tail[half:]
    floor = max(1e-14, 1e-13 * peak)
    mask = vv > floor
    rate = None
    if mask.sum() >= 2 and np.ptp(tt[mask]) > 0:
        slope, _ = np.polyfit(tt[mask], np.log(vv[mask]), 1)
        rate = float(slope)

    final = sup_tail[-1]
    convergent = bool(final <= max(1e-6, 1e-6 * peak)
                      or (rate is not None and rate < -1e-2
                          and final < 1e-2 * peak))
    verdict = "convergent" if convergent else "not convergent"
    return DecayMetrics(sup_tail, rate, convergent, verdict)
