"""Catching-up simulation of the plant in feedback with the backlash.

Each step advances the plant by one classical Runge-Kutta step with the
backlash output frozen, then moves ``z`` to the nearest point of the
translated set ``y + Theta``::

    x[k+1] = RK4 step of x' = A x + B w(t) + E z[k]
    y[k+1] = C x[k+1]
    z[k+1] = y[k+1] + P_Theta(z[k] - y[k+1])
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, IntegrityError


def _rk4(A, h, x, g0, gm, g1):
    k1 = A @ x + g0
    k2 = A @ (x + 0.5 * h * k1) + gm
    k3 = A @ (x + 0.5 * h * k2) + gm
    k4 = A @ (x + h * k3) + g1
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_maps(A, h):
    """Matrices ``P, G0, Gm, G1`` with ``rk4(x) = P x + G0 g(t) + Gm g(t+h/2) + G1 g(t+h)``."""
    n = A.shape[0]
    I, Z = np.eye(n), np.zeros((n, n))
    return (_rk4(A, h, I, Z, Z, Z), _rk4(A, h, Z, I, Z, Z),
            _rk4(A, h, Z, Z, I, Z), _rk4(A, h, Z, Z, Z, I))


def step(model, theta, w, x, z, t, h, boundary_tol=None):
    """One catching-up step from ``(x, z)`` at time ``t``; returns ``(x_next, z_next)``."""
    tol = theta.default_boundary_tol() if boundary_tol is None else boundary_tol
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    excess = float(theta.signed_distance(z - model.C @ x))
    if excess > 10.0 * tol:
        raise IntegrityError(f"q = z - y left the backlash set by {excess:.3e} at t={t:.6g}; reduce the step")

    def g(s):
        return model.B @ np.atleast_1d(w(s)) + model.E @ z

    x_next = _rk4(model.A, h, x, g(t), g(t + 0.5 * h), g(t + h))
    y_next = model.C @ x_next
    z_next = y_next + theta.project(z - y_next)
    return x_next, z_next


@dataclass
class SimConfig:
    """Step size, horizon and initial data for one run.

    ``z0_mode="project"`` repairs an inadmissible ``z0`` by projecting it
    onto ``C x0 + Theta``; ``"given"`` rejects it instead. ``z0=None`` starts
    with ``q(0)`` at the point of ``Theta`` nearest the origin.
    """

    x0: np.ndarray
    z0: np.ndarray = None
    steps_per_period: int = 4096
    periods: float = 30
    z0_mode: str = "given"
    boundary_tol: float = None

    def __post_init__(self):
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if self.z0 is not None:
            self.z0 = np.atleast_1d(np.asarray(self.z0, dtype=float))
        if self.steps_per_period <= 0:
            raise DomainError("steps_per_period must be positive")
        if self.periods <= 0:
            raise DomainError("periods must be positive")
        if self.z0_mode not in ("given", "project"):
            raise DomainError(f"z0_mode must be 'given' or 'project', got {self.z0_mode!r}")

    def step_size(self, period):
        return period / self.steps_per_period

    def total_steps(self):
        return int(round(self.periods * self.steps_per_period))


def admissible_z0(model, theta, cfg):
    """Initial backlash output for ``cfg``, validated against ``C x0 + Theta``."""
    tol = theta.default_boundary_tol() if cfg.boundary_tol is None else cfg.boundary_tol
    y0 = model.C @ cfg.x0
    if cfg.z0 is None:
        return y0 + theta.project(np.zeros(model.p))
    if cfg.z0.shape != (model.p,):
        raise DomainError(f"z0 must have dimension {model.p}")
    q0 = cfg.z0 - y0
    if float(theta.signed_distance(q0)) <= tol:
        return cfg.z0.copy()
    if cfg.z0_mode == "project":
        return y0 + theta.project(q0)
    raise DomainError("z0 is not in C x0 + Theta; use z0_mode='project' to repair it")


@dataclass
class Trajectory:
    """Samples on the uniform grid ``t_k = k h``.

    ``dz_norm[k] = |z_k - z_{k-1}|`` and likewise ``dy_norm``; both are 0 at
    ``k = 0``.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    q: np.ndarray
    dz_norm: np.ndarray
    dy_norm: np.ndarray
    h: float
    steps_per_period: int
    max_excess: float = 0.0

    @property
    def steps(self):
        return self.t.size - 1

    def period_path_lengths(self):
        """Path length of ``z`` over each complete period window."""
        N = self.steps_per_period
        full = self.steps // N
        inc = self.dz_norm[1:1 + full * N]
        return inc.reshape(full, N).sum(axis=1)

    def path_length(self, start=0, stop=None):
        """Path length of ``z`` between grid indices ``start`` and ``stop``."""
        stop = self.steps if stop is None else stop
        return float(np.sum(self.dz_norm[start + 1:stop + 1]))

    def csv_header(self):
        n, p = self.x.shape[1], self.y.shape[1]
        return (["t"] + [f"x{i}" for i in range(n)] + [f"y{i}" for i in range(p)]
                + [f"z{i}" for i in range(p)] + [f"q{i}" for i in range(p)] + ["dz_norm", "dy_norm"])

    def to_csv(self, path):
        rows = np.column_stack([self.t, self.x, self.y, self.z, self.q, self.dz_norm, self.dy_norm])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.csv_header())
            for row in rows:
                writer.writerow([format(float(v), ".17g") for v in row])


def read_trajectory_csv(path):
    """Column arrays keyed by header name from a trajectory CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        data = np.array([[float(v) for v in row] for row in reader])
    return {name: data[:, i] for i, name in enumerate(header)}


def _run_batch(model, theta, inp, h, steps, x0s, z0s):
    """Step ``K`` copies of the loop in lockstep under the same input."""
    P, G0, Gm, G1 = rk4_maps(model.A, h)
    t = h * np.arange(steps + 1)
    starts = t[:-1]
    wB = lambda s: np.asarray(inp(s), dtype=float).reshape(s.size, -1) @ model.B.T  # noqa: E731
    drive = wB(starts) @ G0.T + wB(starts + 0.5 * h) @ Gm.T + wB(starts + h) @ G1.T
    Gz = (G0 + Gm + G1) @ model.E
    K = x0s.shape[0]
    xs = np.empty((steps + 1, K, model.n))
    zs = np.empty((steps + 1, K, model.p))
    x, z = x0s.copy(), z0s.copy()
    xs[0], zs[0] = x, z
    Pt, Gzt, Ct = P.T, Gz.T, model.C.T
    project = theta.project
    # a blow-up is reported by the membership check afterwards
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            x = x @ Pt + drive[k] + z @ Gzt
            y = x @ Ct
            z = y + project(z - y)
            xs[k + 1] = x
            zs[k + 1] = z
    return t, xs, zs


def _trajectory(model, theta, t, x, z, h, steps_per_period, tol):
    if not np.all(np.isfinite(x)):
        raise IntegrityError("state overflowed; reduce the step")
    y = x @ model.C.T
    q = z - y
    excess = float(np.max(np.atleast_1d(theta.excess(q))))
    if excess > 10.0 * tol:
        raise IntegrityError(f"backlash membership lost (excess {excess:.3e}); reduce the step")
    dz = np.concatenate([[0.0], np.linalg.norm(np.diff(z, axis=0), axis=1)])
    dy = np.concatenate([[0.0], np.linalg.norm(np.diff(y, axis=0), axis=1)])
    return Trajectory(t, x, y, z, q, dz, dy, h, steps_per_period, excess)


def simulate(model, theta, inp, cfg):
    """Simulate the closed loop over ``cfg.periods`` periods of the input."""
    if theta.dim != model.p:
        raise DomainError(f"backlash set has dimension {theta.dim}, plant output has {model.p}")
    if cfg.x0.shape != (model.n,):
        raise DomainError(f"x0 must have dimension {model.n}")
    tol = theta.default_boundary_tol() if cfg.boundary_tol is None else cfg.boundary_tol
    z0 = admissible_z0(model, theta, cfg)
    h = cfg.step_size(inp.period)
    t, xs, zs = _run_batch(model, theta, inp, h, cfg.total_steps(), cfg.x0[None, :], z0[None, :])
    return _trajectory(model, theta, t, xs[:, 0], zs[:, 0], h, cfg.steps_per_period, tol)


@dataclass
class PairRun:
    """Two trajectories under the same input and their deviation records.

    ``V = X^T Pi X + |Q|^2`` on the grid; ``gamma[k] = (|dz1| + |dz2|) / (2 R h)``
    for step ``k -> k+1``.
    """

    first: Trajectory
    second: Trajectory
    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    Q: np.ndarray
    V: np.ndarray
    gamma: np.ndarray
    Pi: np.ndarray
    R: float
    h: float = field(init=False)

    def __post_init__(self):
        self.h = self.first.h

    @property
    def t(self):
        return self.first.t

    def to_csv(self, path):
        n, p = self.X.shape[1], self.Y.shape[1]
        header = (["t"] + [f"X{i}" for i in range(n)] + [f"Q{i}" for i in range(p)]
                  + [f"Z{i}" for i in range(p)] + ["V", "gamma"])
        gamma = np.concatenate([self.gamma, [np.nan]])
        rows = np.column_stack([self.t, self.X, self.Q, self.Z, self.V, gamma])
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format(float(v), ".17g") for v in row])


def pair_simulate(model, theta, inp, cfg1, cfg2, Pi):
    """Simulate two initial conditions in lockstep and record deviations."""
    if cfg1.steps_per_period != cfg2.steps_per_period or cfg1.total_steps() != cfg2.total_steps():
        raise DomainError("paired runs need identical grids")
    if theta.dim != model.p:
        raise DomainError(f"backlash set has dimension {theta.dim}, plant output has {model.p}")
    tol = theta.default_boundary_tol() if cfg1.boundary_tol is None else cfg1.boundary_tol
    x0s = np.stack([cfg1.x0, cfg2.x0])
    z0s = np.stack([admissible_z0(model, theta, cfg1), admissible_z0(model, theta, cfg2)])
    h = cfg1.step_size(inp.period)
    t, xs, zs = _run_batch(model, theta, inp, h, cfg1.total_steps(), x0s, z0s)
    first = _trajectory(model, theta, t, xs[:, 0], zs[:, 0], h, cfg1.steps_per_period, tol)
    second = _trajectory(model, theta, t, xs[:, 1], zs[:, 1], h, cfg1.steps_per_period, tol)
    Pi = np.asarray(Pi, dtype=float)
    R = theta.strong_convexity_constant()
    X = first.x - second.x
    Y = first.y - second.y
    Z = first.z - second.z
    Q = Z - Y
    V = np.einsum("ki,ij,kj->k", X, Pi, X) + np.sum(Q**2, axis=1)
    gamma = (first.dz_norm[1:] + second.dz_norm[1:]) / (2.0 * R * h)
    return PairRun(first, second, X, Y, Z, Q, V, gamma, Pi, R)
