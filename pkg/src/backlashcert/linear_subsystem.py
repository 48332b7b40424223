"""Linear part of the loop: plant matrices, periodic inputs, forced responses.

The plant is ``x' = A x + B w + E z``, ``y = C x``. Closing the loop with
``z = y`` gives the linearised dynamics matrix ``F = A + E C``.
"""

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.spatial.distance import pdist

from . import matrix_core
from .errors import DomainError, HypothesisError

GAUSS_NODES = 4


def _columns(M, n, name):
    M = np.asarray(M, dtype=float)
    if M.ndim == 1 and M.shape[0] == n:
        M = M[:, None]
    if M.ndim != 2 or M.shape[0] != n:
        raise DomainError(f"{name} must have {n} rows, got shape {M.shape}")
    return M


@dataclass(frozen=True, eq=False)
class PlantModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    E: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        n = A.shape[0]
        B = _columns(self.B, n, "B")
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        E = _columns(self.E, n, "E")
        if A.shape != (n, n):
            raise DomainError(f"A must be square, got {A.shape}")
        if C.shape[1] != n:
            raise DomainError(f"C must have {n} columns, got {C.shape}")
        if E.shape != (n, C.shape[0]):
            raise DomainError(f"E must be {n}x{C.shape[0]}, got {E.shape}")
        for name, M in (("A", A), ("B", B), ("C", C), ("E", E)):
            if not np.all(np.isfinite(M)):
                raise DomainError(f"{name} has non-finite entries")
            object.__setattr__(self, name, M)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    @cached_property
    def F(self):
        return self.A + self.E @ self.C

    @cached_property
    def mu(self):
        return matrix_core.spectral_abscissa(self.F)

    @property
    def hurwitz(self):
        return self.mu < 0.0

    def require_hurwitz(self):
        if not self.hurwitz:
            raise HypothesisError(f"linearised matrix F = A + EC is not Hurwitz (mu = {self.mu:.6g})")

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in "ABCE"}


@dataclass(frozen=True, eq=False)
class PeriodicInput:
    """``w(t) = a0 + sum_k cos_k cos(2 pi k t / T) + sin_k sin(2 pi k t / T)``.

    ``cos`` and ``sin`` have shape ``(K, m)``; row ``k - 1`` holds the
    coefficients of harmonic ``k``.
    """

    period: float
    a0: np.ndarray
    cos: np.ndarray = None
    sin: np.ndarray = None

    def __post_init__(self):
        if not (np.isfinite(self.period) and self.period > 0):
            raise DomainError(f"period must be positive, got {self.period}")
        a0 = np.atleast_1d(np.asarray(self.a0, dtype=float))
        m = a0.shape[0]
        cos = np.zeros((0, m)) if self.cos is None else np.asarray(self.cos, dtype=float).reshape(-1, m)
        sin = np.zeros((0, m)) if self.sin is None else np.asarray(self.sin, dtype=float).reshape(-1, m)
        K = max(cos.shape[0], sin.shape[0])
        cos = np.vstack([cos, np.zeros((K - cos.shape[0], m))])
        sin = np.vstack([sin, np.zeros((K - sin.shape[0], m))])
        object.__setattr__(self, "period", float(self.period))
        object.__setattr__(self, "a0", a0)
        object.__setattr__(self, "cos", cos)
        object.__setattr__(self, "sin", sin)

    @classmethod
    def sine(cls, amplitude, period, m=1):
        amp = np.broadcast_to(np.asarray(amplitude, dtype=float), (m,))
        return cls(period, np.zeros(m), sin=amp.reshape(1, m))

    @classmethod
    def constant(cls, value, period=1.0):
        return cls(period, np.atleast_1d(np.asarray(value, dtype=float)))

    @property
    def m(self):
        return self.a0.shape[0]

    @property
    def harmonics(self):
        return self.cos.shape[0]

    @property
    def omega(self):
        return 2.0 * np.pi * np.arange(1, self.harmonics + 1) / self.period

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        ph = np.multiply.outer(t, self.omega)
        return self.a0 + np.cos(ph) @ self.cos + np.sin(ph) @ self.sin

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        om = self.omega
        ph = np.multiply.outer(t, om)
        return (np.cos(ph) * om) @ self.sin - (np.sin(ph) * om) @ self.cos

    def sup_norm(self, samples=4096):
        t = np.linspace(0.0, self.period, samples, endpoint=False)
        return float(np.max(np.linalg.norm(np.atleast_2d(self(t)).reshape(samples, -1), axis=1)))

    def is_zero(self):
        return not (np.any(self.a0) or np.any(self.cos) or np.any(self.sin))

    def to_dict(self):
        return {"period": self.period, "a0": self.a0.tolist(), "cos": self.cos.tolist(), "sin": self.sin.tolist()}


def _uniform_step(grid):
    d = np.diff(grid)
    if d.size == 0:
        return None
    if np.all(np.abs(d - d[0]) <= 1e-12 * max(abs(d[0]), 1e-300)):
        return float(d[0])
    return None


def propagate(M, B, w, x0, grid, forcing=None, nodes=GAUSS_NODES):
    """Samples of ``x' = M x + B w(t) (+ forcing)`` on an ascending grid.

    Each step is exact in the homogeneous part; the convolution with the
    input uses Gauss-Legendre quadrature with ``nodes`` points per step
    (degree of exactness ``2 * nodes - 1``). A constant ``forcing`` vector is
    integrated exactly.
    """
    M = np.atleast_2d(np.asarray(M, dtype=float))
    B = np.asarray(B, dtype=float).reshape(M.shape[0], -1)
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) <= 0):
        raise DomainError("time grid must be strictly ascending")
    n = M.shape[0]
    out = np.empty((grid.size, n))
    out[0] = np.asarray(x0, dtype=float).reshape(n)
    if grid.size == 1:
        return out
    xg, wg = np.polynomial.legendre.leggauss(nodes)
    frac = 0.5 * (xg + 1.0)
    weights = 0.5 * wg

    def step_data(h):
        expo, integ = matrix_core.expm_and_psi(M, h)
        kernels = np.stack([matrix_core.expm(M, h * (1.0 - f)) @ B for f in frac])
        return expo, integ, kernels

    h = _uniform_step(grid)
    starts = grid[:-1]
    if h is not None:
        expo, integ, kernels = step_data(h)
        wv = np.asarray(w(starts[:, None] + h * frac[None, :]), dtype=float).reshape(starts.size, nodes, -1)
        incr = h * np.einsum("j,jnm,kjm->kn", weights, kernels, wv)
        if forcing is not None:
            incr += integ @ np.asarray(forcing, dtype=float)
        x = out[0]
        for k in range(starts.size):
            x = expo @ x + incr[k]
            out[k + 1] = x
        return out
    cache = {}
    x = out[0]
    for k, (t0, t1) in enumerate(zip(grid[:-1], grid[1:])):
        hk = t1 - t0
        if hk not in cache:
            cache[hk] = step_data(hk)
        expo, integ, kernels = cache[hk]
        wv = np.asarray(w(t0 + hk * frac), dtype=float).reshape(nodes, -1)
        x = expo @ x + hk * np.einsum("j,jnm,jm->n", weights, kernels, wv)
        if forcing is not None:
            x = x + integ @ np.asarray(forcing, dtype=float)
        out[k + 1] = x
    return out


def forced_response(model, inp, x0, grid, nodes=GAUSS_NODES):
    """Open-loop response ``x_*(t) = e^{tA} x0 + int_0^t e^{(t-s)A} B w(s) ds``."""
    return propagate(model.A, model.B, inp, x0, grid, nodes=nodes)


def linearised_response(model, inp, x0, grid, nodes=GAUSS_NODES):
    """Response of the linearised loop ``xi' = F xi + B w``."""
    return propagate(model.F, model.B, inp, x0, grid, nodes=nodes)


def periodic_initial_state(model, inp, steps=512):
    """Initial state of the unique T-periodic solution of ``xi' = F xi + B w``.

    Computes ``(I - e^{TF})^{-1} int_0^T e^{(T-s)F} B w(s) ds``.
    """
    model.require_hurwitz()
    T = inp.period
    grid = np.linspace(0.0, T, steps + 1)
    conv = propagate(model.F, model.B, inp, np.zeros(model.n), grid)[-1]
    monodromy = np.eye(model.n) - matrix_core.expm(model.F, T)
    if np.linalg.cond(monodromy) > 1e12:
        raise HypothesisError("I - exp(TF) is numerically singular; F is not Hurwitz")
    return np.linalg.solve(monodromy, conv)


def oscillation(samples):
    """Diameter of a finite point set (max pairwise distance)."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[0] < 2:
        return 0.0
    if samples.shape[1] == 1:
        return float(np.ptp(samples[:, 0]))
    return float(np.max(pdist(samples)))


@dataclass(frozen=True, eq=False)
class PeriodicOrbit:
    """Samples of the periodic regime of the linearised loop over one period."""

    t: np.ndarray
    xi: np.ndarray
    eta: np.ndarray
    eta_dot: np.ndarray
    period: float
    periodicity_residual: float
    eta_dot_sup: float = field(init=False)
    oscillation: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "eta_dot_sup", float(np.max(np.linalg.norm(self.eta_dot, axis=1))))
        object.__setattr__(self, "oscillation", oscillation(self.eta[:-1]))

    @property
    def steps(self):
        return self.t.size - 1

    def to_csv(self, path):
        n, p = self.xi.shape[1], self.eta.shape[1]
        header = ["t"] + [f"xi{i}" for i in range(n)] + [f"eta{i}" for i in range(p)] + [f"eta_dot{i}" for i in range(p)]
        rows = np.column_stack([self.t, self.xi, self.eta, self.eta_dot])
        _write_csv(path, header, rows)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format(float(v), ".17g") for v in row])


def _orbit_at(model, inp, steps):
    T = inp.period
    grid = np.linspace(0.0, T, steps + 1)
    xi0 = periodic_initial_state(model, inp, steps=steps)
    xi = propagate(model.F, model.B, inp, xi0, grid)
    eta = xi @ model.C.T
    w = np.asarray(inp(grid), dtype=float).reshape(grid.size, -1)
    eta_dot = (xi @ model.F.T + w @ model.B.T) @ model.C.T
    residual = float(np.linalg.norm(xi[-1] - xi[0]))
    return PeriodicOrbit(grid, xi, eta, eta_dot, T, residual)


def periodic_orbit(model, inp, steps=512, refine=False, rtol=1e-6, max_steps=4096):
    """Periodic regime of the linearised loop sampled on ``steps`` intervals.

    With ``refine=True`` the grid doubles until the oscillation and the sup
    of ``|eta_dot|`` move by less than ``rtol`` relatively, up to
    ``max_steps``.
    """
    orbit = _orbit_at(model, inp, steps)
    if not refine:
        return orbit
    while orbit.steps < max_steps:
        finer = _orbit_at(model, inp, orbit.steps * 2)
        moved = max(
            abs(finer.oscillation - orbit.oscillation) / max(finer.oscillation, 1e-300),
            abs(finer.eta_dot_sup - orbit.eta_dot_sup) / max(finer.eta_dot_sup, 1e-300),
        )
        orbit = finer
        if moved < rtol:
            break
    return orbit


def phi_matrix(model, t):
    """``Phi(t) = I_p - t C Psi(tA) E`` and its smallest singular value."""
    if t < 0:
        raise DomainError("Phi is defined for t >= 0")
    _, integral = matrix_core.expm_and_psi(model.A, t)
    Phi = np.eye(model.p) - model.C @ integral @ model.E
    return Phi, float(np.linalg.svd(Phi, compute_uv=False)[-1])


def phi_scan(model, T, steps=512):
    """Minimum singular-value margin of ``Phi`` over a uniform grid on [0, T].

    Returns ``(min_margin, time_of_min, grid, Phis)``.
    """
    grid = np.linspace(0.0, T, steps + 1)
    Phis = np.empty((grid.size, model.p, model.p))
    margins = np.empty(grid.size)
    for i, t in enumerate(grid):
        Phis[i], margins[i] = phi_matrix(model, t)
    k = int(np.argmin(margins))
    return float(margins[k]), float(grid[k]), grid, Phis
