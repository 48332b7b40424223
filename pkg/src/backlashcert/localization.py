"""Tubular localization and stationary backlash initial conditions.

The gap between the closed-loop state and the linearised trajectory with
the same initial state lies in a convex compact ``Xi(t)`` whose support
function is ``int_0^t sigma_Theta(E^T exp(s F^T) u) ds``. For Hurwitz ``F``
the sets increase to a bounded limit ``Xi_inf``.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from . import matrix_core
from .convex_sets import SupportFn, deviation_from, diameter, sphere_directions
from .errors import DomainError, HypothesisError
from .linear_subsystem import forced_response, phi_scan


def _require_origin(theta):
    if not bool(theta.contains(np.zeros(theta.dim), tol=theta.default_boundary_tol())):
        raise HypothesisError("the backlash set must contain the origin")


class TubeCrossSection:
    """Support functions of ``Xi(t)`` and ``Xi_inf`` by composite Gauss-Legendre.

    Panels have width ``1 / (panels_per_unit * scale)`` where ``scale`` is
    the larger of ``|mu|`` and ``||F||``; each carries ``nodes`` points. The
    infinite horizon is truncated at ``T_inf`` where the tail bound
    ``max|Theta| ||E|| kappa exp(-lam T_inf) / lam`` drops below ``tail_tol``,
    with ``kappa`` from a Lyapunov certificate at rate ``lam``. Finite times
    past ``T_inf`` are clamped to it: the integrand is nonnegative, so the
    clamped value is a lower bound within ``tail_tol`` of the exact one.
    ``horizon`` only matters when ``F`` is not Hurwitz.
    """

    chunk = 256

    def __init__(self, model, theta, horizon=0.0, panels_per_unit=16, nodes=8, tail_tol=1e-8):
        if theta.dim != model.p:
            raise DomainError("backlash set dimension does not match the plant output")
        _require_origin(theta)
        self.model = model
        self.theta = theta
        self.nodes = nodes
        F = model.F
        scale = max(abs(model.mu), np.linalg.norm(F, 2), 1e-3)
        self.panel = 1.0 / (panels_per_unit * scale)
        self.t_inf = None
        self.tail_bound = None
        if model.hurwitz and np.any(model.E):
            self.t_inf, self.tail_bound = self._truncation(tail_tol)
        end = self.t_inf if self.t_inf is not None else horizon
        self.n_panels = max(int(np.ceil(end / self.panel)), 1)
        xg, wg = np.polynomial.legendre.leggauss(nodes)
        self._frac = 0.5 * (xg + 1.0)
        self._weights = 0.5 * wg * self.panel
        offsets = np.stack([matrix_core.expm(F, f * self.panel) for f in self._frac])
        self._starts = np.stack([matrix_core.expm(F, i * self.panel) for i in range(self.n_panels + 1)])
        # K[i, j] = E^T exp(s F^T) with s = (i + frac_j) * panel, shape (P, nodes, p, n)
        kernels = np.einsum("inm,jmk->ijnk", self._starts[:-1], offsets)
        self._K = np.einsum("ijnk,kq->ijqn", kernels, model.E)

    def _truncation(self, tail_tol):
        F = self.model.F
        mu = abs(self.model.mu)
        amp = self.theta.max_norm() * np.linalg.norm(self.model.E, 2)
        best = None
        for frac in (0.25, 0.5, 0.75, 0.9):
            lam = frac * mu
            kappa = matrix_core.exponential_decay_constant(F, lam)
            T = max(np.log(amp * kappa / (lam * tail_tol)) / lam, 0.0)
            if best is None or T < best[0]:
                best = (T, amp * kappa * np.exp(-lam * T) / lam)
        return best

    def _integrand(self, K, U):
        # K: (..., p, n), U: (k, n) -> sigma_Theta(K u) with shape (..., k)
        V = np.einsum("...qn,kn->...kq", K, U)
        shape = V.shape[:-1]
        return self.theta.support(V.reshape(-1, self.model.p)).reshape(shape)

    def _panel_sums(self, U):
        vals = self._integrand(self._K, U)  # (P, nodes, k)
        return np.einsum("j,ijk->ik", self._weights, vals)

    def _partial(self, U, i, length):
        """Integral over ``[i * panel, i * panel + length]``."""
        if length <= 0.0:
            return np.zeros(U.shape[0])
        F, E = self.model.F, self.model.E
        Ks = np.stack([(self._starts[i] @ matrix_core.expm(F, f * length) @ E).T for f in self._frac])
        vals = self._integrand(Ks, U)
        w = 0.5 * np.polynomial.legendre.leggauss(self.nodes)[1] * length
        return w @ vals

    def support(self, u, t=np.inf):
        """``sigma_{Xi(t)}(u)``; ``t = inf`` gives the limit set."""
        U = np.atleast_2d(np.asarray(u, dtype=float))
        out = self.support_many(U, [t])[0]
        return out[0] if np.ndim(u) == 1 else out

    def support_many(self, U, times):
        """Support values for every time in ``times``; shape ``(len(times), k)``."""
        U = np.atleast_2d(np.asarray(U, dtype=float))
        if U.shape[1] != self.model.n:
            raise DomainError(f"directions must have dimension {self.model.n}")
        times = np.asarray(times, dtype=float)
        if np.any(np.isinf(times)) and self.t_inf is None and np.any(self.model.E):
            raise DomainError("the limit tube needs a Hurwitz F")
        if not np.any(self.model.E):
            return np.zeros((times.size, U.shape[0]))
        if np.any(times < 0):
            raise DomainError("tube times must be nonnegative")
        end = self.n_panels * self.panel
        if self.t_inf is None and np.any(times > end * (1 + 1e-12)):
            raise DomainError(f"times beyond the precomputed horizon {end:.6g}; rebuild with a larger horizon")
        out = np.empty((times.size, U.shape[0]))
        for lo in range(0, U.shape[0], self.chunk):
            Uc = U[lo:lo + self.chunk]
            cum = np.vstack([np.zeros(Uc.shape[0]), np.cumsum(self._panel_sums(Uc), axis=0)])
            for r, t in enumerate(times):
                if t >= end:
                    out[r, lo:lo + self.chunk] = cum[-1]
                    continue
                i = int(np.floor(t / self.panel))
                out[r, lo:lo + self.chunk] = cum[i] + self._partial(Uc, i, t - i * self.panel)
        return out

    def support_fn(self, t=np.inf):
        return SupportFn(lambda U: self.support_many(U, [t])[0], self.model.n)

    def output_spread(self):
        """``d = diam(C Xi_inf + Theta)``."""
        sigma = self.support_fn().linear_image(self.model.C) + self.theta
        return diameter(sigma, self.model.p, refine=self.model.p > 1)

    def velocity_deviation(self):
        """``D(C(F Xi_inf + E Theta), {0})``."""
        CF = self.model.C @ self.model.F
        CE = self.model.C @ self.model.E
        sigma = self.support_fn().linear_image(CF) + self.theta.support_fn().linear_image(CE)
        return deviation_from(sigma)


def tube_support(model, theta, t, u, **kwargs):
    """One-off evaluation of ``sigma_{Xi(t)}(u)`` (``t = inf`` for the limit)."""
    if np.isinf(t):
        if not model.hurwitz:
            raise DomainError("the limit tube needs a Hurwitz F")
        return TubeCrossSection(model, theta, **kwargs).support(u, np.inf)
    return TubeCrossSection(model, theta, horizon=t, **kwargs).support(u, t)


@dataclass
class TubeReport:
    times: np.ndarray
    margins: np.ndarray  # min over directions of sigma - u.(x - xi), per time
    tol: float
    max_violation: float = field(init=False)
    violations: int = field(init=False)

    def __post_init__(self):
        self.max_violation = float(max(np.max(-self.margins), 0.0))
        self.violations = int(np.sum(-self.margins > self.tol))

    @property
    def passed(self):
        return self.violations == 0


def tube_check(tube, trajectory, xi, indices, directions=None, tol=1e-6):
    """Check ``u.(x(t) - xi(t)) <= sigma_{Xi(t)}(u) + tol`` at sampled grid indices.

    ``xi`` holds the linearised trajectory with the same initial state,
    either on the whole grid or only at ``indices``.
    """
    indices = np.asarray(indices, dtype=int)
    xi = np.asarray(xi, dtype=float)
    if xi.shape[0] != indices.size:
        xi = xi[indices]
    U = sphere_directions(tube.model.n) if directions is None else np.asarray(directions, dtype=float)
    times = trajectory.t[indices]
    bounds = tube.support_many(U, times)
    gaps = (trajectory.x[indices] - xi) @ U.T
    return TubeReport(times, np.min(bounds - gaps, axis=1), tol)


@dataclass
class DecayReport:
    times: np.ndarray
    gaps: np.ndarray
    slope: float
    mu: float

    @property
    def passed(self):
        return self.slope <= self.mu + 0.1 * abs(self.mu)


def deviation_decay(tube, times, directions=None, floor=1e-13):
    """``D(Xi_inf, Xi(t))`` on ``times`` and the least-squares slope of its log.

    Gaps below ``floor`` times the initial gap are left out of the fit.
    """
    model = tube.model
    model.require_hurwitz()
    times = np.asarray(times, dtype=float)
    U = sphere_directions(model.n) if directions is None else np.asarray(directions, dtype=float)
    vals = tube.support_many(U, np.concatenate([[np.inf], times]))
    gaps = np.max(vals[0] - vals[1:], axis=1)
    if not np.any(model.E):
        return DecayReport(times, np.zeros_like(times), -np.inf, model.mu)
    ref = gaps[0] if gaps[0] > 0 else np.max(gaps)
    keep = gaps > floor * ref
    if keep.sum() < 2:
        return DecayReport(times, gaps, -np.inf, model.mu)
    slope = np.polyfit(times[keep], np.log(gaps[keep]), 1)[0]
    return DecayReport(times, gaps, float(slope), model.mu)


@dataclass
class StationaryVerdict:
    member: bool
    margin: float
    worst_time: float
    steps: int


def _phi_and_orbit(model, inp, x0, T, steps):
    margin, t_min, grid, Phis = phi_scan(model, T, steps)
    if margin <= 1e-12:
        raise HypothesisError(f"Phi(t) is singular at t = {t_min:.6g} (smallest singular value {margin:.3e})")
    xs = forced_response(model, inp, x0, grid)
    return grid, Phis, xs @ model.C.T


def _residuals(theta, Phis, cx, z0):
    return theta.signed_distance(np.einsum("kij,j->ki", Phis, z0) - cx)


def stationary_membership(model, theta, inp, x0, z0, T, steps=512, refine=False, tol=1e-12, max_steps=8192):
    """Whether ``z0`` is a T-stationary backlash initial condition.

    Tests ``Phi(t) z0 - C x_*(t) in Theta`` on a uniform grid of ``[0, T]``.
    The margin is the smallest distance to the boundary along the grid
    (negative when the condition fails somewhere). With ``refine=True`` the
    grid doubles until the verdict repeats.
    """
    z0 = np.atleast_1d(np.asarray(z0, dtype=float))
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))

    def verdict(k):
        grid, Phis, cx = _phi_and_orbit(model, inp, x0, T, k)
        sd = np.atleast_1d(_residuals(theta, Phis, cx, z0))
        worst = int(np.argmax(sd))
        return StationaryVerdict(bool(sd[worst] <= tol), float(-sd[worst]), float(grid[worst]), k)

    out = verdict(steps)
    while refine and out.steps < max_steps:
        finer = verdict(out.steps * 2)
        same = finer.member == out.member
        out = finer
        if same:
            break
    return out


@dataclass
class EmptinessResult:
    empty: bool
    witness: np.ndarray
    value: float  # min over z0 of the worst signed distance along the grid
    status: str


def stationary_emptiness(model, theta, inp, x0, T, steps=512, starts=8, rng_seed=0, margin_tol=1e-9):
    """Search for a T-stationary initial condition.

    Minimizes ``g(z0) = max_t rho(Phi(t) z0 - C x_*(t), Theta)`` (signed
    distance, a convex function of ``z0``) by multi-start Nelder-Mead from
    points of ``C x0 + Theta``; ``rng_seed`` is a seed or a generator.
    ``g <= 0`` gives a witness; a minimum above
    ``margin_tol`` is reported as numerically empty.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    grid, Phis, cx = _phi_and_orbit(model, inp, x0, T, steps)

    def g(z):
        return float(np.max(_residuals(theta, Phis, cx, np.atleast_1d(z))))

    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.Generator(np.random.Philox(rng_seed))
    y0 = model.C @ x0
    pts, _ = theta.sample_boundary(starts, rng)
    candidates = [y0 + theta.center] + [y0 + theta.center + rng.uniform(0, 1) * (p - theta.center) for p in pts]
    best = None
    for z in candidates:
        res = scipy.optimize.minimize(g, z, method="Nelder-Mead",
                                      options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 4000})
        if best is None or res.fun < best.fun:
            best = res
        if best.fun <= 0.0:
            break
    witness = np.atleast_1d(best.x)
    value = float(best.fun)
    if value <= 0.0:
        return EmptinessResult(False, witness, value, "nonempty")
    if value > margin_tol:
        return EmptinessResult(True, witness, value, "numerically empty")
    return EmptinessResult(False, witness, value, "inconclusive")
