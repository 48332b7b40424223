"""Convex compacts (balls and ellipsoids) and support-function arithmetic.

A :class:`Ball` in one dimension is a closed interval, which is the usual
backlash set. Ellipsoids are stored as ``{v : (v-c)^T Sigma^{-1} (v-c) <= 1}``.

All batch queries accept either a single vector of shape ``(p,)`` or a
stack of shape ``(k, p)`` and return results of matching rank.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, NumericalError

PROJECTION_MAXITER = 200
PROJECTION_RTOL = 1e-12


def _rows(u, dim):
    u = np.asarray(u, dtype=float)
    single = u.ndim <= 1
    U = u.reshape(1, -1) if single else u
    if U.shape[-1] != dim:
        raise DomainError(f"expected vectors of dimension {dim}, got shape {u.shape}")
    return U, single


def _unwrap(values, single):
    return values[0] if single else values


class ConvexCompact:
    """Common interface for the shipped set types."""

    center: np.ndarray

    @property
    def dim(self):
        return self.center.shape[0]

    def support(self, u):
        raise NotImplementedError

    def project(self, u):
        raise NotImplementedError

    def signed_distance(self, u):
        raise NotImplementedError

    def inward_normal(self, q):
        raise NotImplementedError

    def strong_convexity_constant(self):
        raise NotImplementedError

    def max_norm(self):
        """Exact ``max |v|`` over the set, i.e. its deviation from the origin."""
        raise NotImplementedError

    def default_boundary_tol(self):
        return 1e-9 * (1.0 + self.diameter())

    def contains(self, u, tol=0.0):
        return self.signed_distance(u) <= tol

    def excess(self, u):
        """Distance from ``u`` to the set (zero inside)."""
        return np.maximum(self.signed_distance(u), 0.0)

    def support_fn(self):
        return SupportFn(self.support, self.dim)

    def sample_boundary(self, count, rng):
        """Random boundary points and their unit inward normals."""
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Ball(ConvexCompact):
    """Closed Euclidean ball. In one dimension this is an interval."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        if c.ndim != 1 or not np.all(np.isfinite(c)):
            raise DomainError("ball center must be a finite vector")
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise DomainError(f"ball radius must be positive, got {self.radius}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"

    def support(self, u):
        U, single = _rows(u, self.dim)
        return _unwrap(U @ self.center + self.radius * np.linalg.norm(U, axis=1), single)

    def project(self, u):
        U, single = _rows(u, self.dim)
        d = U - self.center
        nrm = np.linalg.norm(d, axis=1)
        scale = np.ones_like(nrm)
        outside = nrm > self.radius
        scale[outside] = self.radius / nrm[outside]
        return _unwrap(self.center + d * scale[:, None], single)

    def signed_distance(self, u):
        U, single = _rows(u, self.dim)
        return _unwrap(np.linalg.norm(U - self.center, axis=1) - self.radius, single)

    def inward_normal(self, q):
        d = self.center - np.asarray(q, dtype=float)
        nrm = np.linalg.norm(d)
        if nrm == 0.0:
            raise DomainError("inward normal undefined at the center")
        return d / nrm

    def strong_convexity_constant(self):
        return self.radius

    def diameter(self):
        return 2.0 * self.radius

    def max_norm(self):
        return float(np.linalg.norm(self.center) + self.radius)

    def sample_boundary(self, count, rng):
        v = rng.standard_normal((count, self.dim))
        v /= np.linalg.norm(v, axis=1)[:, None]
        return self.center + self.radius * v, -v

    def to_dict(self):
        return {"type": "ball", "center": self.center.tolist(), "radius": self.radius}


def _bracketed_newton(fun, lo, hi, x0, maxiter=PROJECTION_MAXITER, xtol=1e-15):
    """Vectorized safeguarded Newton iteration for monotone scalar equations.

    ``fun(x)`` returns ``(f, df)``; ``f(lo) * f(hi) <= 0`` per component.
    Steps leaving the bracket fall back to bisection.
    """
    x = x0.copy()
    lo = lo.copy()
    hi = hi.copy()
    flo_sign = np.sign(fun(lo)[0])
    active = np.ones(x.shape, dtype=bool)
    for _ in range(maxiter):
        f, df = fun(x)
        converged = (np.abs(f) <= 1e-15) | (hi - lo <= xtol * (1.0 + np.abs(x)))
        active &= ~converged
        if not active.any():
            return x
        same = np.sign(f) == flo_sign
        lo = np.where(same, x, lo)
        hi = np.where(same, hi, x)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = x - f / df
        bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
        step = np.where(bad, 0.5 * (lo + hi), step)
        x = np.where(active, step, x)
    f, _ = fun(x)
    if np.any(active & (np.abs(f) > PROJECTION_RTOL)):
        raise NumericalError(
            f"ellipsoid root-find did not converge in {maxiter} iterations "
            f"(max residual {np.max(np.abs(f[active])):.3e})"
        )
    return x


@dataclass(frozen=True, eq=False)
class Ellipsoid(ConvexCompact):
    """``{v : (v - center)^T sigma^{-1} (v - center) <= 1}`` with ``sigma`` SPD."""

    center: np.ndarray
    sigma: np.ndarray
    _eigvals: np.ndarray = field(init=False, repr=False)
    _eigvecs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        S = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        if S.shape != (c.shape[0], c.shape[0]):
            raise DomainError(f"sigma must be {c.shape[0]}x{c.shape[0]}, got {S.shape}")
        if np.linalg.norm(S - S.T) > 1e-10 * np.linalg.norm(S):
            raise DomainError("sigma must be symmetric")
        S = 0.5 * (S + S.T)
        s, Q = np.linalg.eigh(S)
        if s[0] <= 0:
            raise DomainError("sigma must be positive definite")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "sigma", S)
        object.__setattr__(self, "_eigvals", s)
        object.__setattr__(self, "_eigvecs", Q)

    def __repr__(self):
        return f"Ellipsoid(center={self.center.tolist()}, sigma={self.sigma.tolist()})"

    def _local(self, U):
        return (U - self.center) @ self._eigvecs

    def _global(self, D):
        return self.center + D @ self._eigvecs.T

    def quadratic_form(self, u):
        U, single = _rows(u, self.dim)
        D = self._local(U)
        return _unwrap(np.sum(D**2 / self._eigvals, axis=1), single)

    def support(self, u):
        U, single = _rows(u, self.dim)
        quad = np.einsum("ij,jk,ik->i", U, self.sigma, U)
        return _unwrap(U @ self.center + np.sqrt(np.maximum(quad, 0.0)), single)

    def _exterior_multiplier(self, D):
        # (s + lam)^-2 weighted residual; decreasing and convex in lam >= 0
        s = self._eigvals
        w = s * D**2

        def fun(lam):
            den = s + lam[:, None]
            return np.sum(w / den**2, axis=1) - 1.0, -2.0 * np.sum(w / den**3, axis=1)

        lo = np.zeros(D.shape[0])
        hi = np.sqrt(np.sum(w, axis=1))
        return _bracketed_newton(fun, lo, hi, lo.copy())

    def project(self, u):
        U, single = _rows(u, self.dim)
        D = self._local(U)
        s = self._eigvals
        out = U.copy()
        outside = np.sum(D**2 / s, axis=1) > 1.0
        if outside.any():
            Do = D[outside]
            lam = self._exterior_multiplier(Do)
            out[outside] = self._global(s * Do / (s + lam[:, None]))
        return _unwrap(out, single)

    def _interior_distance(self, D):
        """Distance from interior points (local coordinates) to the boundary."""
        s = self._eigvals
        smin = s[0]
        k = D.shape[0]
        min_axes = s <= smin * (1.0 + 1e-12)
        w = s * D**2
        tau = np.zeros(k)
        hard = np.all(D[:, min_axes] == 0.0, axis=1)
        if hard.any():
            # nearest point may lie on the minor-axis circle: tau = smin
            others = np.where(min_axes, 0.0, w[hard] / np.where(min_axes, 1.0, s - smin) ** 2)
            f_at = others.sum(axis=1) - 1.0
            hard_idx = np.flatnonzero(hard)
            hard = np.zeros(k, dtype=bool)
            hard[hard_idx[f_at <= 0.0]] = True
        regular = ~hard
        if regular.any():
            wr = w[regular]

            def fun(t):
                den = s - t[:, None]
                with np.errstate(divide="ignore", invalid="ignore"):
                    terms = np.where(wr == 0.0, 0.0, wr / den**2)
                    dterms = np.where(wr == 0.0, 0.0, 2.0 * wr / den**3)
                return terms.sum(axis=1) - 1.0, dterms.sum(axis=1)

            lo = np.zeros(wr.shape[0])
            hi = np.full(wr.shape[0], smin)
            tau[regular] = _bracketed_newton(fun, lo, hi, lo.copy())
        dist = np.empty(k)
        if regular.any():
            Dr = D[regular]
            V = s * Dr / (s - tau[regular][:, None])
            dist[regular] = np.linalg.norm(V - Dr, axis=1)
        if hard.any():
            Dh = D[hard]
            with np.errstate(divide="ignore", invalid="ignore"):
                V = np.where(min_axes, 0.0, s * Dh / np.where(min_axes, 1.0, s - smin))
            rest = 1.0 - np.sum(np.where(min_axes, 0.0, V**2 / s), axis=1)
            first_min = int(np.flatnonzero(min_axes)[0])
            V[:, first_min] = np.sqrt(np.maximum(rest, 0.0) * smin)
            dist[hard] = np.linalg.norm(V - Dh, axis=1)
        return dist

    def signed_distance(self, u):
        """Euclidean distance to the set, negative (minus distance to the boundary) inside."""
        U, single = _rows(u, self.dim)
        D = self._local(U)
        inside = np.sum(D**2 / self._eigvals, axis=1) <= 1.0
        out = np.empty(U.shape[0])
        if (~inside).any():
            out[~inside] = np.linalg.norm(U[~inside] - self.project(U[~inside]), axis=1)
        if inside.any():
            out[inside] = -self._interior_distance(D[inside])
        return _unwrap(out, single)

    def excess(self, u):
        U, single = _rows(u, self.dim)
        out = np.zeros(U.shape[0])
        outside = np.sum(self._local(U) ** 2 / self._eigvals, axis=1) > 1.0
        if outside.any():
            out[outside] = np.linalg.norm(U[outside] - self.project(U[outside]), axis=1)
        return _unwrap(out, single)

    def inward_normal(self, q):
        g = np.linalg.solve(self.sigma, np.asarray(q, dtype=float) - self.center)
        nrm = np.linalg.norm(g)
        if nrm == 0.0:
            raise DomainError("inward normal undefined at the center")
        return -g / nrm

    def strong_convexity_constant(self):
        # largest principal radius of curvature, attained at the minor-axis poles
        return float(self._eigvals[-1] / np.sqrt(self._eigvals[0]))

    def diameter(self):
        return 2.0 * float(np.sqrt(self._eigvals[-1]))

    def max_norm(self):
        if not np.any(self.center):
            return float(np.sqrt(self._eigvals[-1]))
        # max of a convex function over the ellipsoid sits on the boundary
        dirs = sphere_directions(self.dim)
        return float(np.max(self.support(dirs)))

    def sqrt_sigma(self):
        return (self._eigvecs * np.sqrt(self._eigvals)) @ self._eigvecs.T

    def sample_boundary(self, count, rng):
        v = rng.standard_normal((count, self.dim))
        v /= np.linalg.norm(v, axis=1)[:, None]
        x = self.center + v @ self.sqrt_sigma()
        g = np.linalg.solve(self.sigma, (x - self.center).T).T
        return x, -g / np.linalg.norm(g, axis=1)[:, None]

    def to_dict(self):
        return {"type": "ellipsoid", "center": self.center.tolist(), "sigma": self.sigma.tolist()}


def from_dict(entry, path="theta"):
    """Build a set from its tagged-record description."""
    if not isinstance(entry, dict) or "type" not in entry:
        raise ConfigError("expected an object with a 'type' field", path)
    kind = entry["type"]
    if "center" not in entry:
        raise ConfigError("missing required field", f"{path}.center")
    try:
        if kind == "ball":
            if "radius" not in entry:
                raise ConfigError("missing required field", f"{path}.radius")
            return Ball(np.asarray(entry["center"], dtype=float), float(entry["radius"]))
        if kind == "ellipsoid":
            if "sigma" not in entry:
                raise ConfigError("missing required field", f"{path}.sigma")
            return Ellipsoid(np.asarray(entry["center"], dtype=float), np.asarray(entry["sigma"], dtype=float))
    except DomainError as exc:
        raise ConfigError(str(exc), path) from exc
    raise ConfigError(f"unknown set type {kind!r}", f"{path}.type")


class SupportFn:
    """Support function of a convex compact, possibly given only implicitly.

    ``func`` maps a ``(k, dim)`` array of directions to ``k`` values. Linear
    images and Minkowski sums compose pointwise.
    """

    def __init__(self, func, dim):
        self.func = func
        self.dim = int(dim)

    def __call__(self, u):
        U, single = _rows(u, self.dim)
        return _unwrap(np.asarray(self.func(U), dtype=float), single)

    def __add__(self, other):
        if isinstance(other, ConvexCompact):
            other = other.support_fn()
        if other.dim != self.dim:
            raise DomainError("Minkowski sum of sets of different dimension")
        return SupportFn(lambda U: self(U) + other(U), self.dim)

    __radd__ = __add__

    def linear_image(self, M):
        """Support function of ``M S`` where ``M`` maps R^dim to R^r."""
        M = np.atleast_2d(np.asarray(M, dtype=float))
        if M.shape[1] != self.dim:
            raise DomainError(f"matrix with {M.shape[1]} columns cannot act on dimension {self.dim}")
        return SupportFn(lambda U: self(U @ M), M.shape[0])

    @classmethod
    def point(cls, v):
        v = np.atleast_1d(np.asarray(v, dtype=float))
        return cls(lambda U: U @ v, v.shape[0])


def _as_support(S):
    return S.support_fn() if isinstance(S, ConvexCompact) else S


def sphere_directions(dim, count=None):
    """Deterministic unit directions covering the sphere in R^dim.

    One dimension uses the two exact directions; two dimensions a uniform
    angular grid (default 2048); three dimensions a Fibonacci lattice
    (default 8192). Higher dimensions fall back to seeded Gaussian samples.
    """
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        count = count or 2048
        ang = 2.0 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(ang), np.sin(ang)])
    if dim == 3:
        count = count or 8192
        i = np.arange(count) + 0.5
        z = 1.0 - 2.0 * i / count
        r = np.sqrt(1.0 - z**2)
        phi = np.pi * (3.0 - np.sqrt(5.0)) * i
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    count = count or 8192
    v = np.random.default_rng(dim).standard_normal((count, dim))
    return v / np.linalg.norm(v, axis=1)[:, None]


def support(S, u):
    return S.support(u)


def project(S, u):
    return S.project(u)


def strong_convexity_constant(S):
    return S.strong_convexity_constant()


def normal_cone_project(S, q, v, boundary_tol=None):
    """Projection of ``v`` onto the inward normal cone of ``S`` at ``q``.

    Interior points (gap to the boundary above ``boundary_tol``) have the
    trivial cone ``{0}``. On the boundary the cone is the ray spanned by the
    unit inward normal ``n`` and the result is ``max(n.v, 0) n``.
    """
    tol = S.default_boundary_tol() if boundary_tol is None else boundary_tol
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    sd = float(S.signed_distance(q))
    if sd > tol:
        raise DomainError(f"point lies outside the set by {sd:.3e} (tolerance {tol:.3e})")
    if -sd > tol:
        return np.zeros_like(v)
    n = S.inward_normal(q)
    return max(float(n @ v), 0.0) * n


def diameter(sigma, dim=None, directions=None, refine=False, rtol=1e-6, max_count=1 << 18):
    """Diameter ``max_u sigma(u) + sigma(-u)`` over sampled unit directions.

    Sampling gives a lower bound that converges under refinement; with
    ``refine=True`` the direction count doubles until the relative change
    drops below ``rtol``.
    """
    sigma = _as_support(sigma)
    dim = sigma.dim if dim is None else dim
    if directions is not None:
        U = np.asarray(directions, dtype=float)
        return float(np.max(sigma(U) + sigma(-U)))
    if dim == 1 or not refine:
        U = sphere_directions(dim)
        return float(np.max(sigma(U) + sigma(-U)))
    count = 2048 if dim == 2 else 8192
    prev = None
    while True:
        U = sphere_directions(dim, count)
        val = float(np.max(sigma(U) + sigma(-U)))
        if prev is not None and abs(val - prev) <= rtol * max(abs(val), 1e-300):
            return val
        if count >= max_count:
            return val
        prev = val
        count *= 2


def deviation_from(sigma_L, M=None, directions=None):
    """One-sided Hausdorff deviation of ``L`` from ``M`` via support functions.

    With ``M`` omitted (the origin) this is exactly ``max_u sigma_L(u)`` over
    the unit sphere. For a general ``M`` the value
    ``max_u (sigma_L(u) - sigma_M(u))_+`` is returned; it equals the
    deviation when ``L`` is ``M`` plus a convex summand, and is a lower bound
    otherwise.
    """
    sigma_L = _as_support(sigma_L)
    U = sphere_directions(sigma_L.dim) if directions is None else np.asarray(directions, dtype=float)
    vals = sigma_L(U)
    if M is None:
        return float(np.max(vals))
    gap = vals - _as_support(M)(U)
    return float(max(np.max(gap), 0.0))


@dataclass
class NormalInequalityReport:
    """Worst violations found by :func:`check_normal_inequalities`.

    Positive numbers are violations; the report passes when each is at most
    ``tol``.
    """

    trials: int
    tol: float
    strong: float
    midpoint: float
    radius_chain: float
    witnesses: list

    @property
    def max_violation(self):
        return max(self.strong, self.midpoint, self.radius_chain)

    @property
    def passed(self):
        return self.max_violation <= self.tol


def interior_boundary_distance(S, points):
    """``rho(c, boundary of S)`` for points ``c`` inside ``S``."""
    return np.maximum(-np.asarray(S.signed_distance(points)), 0.0)


def check_normal_inequalities(S, trials=10_000, rng_seed=0, tol=1e-9, max_witnesses=5):
    """Randomized check of the inward-normal inequalities for ``S``.

    For boundary points ``x, y`` with inward normals ``u, v`` (random
    nonnegative multiples of the unit normals, zero included) it checks

    * ``(u-v).(x-y) <= -(|u|+|v|) |x-y|^2 / (2R)``,
    * ``(u-v).(x-y) <= -2 r (|u|+|v|)`` with ``r`` the distance from the
      midpoint of ``x, y`` to the boundary,
    * ``r >= R - sqrt(R^2 - |x-y|^2/4) >= |x-y|^2 / (8R)``.
    """
    rng = np.random.default_rng(rng_seed)
    R = S.strong_convexity_constant()
    x, nx = S.sample_boundary(trials, rng)
    y, ny = S.sample_boundary(trials, rng)
    a = rng.uniform(0.0, 2.0, trials)
    b = rng.uniform(0.0, 2.0, trials)
    a[rng.random(trials) < 0.05] = 0.0
    b[rng.random(trials) < 0.05] = 0.0
    u = a[:, None] * nx
    v = b[:, None] * ny
    diff = x - y
    dist2 = np.sum(diff**2, axis=1)
    lhs = np.sum((u - v) * diff, axis=1)
    scale = a + b
    strong = lhs + scale * dist2 / (2.0 * R)

    r = interior_boundary_distance(S, 0.5 * (x + y))
    midpoint = lhs + 2.0 * r * scale
    sagitta = R - np.sqrt(np.maximum(R**2 - dist2 / 4.0, 0.0))
    chain = np.maximum(sagitta - r, dist2 / (8.0 * R) - sagitta)

    witnesses = []
    for name, viol in (("strong", strong), ("midpoint", midpoint), ("radius_chain", chain)):
        for i in np.flatnonzero(viol > tol)[:max_witnesses]:
            witnesses.append({"inequality": name, "x": x[i].tolist(), "y": y[i].tolist(),
                              "u": u[i].tolist(), "v": v[i].tolist(), "violation": float(viol[i])})
    return NormalInequalityReport(
        trials=trials,
        tol=tol,
        strong=float(np.max(strong)),
        midpoint=float(np.max(midpoint)),
        radius_chain=float(np.max(chain)),
        witnesses=witnesses,
    )


def ball_inclusion_violation(S, R, count=2000, rng_seed=0):
    """Largest ``|x + R n - y| - R`` over sampled boundary pairs.

    Nonpositive values mean every sampled point ``y`` lies in the radius-``R``
    ball supported at ``x`` with inward normal ``n``, which is the defining
    property of the strong convexity constant.
    """
    rng = np.random.default_rng(rng_seed)
    x, n = S.sample_boundary(count, rng)
    y, _ = S.sample_boundary(count, rng)
    centers = x + R * n
    d = np.linalg.norm(centers[:, None, :] - y[None, :, :], axis=2)
    return float(np.max(d - R))
