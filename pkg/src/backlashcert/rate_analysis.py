"""Path-length bounds and the exponential-stability certificate.

Two trajectories driven by the same input deviate by ``X = x1 - x2`` and
``Q = q1 - q2``. With ``Pi`` solving the shifted Lyapunov equation at rate
``lam`` and ``V = |X|_Pi^2 + |Q|^2``, the dissipation inequality reads

    sqrt(V(t)) <= sqrt(V(0)) exp(int_0^t psi(gamma(s)) ds)

where ``gamma = (|z1'| + |z2'|) / (2R)`` and ``psi`` is the closed-form upper
bound on the largest eigenvalue of the pencil ``(G, Gamma)``. Lower bounds on
the backlash path length keep ``gamma`` away from zero on average, which is
what pushes the exponent bound ``theta`` below zero.
"""

from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from . import matrix_core
from .errors import DomainError, HypothesisError
from .linear_subsystem import periodic_orbit
from .localization import TubeCrossSection

LAMBDA_DEFAULT_FRACTION = 0.9
LAMBDA_GRID = tuple(np.round(np.arange(0.1, 0.91, 0.1), 2))


def psi(gamma, lam, alpha, beta):
    """``sqrt(beta + (alpha - lam + gamma)^2 / 4) - (alpha + lam + gamma) / 2``.

    Nonincreasing and convex in ``gamma >= 0`` with limit ``-lam``. The
    difference form below avoids cancellation for large ``gamma``.
    """
    gamma = np.asarray(gamma, dtype=float)
    if lam <= 0:
        raise DomainError("psi needs lam > 0")
    if beta < 0:
        raise DomainError("psi needs beta >= 0")
    s = 0.5 * (alpha - lam + gamma)
    root = np.sqrt(beta + s * s)
    # root - s - lam, with root - s = beta / (root + s) when s > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        diff = np.where(s > 0, beta / (root + np.abs(s)), root - s)
    out = diff - lam
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# path-length and velocity bounds


def _partition_bound(eta, d):
    """Best ``sum (|eta_j - eta_i| - d)_+`` over increasing index chains."""
    best = np.zeros(eta.shape[0])
    for j in range(1, eta.shape[0]):
        gain = np.maximum(np.linalg.norm(eta[:j] - eta[j], axis=1) - d, 0.0)
        best[j] = max(best[j - 1], float(np.max(best[:j] + gain)))
    return float(best[-1])


def _greedy_packing(eta, eps):
    """Centres of a greedy packing by disjoint ``eps``-balls, scanned from ``eta[0]``."""
    centres = [eta[0]]
    for point in eta[1:]:
        if np.min(np.linalg.norm(np.asarray(centres) - point, axis=1)) >= 2.0 * eps:
            centres.append(point)
    return len(centres)


def _packing_bound(eta, d, mho, levels):
    best, best_eps, best_count = 0.0, None, 0
    if mho <= d:
        return best, best_eps, best_count
    for eps in np.linspace(0.5 * d, 0.5 * mho, levels + 1)[1:]:
        count = _greedy_packing(eta, eps)
        if count < 2:
            continue
        value = (2.0 * eps - d) * count
        if value > best:
            best, best_eps, best_count = value, float(eps), count
    return best, best_eps, best_count


@dataclass
class PathBounds:
    """Lower bounds on the backlash path length over a period window ``[kT, (k+1)T]``."""

    basic: float
    partition: float
    packing: float
    packing_eps: float
    packing_count: int

    @property
    def best(self):
        return max(self.basic, self.partition, self.packing)

    def to_dict(self):
        out = asdict(self)
        out["best"] = self.best
        return out


def path_length_bounds(orbit, d, packing_levels=64):
    """Path-length lower bounds from the periodic linearised output.

    Asymptotically ``z(t) - eta_T(t)`` stays in ``C Xi_inf + Theta``, whose
    diameter is ``d``, so each chord of ``eta_T`` longer than ``d`` forces
    backlash motion. The packing bound counts a closed tour through greedy
    packing centres that starts at ``eta_T(0)``, so it applies to windows
    aligned with the input phase; one-centre packings are skipped.
    """
    eta = orbit.eta
    mho = orbit.oscillation
    basic = max(mho - d, 0.0)
    partition = _partition_bound(eta, d)
    packing, eps, count = _packing_bound(eta[:-1], d, mho, packing_levels)
    return PathBounds(basic, partition, packing, eps, count)


def velocity_bound(orbit, tube):
    """Asymptotic bound ``||eta_T'||_inf + D(C(F Xi_inf + E Theta), {0})`` on ``|z'|``."""
    return orbit.eta_dot_sup + tube.velocity_deviation()


# ---------------------------------------------------------------------------
# certificate


def _inv_sqrt(P):
    w, V = np.linalg.eigh(P)
    return (V / np.sqrt(w)) @ V.T


@dataclass
class RateCertificate:
    lam: float
    mu: float
    period: float
    Pi: np.ndarray
    Gamma: np.ndarray
    H: np.ndarray
    alpha: float
    beta: float
    psi0: float
    early_exit: bool
    R: float = None
    mho: float = None
    d: float = None
    path_bounds: PathBounds = None
    velocity_bound: float = None
    gamma1: float = None
    gamma_inf: float = None
    psi_inf: float = None
    theta: float = None
    lambda_trace: list = field(default_factory=list)

    @property
    def verdict(self):
        return self.theta < 0.0

    @property
    def note(self):
        return "no strong convexity needed" if self.early_exit else "strong convexity of the backlash set used"

    def psi(self, gamma):
        return psi(gamma, self.lam, self.alpha, self.beta)

    def to_dict(self):
        out = {}
        for key, value in asdict(self).items():
            if isinstance(value, np.ndarray):
                value = value.tolist()
            out[key] = value
        out["path_bounds"] = None if self.path_bounds is None else self.path_bounds.to_dict()
        out["verdict"] = bool(self.verdict)
        out["note"] = self.note
        return out


def _coupling(model, lam):
    F, C, E = model.F, model.C, model.E
    Pi = matrix_core.lyapunov_certificate(F, lam)
    H = 0.5 * (Pi @ E - F.T @ C.T)
    alpha = float(matrix_core.symmetric_eigs(matrix_core.symmetrizer(C @ E))[0])
    g = _inv_sqrt(Pi) @ H
    beta = float(max(np.linalg.eigvalsh(matrix_core.symmetrizer(g.T @ g))[-1], 0.0))
    Gamma = scipy.linalg.block_diag(Pi, np.eye(model.p))
    return Pi, H, alpha, beta, Gamma


def build_certificate(model, theta, inp, lam=None, tube=None, orbit=None, orbit_steps=1024):
    """Assemble the exponent bound ``theta`` for the rate ``lam``.

    ``lam`` defaults to ``0.9 |mu|``. When ``psi(0) < 0`` the bound
    ``theta = psi(0)`` holds for any convex backlash set and the strong
    convexity constant is never requested; the geometric quantities are
    then filled in only if ``tube`` and ``orbit`` are supplied.
    """
    model.require_hurwitz()
    lam = LAMBDA_DEFAULT_FRACTION * abs(model.mu) if lam is None else float(lam)
    if not 0.0 < lam < abs(model.mu):
        raise HypothesisError(f"rate lambda={lam:.6g} must satisfy 0 < lambda < |mu| = {abs(model.mu):.6g}")
    Pi, H, alpha, beta, Gamma = _coupling(model, lam)
    psi0 = psi(0.0, lam, alpha, beta)
    cert = RateCertificate(lam, model.mu, inp.period, Pi, Gamma, H, alpha, beta, psi0, psi0 < 0.0)

    if cert.early_exit:
        cert.theta = psi0
        if tube is not None and orbit is not None:
            _fill_geometry(cert, tube, orbit)
        return cert

    R = float(theta.strong_convexity_constant())
    if not np.isfinite(R) or R <= 0:
        raise DomainError("the backlash set has no finite strong convexity constant")
    cert.R = R
    if tube is None:
        tube = TubeCrossSection(model, theta)
    if orbit is None:
        orbit = periodic_orbit(model, inp, steps=orbit_steps)
    _fill_geometry(cert, tube, orbit)
    cert.gamma1 = cert.path_bounds.basic / (inp.period * R)
    cert.gamma_inf = cert.velocity_bound / R
    if cert.gamma_inf == 0.0:
        cert.psi_inf = psi0
        cert.theta = psi0
    else:
        cert.psi_inf = psi(cert.gamma_inf, lam, alpha, beta)
        ratio = min(cert.gamma1 / cert.gamma_inf, 1.0)
        cert.theta = psi0 - ratio * (psi0 - cert.psi_inf)
    return cert


def _fill_geometry(cert, tube, orbit):
    cert.mho = orbit.oscillation
    cert.d = tube.output_spread()
    cert.path_bounds = path_length_bounds(orbit, cert.d)
    cert.velocity_bound = velocity_bound(orbit, tube)


def search_lambda(model, theta, inp, fractions=LAMBDA_GRID, tube=None, orbit=None, orbit_steps=1024):
    """Certificate with the smallest ``theta`` over ``lam = f |mu|``, ``f`` in ``fractions``.

    The tube and the orbit do not depend on ``lam`` and are shared. The
    returned certificate carries the search trace.
    """
    model.require_hurwitz()
    if tube is None:
        tube = TubeCrossSection(model, theta)
    if orbit is None:
        orbit = periodic_orbit(model, inp, steps=orbit_steps)
    best, trace = None, []
    for f in fractions:
        cert = build_certificate(model, theta, inp, lam=f * abs(model.mu), tube=tube, orbit=orbit)
        trace.append({"fraction": float(f), "lam": cert.lam, "theta": cert.theta})
        if best is None or cert.theta < best.theta:
            best = cert
    best.lambda_trace = trace
    return best


# ---------------------------------------------------------------------------
# measured exponents


@dataclass
class ExponentReport:
    slope: float
    window: tuple
    allowance: float
    theta: float
    noise_floor: float
    gronwall_max_ratio: float
    gronwall_allowance: float
    dissipation_max_violation: float
    jensen_max_violation: float

    @property
    def within_bound(self):
        if self.theta is None:
            return True
        return self.slope <= self.theta + 0.05 * abs(self.theta) + self.allowance

    @property
    def gronwall_holds(self):
        return self.gronwall_max_ratio <= 1.0 + self.gronwall_allowance

    @property
    def passed(self):
        return (self.within_bound and self.gronwall_holds
                and self.dissipation_max_violation <= 1e-12 and self.jensen_max_violation <= 1e-12)

    def to_dict(self):
        out = asdict(self)
        out["slope"] = "-inf" if self.slope == -np.inf else self.slope
        out.update(within_bound=bool(self.within_bound), gronwall_holds=bool(self.gronwall_holds),
                   passed=bool(self.passed))
        return out


def noise_floor(pair):
    """Level of ``V`` below which it is dominated by roundoff in the states."""
    scale = max(np.max(np.abs(pair.first.x)), np.max(np.abs(pair.second.x)),
                np.max(np.abs(pair.first.z)), np.max(np.abs(pair.second.z)), 1.0)
    gain = max(1.0, float(np.linalg.eigvalsh(pair.Pi)[-1]))
    return (1e3 * np.finfo(float).eps * scale) ** 2 * gain


def dissipation_violation(pair):
    """Largest ``Q_{k+1}.dZ_k + gamma_k h |Q_{k+1}|^2`` relative to ``max|q| (|dz1| + |dz2|)``.

    Each increment ``dz`` is an inward normal of ``Theta`` at ``q_{k+1}``, so
    the strong convexity inequality makes this nonpositive up to roundoff.
    """
    Q1 = pair.Q[1:]
    dZ = np.diff(pair.Z, axis=0)
    lhs = np.einsum("ki,ki->k", Q1, dZ) + pair.gamma * pair.h * np.sum(Q1**2, axis=1)
    qmax = max(np.max(np.abs(pair.first.q)), np.max(np.abs(pair.second.q)), pair.R)
    scale = qmax * (pair.first.dz_norm[1:] + pair.second.dz_norm[1:]) + 1e-300
    return float(max(np.max(lhs / scale), 0.0)) if lhs.size else 0.0


def jensen_violation(pair, cert):
    """Largest ``psi(gamma_k) - (psi(|dz1|/(Rh)) + psi(|dz2|/(Rh)))/2`` over the ledger."""
    R, h = pair.R, pair.h
    a = cert.psi(pair.first.dz_norm[1:] / (R * h))
    b = cert.psi(pair.second.dz_norm[1:] / (R * h))
    return float(max(np.max(cert.psi(pair.gamma) - 0.5 * (a + b)), 0.0))


def gronwall_ratio(pair, cert, floor):
    """``sqrt(V_k) / (sqrt(V_0) exp(sum_{j<k} psi(gamma_j) h))`` where ``V_k`` exceeds ``floor``."""
    V = pair.V
    if V[0] <= 0.0:
        return np.zeros(0), np.zeros(0, dtype=int)
    log_bound = np.concatenate([[0.0], np.cumsum(cert.psi(pair.gamma) * pair.h)])
    keep = np.flatnonzero(V > floor)
    ratio = np.exp(0.5 * (np.log(V[keep]) - np.log(V[0])) - log_bound[keep])
    return ratio, keep


def measure_exponent(pair, cert=None, tail=0.6, allowance=None):
    """Least-squares slope of ``ln sqrt(V)`` over the last ``tail`` of the usable horizon.

    The usable horizon ends where ``V`` last exceeds the roundoff floor.
    ``V`` identically below ``1e-280`` gives slope ``-inf``. With a
    certificate the discrete Gronwall bound, the dissipation ledger and the
    Jensen split are also checked.
    """
    t, V, h = pair.t, pair.V, pair.h
    period = pair.first.steps_per_period * h
    allowance = 2.0 * h / period if allowance is None else allowance
    floor = max(noise_floor(pair), 1e-280)
    above = np.flatnonzero(V > floor)
    if above.size == 0 or np.max(V) < 1e-280:
        slope, window = -np.inf, (0.0, 0.0)
    else:
        stop = above[-1]
        start = int(np.floor((1.0 - tail) * stop))
        idx = np.arange(start, stop + 1)
        idx = idx[V[idx] > floor]
        if idx.size < 2:
            slope = -np.inf
        else:
            slope = float(np.polyfit(t[idx], 0.5 * np.log(V[idx]), 1)[0])
        window = (float(t[start]), float(t[stop]))
    if cert is None:
        return ExponentReport(slope, window, allowance, None, floor, 0.0, 0.0, 0.0, 0.0)
    ratio, _ = gronwall_ratio(pair, cert, floor)
    return ExponentReport(
        slope, window, allowance, cert.theta, floor,
        float(np.max(ratio)) if ratio.size else 0.0, 10.0 * h,
        dissipation_violation(pair), jensen_violation(pair, cert),
    )
