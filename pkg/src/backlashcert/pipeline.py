"""Run the analyses of a scenario and collect them into one report.

Each ``run_*`` function returns a plain dictionary (JSON-ready after
:func:`jsonable`) plus whatever heavy objects later stages reuse.
"""

import math
from importlib import metadata

import numpy as np
import scipy

from .convex_sets import sphere_directions
from .linear_subsystem import linearised_response, periodic_orbit, phi_scan
from .localization import (TubeCrossSection, deviation_decay, stationary_emptiness,
                           stationary_membership, tube_check)
from .rate_analysis import build_certificate, measure_exponent, search_lambda
from .sweeping_sim import SimConfig, admissible_z0, pair_simulate, simulate

REPORT_KEYS = ("scenario", "localization", "stationarity", "rate", "measured_exponent", "provenance")
LATE_PERIODS = 5


def jsonable(obj):
    """Recursively convert numpy values; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isfinite(value):
            return value
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    return obj


class Context:
    """Lazily computed objects shared between report sections."""

    def __init__(self, scen):
        self.scen = scen
        self.trace = {}
        self._tube = self._orbit = self._trajectory = self._cert = None
        self.pair = None

    @property
    def tube(self):
        if self._tube is None:
            self._tube = TubeCrossSection(self.scen.model, self.scen.theta)
            self.trace["tube"] = {"t_inf": self._tube.t_inf, "tail_bound": self._tube.tail_bound,
                                  "panel": self._tube.panel, "panels": self._tube.n_panels,
                                  "nodes": self._tube.nodes}
        return self._tube

    @property
    def orbit(self):
        if self._orbit is None:
            self._orbit = periodic_orbit(self.scen.model, self.scen.inp, steps=self.scen.analysis["orbit_steps"])
            self.trace["orbit_steps"] = self._orbit.steps
        return self._orbit

    @property
    def trajectory(self):
        if self._trajectory is None:
            self._trajectory = simulate(self.scen.model, self.scen.theta, self.scen.inp, self.scen.sim)
        return self._trajectory

    @property
    def certificate(self):
        if self._cert is None:
            s = self.scen
            lam = s.analysis["lambda"]
            if s.analysis["lambda_search"] and lam is None:
                self._cert = search_lambda(s.model, s.theta, s.inp, tube=self.tube, orbit=self.orbit)
            else:
                self._cert = build_certificate(s.model, s.theta, s.inp, lam=lam, tube=self.tube, orbit=self.orbit)
        return self._cert


def run_scenario_section(ctx):
    s = ctx.scen
    return {
        "name": s.name,
        "seed": s.seed,
        "model": s.model.to_dict(),
        "theta": s.theta.to_dict(),
        "input": s.inp.to_dict(),
        "simulation": {"x0": s.sim.x0, "z0": s.sim.z0, "z0_mode": s.sim.z0_mode,
                       "steps_per_period": s.sim.steps_per_period, "periods": s.sim.periods},
        "mu": s.model.mu,
        "hurwitz": s.model.hurwitz,
    }


def run_tube(ctx):
    s, a = ctx.scen, ctx.scen.analysis
    model, theta, tube = s.model, s.theta, ctx.tube
    model.require_hurwitz()
    cfg = SimConfig(x0=s.sim.x0, z0=s.sim.z0, z0_mode=s.sim.z0_mode,
                    steps_per_period=a["tube_steps_per_period"], periods=a["tube_periods"])
    tr = simulate(model, theta, s.inp, cfg)
    idx = np.unique(np.linspace(0, tr.steps, a["tube_times"]).round().astype(int))
    xi = linearised_response(model, s.inp, tr.x[0], tr.t[idx])
    U = sphere_directions(model.n, a["tube_directions"] if model.n > 1 else None)
    report = tube_check(tube, tr, xi, idx, U)
    decay = deviation_decay(tube, np.linspace(0.0, min(tube.t_inf, 20.0 / abs(model.mu)), 64)[1:])
    return {
        "t_inf": tube.t_inf,
        "tail_bound": tube.tail_bound,
        "d": tube.output_spread(),
        "D_theta": theta.max_norm(),
        "D_CF": tube.velocity_deviation(),
        "tube_check": {"times": int(idx.size), "directions": int(U.shape[0]), "steps_per_period": cfg.steps_per_period,
                       "periods": cfg.periods, "max_violation": report.max_violation,
                       "violations": report.violations, "passed": report.passed},
        "deviation_decay": {"slope": decay.slope, "mu": decay.mu, "passed": decay.passed},
    }


def run_stationarity(ctx):
    s, a = ctx.scen, ctx.scen.analysis
    T = s.inp.period
    margin, t_min, _, _ = phi_scan(s.model, T, a["stationary_steps"])
    z0 = admissible_z0(s.model, s.theta, s.sim)
    verdict = stationary_membership(s.model, s.theta, s.inp, s.sim.x0, z0, T, steps=a["stationary_steps"])
    empty = stationary_emptiness(s.model, s.theta, s.inp, s.sim.x0, T, steps=a["stationary_steps"],
                                 starts=a["emptiness_starts"], rng_seed=s.rng())
    return {
        "phi_min_singular_value": margin,
        "phi_min_time": t_min,
        "initial_condition": {"z0": z0, "member": verdict.member, "margin": verdict.margin,
                              "worst_time": verdict.worst_time, "grid": verdict.steps},
        "emptiness": {"empty": empty.empty, "status": empty.status, "value": empty.value,
                      "witness": empty.witness},
    }


def run_rate(ctx):
    s = ctx.scen
    cert = ctx.certificate
    out = cert.to_dict()
    if cert.path_bounds is not None and s.sim.periods >= LATE_PERIODS + 1:
        tr = ctx.trajectory
        N = tr.steps_per_period
        late_paths = tr.period_path_lengths()[-LATE_PERIODS:]
        late_speed = float(np.max(tr.dz_norm[-LATE_PERIODS * N:]) / tr.h)
        bound = max(cert.path_bounds.basic, cert.path_bounds.packing)
        out["simulation_check"] = {
            "late_path_lengths": late_paths,
            "path_ok": bool(np.min(late_paths) >= bound - 1e-3),
            "late_max_speed": late_speed,
            "speed_ok": bool(late_speed <= cert.velocity_bound + 1e-2),
        }
    return out


def run_pair(ctx):
    s = ctx.scen
    if s.pair is None:
        return None, None
    cert = ctx.certificate
    pair = pair_simulate(s.model, s.theta, s.inp, s.sim, s.pair, cert.Pi)
    ctx.pair = pair
    report = measure_exponent(pair, cert)
    out = report.to_dict()
    out["V0"] = float(pair.V[0])
    out["x0_separation"] = float(np.linalg.norm(s.sim.x0 - s.pair.x0))
    return out, pair


def provenance(ctx, command):
    s = ctx.scen
    try:
        version = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        version = "unknown"
    return {
        "command": command,
        "package_version": version,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "seed": s.seed,
        "rng": "numpy.random.Philox",
        "steps_per_period": s.sim.steps_per_period,
        "h": s.sim.step_size(s.inp.period),
        "periods": s.sim.periods,
        "lambda_trace": ctx._cert.lambda_trace if ctx._cert is not None else [],
        **ctx.trace,
    }


def build_report(scen, sections=("localization", "stationarity", "rate", "measured_exponent"),
                 command="all", use_toggles=True):
    """Report dictionary with the standard top-level keys; skipped sections are ``None``.

    With ``use_toggles`` the scenario's analysis switches can drop sections.
    """
    ctx = Context(scen)
    report = dict.fromkeys(REPORT_KEYS)
    report["scenario"] = run_scenario_section(ctx)
    a = scen.analysis

    def wanted(section, toggle):
        return section in sections and (a[toggle] or not use_toggles)

    if wanted("localization", "tube"):
        report["localization"] = run_tube(ctx)
    if wanted("stationarity", "stationarity"):
        report["stationarity"] = run_stationarity(ctx)
    if wanted("rate", "certificate"):
        report["rate"] = run_rate(ctx)
    if wanted("measured_exponent", "exponent"):
        report["measured_exponent"], _ = run_pair(ctx)
    report["provenance"] = provenance(ctx, command)
    return jsonable(report), ctx
