"""Configuration-driven end-to-end runs and their reports.

One run walks the whole argument at desk scale: smooth the metric at
each eps, measure how far curvature and metric moved, gate on the
smallness quantities, solve the conformal-correction Dirichlet problem,
rescale, verify the corrected curvature is non-negative, compare the
mass of the corrected metric against the shift identity
adm(ghat_eps) = adm(g_eps) + 2 A_eps, and evaluate every explicit
inequality with its slack.  Reports are deterministic CSV tables plus
rendered figures; identical config and seed give byte-identical CSVs.

The negative part of a finite-difference curvature carries noise-level
values of both signs everywhere, so the pipeline restricts s_- to the
set where a negative part can actually live (the smoothed set K_eps
plus the scenario's declared pocket) and records the clipped-away
remainder as a diagnostic.  Outside that set the exact curvature sign
is known from the construction, so the clip removes only grid noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import configparser
import csv
import io
import os

import numpy as np

from .adm import MassReport, adm_mass
from .bounds import BoundsReport, estimate_sobolev_constant, evaluate_bounds
from .conformal import conformal_rescale, conformal_scalar
from .elliptic import BreakdownError, solve_dirichlet
from .errors import ConfigError, GateError, GridError, PositivityError
from .fields import MetricField, Region, ScalarField
from .geometry import (
    dirichlet_energy,
    lp_norm,
    negative_part,
    scalar_curvature,
    sobolev_distance,
    sup_distance,
)
from .mollify import MollifierSpec, equivalence_factor, mollify
from .scenarios import ScenarioSpec, ScenarioTruth, make_scenario

EXIT_PASS = 0
EXIT_ACCEPT_FAIL = 1
EXIT_CONFIG = 2
EXIT_BREAKDOWN = 3


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

_SCENARIO_KEYS = {
    "kind", "n", "disc", "extent", "spacing", "r0",
    "mass", "amplitude", "gamma", "p", "pocket_radius", "target_sneg",
    "curvature_sign", "bump_radius", "eps_f", "r_a", "r_b", "rho1", "rho2",
    "cusp_amplitude",
}
_MOLLIFY_KEYS = {"eps"}
_ELLIPTIC_KEYS = {"tol", "max_iter"}
_BOUNDS_KEYS = {"p", "strict", "slack_tol", "sghat_tol", "mass_gap_slack"}
_OUTPUT_KEYS = {"dir", "seed", "figures"}
_SECTIONS = {
    "scenario": _SCENARIO_KEYS,
    "mollify": _MOLLIFY_KEYS,
    "elliptic": _ELLIPTIC_KEYS,
    "bounds": _BOUNDS_KEYS,
    "output": _OUTPUT_KEYS,
}
_FLOAT_SCENARIO_KEYS = {
    "extent", "spacing", "r0", "mass", "amplitude", "gamma", "p",
    "pocket_radius", "target_sneg", "bump_radius", "eps_f", "r_a", "r_b",
    "rho1", "rho2", "cusp_amplitude",
}


@dataclass
class PipelineConfig:
    scenario: ScenarioSpec
    eps_list: list = field(default_factory=list)
    elliptic_tol: float = 1e-8
    elliptic_max_iter: int = 20000
    bounds_p: float | None = 2.0
    strict: bool = True
    slack_tol: float = 1e-3
    sghat_tol: float = 1e-6
    mass_gap_slack: float = 0.10
    out_dir: str = "out"
    seed: int = 0
    figures: bool = True


def parse_config(path: str) -> PipelineConfig:
    """Read the sectioned key-value config; unknown keys are hard errors."""
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise ConfigError(f"cannot read config file {path!r}")
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser[section]:
            if key not in _SECTIONS[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
    if "scenario" not in parser or "kind" not in parser["scenario"]:
        raise ConfigError("config needs a [scenario] section with a 'kind'")

    sc = parser["scenario"]
    params = {}
    for key in sc:
        if key in ("kind", "n", "disc", "extent", "spacing", "r0"):
            continue
        if key in _FLOAT_SCENARIO_KEYS:
            params[key] = sc.getfloat(key)
        else:
            params[key] = sc.get(key)
    try:
        spec = ScenarioSpec(
            kind=sc.get("kind"),
            n=sc.getint("n", fallback=3),
            disc=sc.get("disc", fallback="radial"),
            extent=sc.getfloat("extent", fallback=None),
            spacing=sc.getfloat("spacing", fallback=None),
            r0=sc.getfloat("r0", fallback=None),
            params=params,
        )
    except (GridError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc

    eps_list = []
    if "mollify" in parser and parser["mollify"].get("eps", "").strip():
        try:
            eps_list = [float(tok) for tok in parser["mollify"]["eps"].split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad eps list: {exc}") from exc
        if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
            raise ConfigError("eps list must be strictly decreasing")
        if any(e <= 0 for e in eps_list):
            raise ConfigError("eps values must be positive")

    cfg = PipelineConfig(scenario=spec, eps_list=eps_list)
    if "elliptic" in parser:
        cfg.elliptic_tol = parser["elliptic"].getfloat("tol", fallback=cfg.elliptic_tol)
        cfg.elliptic_max_iter = parser["elliptic"].getint("max_iter",
                                                          fallback=cfg.elliptic_max_iter)
    if "bounds" in parser:
        b = parser["bounds"]
        if "p" in b:
            cfg.bounds_p = b.getfloat("p")
        cfg.strict = b.getboolean("strict", fallback=cfg.strict)
        cfg.slack_tol = b.getfloat("slack_tol", fallback=cfg.slack_tol)
        cfg.sghat_tol = b.getfloat("sghat_tol", fallback=cfg.sghat_tol)
        cfg.mass_gap_slack = b.getfloat("mass_gap_slack", fallback=cfg.mass_gap_slack)
    if "output" in parser:
        o = parser["output"]
        cfg.out_dir = o.get("dir", fallback=cfg.out_dir)
        cfg.seed = o.getint("seed", fallback=cfg.seed)
        cfg.figures = o.getboolean("figures", fallback=cfg.figures)
    return cfg


def validate_config(cfg: PipelineConfig):
    """Cheap checks that do not build the scenario."""
    from .scenarios import _make_disc
    disc = _make_disc(cfg.scenario)
    for eps in cfg.eps_list:
        if eps < 2.0 * disc.h:
            raise ConfigError(f"eps = {eps:g} is below 2h = {2 * disc.h:g}")
    return disc


# ---------------------------------------------------------------------------
# per-eps branch
# ---------------------------------------------------------------------------

RUN_COLUMNS = (
    "eps", "sup_dist", "w2_dist", "s_diff_n2", "s_neg_n2", "rho",
    "c1", "alpha", "a_p", "iterations", "residual",
    "v_min", "v_max", "v_nstar", "grad_v_l2sq",
    "a_fit", "a_int", "mass_g", "mass_g_eps", "mass_ghat",
    "shift_gap_rel", "sghat_min", "sneg_clip_residual", "status",
)


@dataclass
class BranchResult:
    eps: float
    row: dict
    bounds: BoundsReport | None = None
    mass_report_ghat: MassReport | None = None
    v_values: np.ndarray | None = None
    error: str | None = None
    breakdown: bool = False


@dataclass
class PipelineResult:
    config: PipelineConfig
    truth: ScenarioTruth
    mass_report_g: MassReport | None
    branches: list
    verdicts: list            # (name, ok, detail)
    status: int
    baseline: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.status == EXIT_PASS


def _restricted_negative_part(s: ScalarField, allowed: np.ndarray):
    """Negative part confined to ``allowed``; returns (field, clip residual)."""
    sneg = negative_part(s)
    clipped = np.where(allowed, sneg.values, 0.0)
    resid = float(np.abs(sneg.values[~allowed]).max()) if (~allowed).any() else 0.0
    return ScalarField(s.disc, clipped, support=(clipped > 0)), resid


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    g, truth = make_scenario(config.scenario)
    if config.scenario.kind == "blowup_disc":
        return _run_blowup(config, g, truth)

    n = g.disc.n
    a_n = 4.0 * (n - 1) / (n - 2)
    n_star = 2.0 * n / (n - 2.0)
    region = Region.whole(g.disc)
    s_g = scalar_curvature(g)
    mass_g = adm_mass(g)
    eps_list = config.eps_list or [float("nan")]

    pocket = None
    if truth.sneg_radius is not None:
        pocket = g.disc.radius() <= truth.sneg_radius

    branches = []
    c1_cache = None   # reused across identity branches (bit-identical metric)
    for eps in eps_list:
        row = {c: float("nan") for c in RUN_COLUMNS}
        row["eps"] = eps
        row["mass_g"] = mass_g.m_inf
        branch = BranchResult(eps, row)
        branches.append(branch)
        try:
            if config.eps_list and truth.rough_charts:
                sm = mollify(g, MollifierSpec(eps=eps, charts=truth.rough_charts))
            else:
                sm = mollify(g, MollifierSpec(eps=max(eps, 2 * g.disc.h)
                                              if np.isfinite(eps) else 2 * g.disc.h,
                                              charts=()))
            g_eps, K_eps = sm.g_eps, sm.K_eps
            identity = not sm.K_eps.mask.any()   # smoothing touched nothing
            if identity:
                # bit-identical metric: every distance is exactly zero and
                # the curvature field can be reused as is
                row["sup_dist"] = 0.0
                row["w2_dist"] = 0.0
                row["rho"] = 1.0
                s_eps = s_g
                row["s_diff_n2"] = 0.0
            else:
                row["sup_dist"] = sup_distance(g_eps, g)
                row["w2_dist"] = sobolev_distance(g_eps, g)
                row["rho"] = equivalence_factor(g, g_eps)
                s_eps = scalar_curvature(g_eps)
                diff = ScalarField(g.disc, s_eps.values - s_g.values)
                row["s_diff_n2"] = lp_norm(diff, n / 2.0, g)

            allowed = K_eps.mask.copy()
            if pocket is not None:
                allowed |= pocket
            sneg, clip_resid = _restricted_negative_part(s_eps, allowed)
            row["s_neg_n2"] = lp_norm(sneg, n / 2.0, g)
            row["sneg_clip_residual"] = clip_resid

            if identity and c1_cache is not None:
                c1_est = c1_cache
            else:
                c1_est = estimate_sobolev_constant(g_eps, region, seed=config.seed)
            if identity:
                c1_cache = c1_est
            row["c1"] = c1_est.value
            alpha = c1_est.value * lp_norm(
                ScalarField(g.disc, sneg.values / a_n, support=sneg.support),
                n / 2.0, g_eps, region)
            row["alpha"] = alpha

            f = ScalarField(g.disc, sneg.values / a_n, support=sneg.support)
            rep = solve_dirichlet(g_eps, f, region, tol=config.elliptic_tol,
                                  max_iter=config.elliptic_max_iter, alpha=alpha)
            v = rep.v
            branch.v_values = v.values
            row["iterations"] = rep.iterations
            row["residual"] = rep.residual
            row["v_min"] = float(v.values.min())
            row["v_max"] = float(v.values.max())
            row["v_nstar"] = lp_norm(v, n_star, g_eps, region)
            row["grad_v_l2sq"] = dirichlet_energy(v.values, g_eps, region)
            row["a_fit"] = rep.A_fit if rep.A_fit is not None else float("nan")
            row["a_int"] = rep.A_int if rep.A_int is not None else float("nan")

            u = ScalarField(g.disc, 1.0 + v.values)
            s_hat = conformal_scalar(g_eps, u, s_g=s_eps)
            inter = s_hat.meta["interior"]
            row["sghat_min"] = float(s_hat.values[inter].min())

            ghat = conformal_rescale(g_eps, u)
            mass_g_eps = adm_mass(g_eps)
            row["mass_g_eps"] = mass_g_eps.m_inf
            mass_ghat = adm_mass(ghat, derivatives="grid")
            branch.mass_report_ghat = mass_ghat
            row["mass_ghat"] = mass_ghat.m_inf
            two_A = 2.0 * (rep.A_int if rep.A_int is not None else 0.0)
            gap = abs(mass_ghat.m_inf - mass_g_eps.m_inf - two_A)
            row["shift_gap_rel"] = gap / max(abs(mass_g_eps.m_inf), abs(two_A), 1e-6)

            measured = {
                "v_nstar": row["v_nstar"],
                "grad_v_l2sq": row["grad_v_l2sq"],
                "v_min": row["v_min"],
                "v_max": row["v_max"],
                "adm_mass": mass_g.m_inf,
            }
            branch.bounds = evaluate_bounds(g_eps, sneg, region, config.bounds_p,
                                            measured, c1_est=c1_est,
                                            seed=config.seed)
            ap = branch.bounds.A_p
            row["a_p"] = ap if ap is not None else float("nan")
            row["status"] = "ok"
        except BreakdownError as exc:
            branch.error = str(exc)
            branch.breakdown = True
            row["status"] = "breakdown"
        except (GateError, GridError, PositivityError) as exc:
            branch.error = str(exc)
            row["status"] = "error"

    verdicts = _verdicts(config, truth, mass_g, branches)
    status = _status(config, branches, verdicts)
    baseline = {
        "s_inf_norm": float(np.abs(s_g.values[s_g.meta["interior"]]).max()),
        "mass_g_resid": mass_g.fit_residual,
    }
    return PipelineResult(config, truth, mass_g, branches, verdicts, status, baseline)


def _run_blowup(config, g, truth):
    """The n = 2 disc demo: solve per concentration radius, watch u(0)."""
    from .scenarios import ScenarioSpec as SSpec

    eps_list = config.eps_list or [0.2, 0.1, 0.05]
    branches = []
    centers = []
    for eps in eps_list:
        row = {c: float("nan") for c in RUN_COLUMNS}
        row["eps"] = eps
        branch = BranchResult(eps, row)
        branches.append(branch)
        try:
            spec = SSpec("blowup_disc", n=2, disc="radial",
                         extent=config.scenario.extent,
                         spacing=config.scenario.spacing,
                         params={"eps_f": eps})
            g_eps, tr = make_scenario(spec)
            rep = solve_dirichlet(g_eps, tr.forcing, tol=config.elliptic_tol,
                                  max_iter=config.elliptic_max_iter,
                                  alpha=None, estimate_gate=False,
                                  fit_annulus=None)
            u_center = 1.0 + float(rep.v.values[0])
            row["v_max"] = float(rep.v.values.max())
            row["v_min"] = float(rep.v.values.min())
            row["iterations"] = rep.iterations
            row["residual"] = rep.residual
            row["sghat_min"] = u_center       # reused column: u at the center
            row["status"] = "ok"
            branch.v_values = rep.v.values
            centers.append(u_center)
        except BreakdownError as exc:
            branch.error = str(exc)
            branch.breakdown = True
            row["status"] = "breakdown"
            centers.append(float("nan"))
    ok = all(b.row["status"] == "ok" for b in branches)
    increasing = all(b > a for a, b in zip(centers, centers[1:]) if np.isfinite(a))
    verdicts = [
        ("branches_ok", ok, f"{sum(b.row['status'] == 'ok' for b in branches)}"
                            f"/{len(branches)} solves converged"),
        ("center_blowup", increasing,
         "u_eps(0) strictly increasing along decreasing eps: "
         + ", ".join(f"{c:.6g}" for c in centers)),
    ]
    status = EXIT_PASS if all(v[1] for v in verdicts) else EXIT_ACCEPT_FAIL
    return PipelineResult(config, truth, None, branches, verdicts, status)


def _verdicts(config, truth, mass_g, branches):
    verdicts = []
    ok_branches = [b for b in branches if b.row["status"] == "ok"]
    verdicts.append(("branches_ok", len(ok_branches) == len(branches),
                     f"{len(ok_branches)}/{len(branches)} eps branches completed"))

    if truth.mass_exact is not None and mass_g is not None:
        err = abs(mass_g.m_inf - truth.mass_exact)
        scale = max(abs(truth.mass_exact), 1e-8)
        ok = err <= 0.01 * scale if truth.mass_exact != 0 else err <= 1e-8
        verdicts.append(("mass_baseline", ok,
                         f"adm(g) = {mass_g.m_inf:.8g} vs exact "
                         f"{truth.mass_exact:.8g} (err {err:.3g})"))

    if ok_branches:
        worst = max(b.row["sghat_min"] for b in ok_branches)
        low = min(b.row["sghat_min"] for b in ok_branches)
        verdicts.append(("corrected_curvature", low >= -config.sghat_tol,
                         f"min s_ghat over branches = {low:.3e} "
                         f"(tolerance -{config.sghat_tol:g})"))

        exact = all(abs(b.row["mass_g_eps"] - b.row["mass_g"]) <= 1e-12
                    * max(1.0, abs(b.row["mass_g"])) for b in ok_branches)
        verdicts.append(("mass_untouched_by_smoothing", exact,
                         "adm(g_eps) = adm(g) on every branch"))

        gaps = [abs(b.row["mass_ghat"] - b.row["mass_g"]) for b in ok_branches]
        slack = 1.0 + config.mass_gap_slack
        monotone = all(g2 <= g1 * slack for g1, g2 in zip(gaps, gaps[1:]))
        detail = "gaps |adm(ghat)-adm(g)|: " + ", ".join(f"{x:.3e}" for x in gaps)
        if len(gaps) >= 2:
            verdicts.append(("mass_convergence", monotone, detail))
        shift_ok = all(b.row["shift_gap_rel"] <= 0.05 for b in ok_branches)
        verdicts.append(("mass_shift_identity", shift_ok,
                         "relative gap in adm(ghat) = adm(g_eps) + 2A: "
                         + ", ".join(f"{b.row['shift_gap_rel']:.3%}" for b in ok_branches)))

        worst_slack = 0.0
        for b in ok_branches:
            if b.bounds is not None:
                worst_slack = min(worst_slack, b.bounds.worst_relative_slack())
        verdicts.append(("bound_suite", worst_slack >= -config.slack_tol,
                         f"worst relative inequality slack {worst_slack:.3e}"))

        bound_vals = [b.bounds.mass_bound for b in ok_branches
                      if b.bounds is not None and b.bounds.mass_bound is not None]
        if bound_vals and mass_g is not None:
            rhs = max(bound_vals)
            verdicts.append(("mass_lower_bound", mass_g.m_inf >= rhs - 1e-10,
                             f"adm(g) = {mass_g.m_inf:.6g} >= bound {rhs:.6g}"))
    return verdicts


def _status(config, branches, verdicts):
    if any(b.breakdown for b in branches):
        return EXIT_BREAKDOWN
    if config.strict and not all(ok for _, ok, _ in verdicts):
        return EXIT_ACCEPT_FAIL
    return EXIT_PASS


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

def _fmt(x):
    if isinstance(x, str):
        return x
    if x is None:
        return "nan"
    return f"{x:.17g}"


def emit_report(result: PipelineResult, out_dir: str | None = None) -> list:
    """Write run.csv, bounds.csv, summary.txt, plotdata/*.csv and figures.

    Returns the list of files written.  CSVs are byte-deterministic for a
    fixed config and seed.
    """
    out = out_dir or result.config.out_dir
    os.makedirs(out, exist_ok=True)
    os.makedirs(os.path.join(out, "plotdata"), exist_ok=True)
    written = []

    path = os.path.join(out, "run.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUN_COLUMNS)
        for b in result.branches:
            writer.writerow([_fmt(b.row.get(c)) for c in RUN_COLUMNS])
    written.append(path)

    path = os.path.join(out, "bounds.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eps", "key", "value"])
        for b in result.branches:
            if b.bounds is None:
                continue
            for key, val in b.bounds.flat_items():
                writer.writerow([_fmt(b.eps), key, _fmt(val)])
    written.append(path)

    path = os.path.join(out, "summary.txt")
    with open(path, "w") as fh:
        fh.write(_summary_text(result))
    written.append(path)

    written += _emit_plotdata(result, out)
    if result.config.figures:
        written += _emit_figures(result, out)
    return written


def _summary_text(result: PipelineResult) -> str:
    buf = io.StringIO()
    cfg = result.config
    buf.write(f"scenario: {cfg.scenario.kind} (n = {cfg.scenario.n}, "
              f"{cfg.scenario.disc})\n")
    if result.mass_report_g is not None:
        mr = result.mass_report_g
        buf.write(f"adm(g): {mr.m_inf:.10g} (fit residual {mr.fit_residual:.3g}"
                  f"{'' if mr.resolved else '; ' + mr.note})\n")
    if result.truth.mass_exact is not None:
        buf.write(f"exact mass: {result.truth.mass_exact:.10g}\n")
    buf.write("\nbranches:\n")
    for b in result.branches:
        if b.row["status"] == "ok":
            buf.write(f"  eps = {b.eps:g}: ok  (alpha = {b.row['alpha']:.4g}, "
                      f"iters = {b.row['iterations']:g}, "
                      f"mass_ghat = {b.row['mass_ghat']:.8g})\n")
        else:
            buf.write(f"  eps = {b.eps:g}: {b.row['status']} -- {b.error}\n")
        if b.bounds is not None:
            neg = {k: v for k, v in b.bounds.slacks.items() if v[0] < 0}
            if neg:
                buf.write("    NEGATIVE SLACK diagnostics (lower c1 estimate "
                          "cannot explain these):\n")
                for k, (slack, scale) in neg.items():
                    buf.write(f"      {k}: slack = {slack:.6g} (scale {scale:.6g})\n")
                buf.write(f"      c1 = {b.bounds.c1:.6g} via {b.bounds.c1_trial}; "
                          f"alpha = {b.bounds.alpha:.6g}; A_p = {b.bounds.A_p}\n")
    buf.write("\nverdicts:\n")
    for name, ok, detail in result.verdicts:
        buf.write(f"  [{'PASS' if ok else 'FAIL'}] {name}: {detail}\n")
    buf.write(f"\nexit status: {result.status}\n")
    return buf.getvalue()


def _emit_plotdata(result: PipelineResult, out: str) -> list:
    written = []
    pd_dir = os.path.join(out, "plotdata")

    path = os.path.join(pd_dir, "convergence.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eps", "sup_dist", "w2_dist", "s_diff_n2", "s_neg_n2", "rho"])
        for b in result.branches:
            writer.writerow([_fmt(b.row.get(k)) for k in
                             ("eps", "sup_dist", "w2_dist", "s_diff_n2",
                              "s_neg_n2", "rho")])
    written.append(path)

    if result.mass_report_g is not None:
        path = os.path.join(pd_dir, "mass_vs_radius.csv")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["r", "m_g", "m_ghat_last"])
            last = None
            for b in reversed(result.branches):
                if b.mass_report_ghat is not None:
                    last = b.mass_report_ghat
                    break
            mr = result.mass_report_g
            for i, r in enumerate(mr.radii):
                mg = mr.masses[i]
                mh = last.masses[i] if last is not None and i < len(last.masses) \
                    else float("nan")
                writer.writerow([_fmt(r), _fmt(mg), _fmt(mh)])
        written.append(path)

    for b in result.branches:
        if b.v_values is not None:
            path = os.path.join(pd_dir, "solution_profile.csv")
            disc = result.config.scenario
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["r", "v"])
                vr, vv = _radial_profile(result, b)
                for r, v in zip(vr, vv):
                    writer.writerow([_fmt(r), _fmt(v)])
            written.append(path)
            break

    path = os.path.join(pd_dir, "bounds_slack.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["eps", "inequality", "slack", "scale"])
        for b in result.branches:
            if b.bounds is None:
                continue
            for key, (slack, scale) in b.bounds.slacks.items():
                writer.writerow([_fmt(b.eps), key, _fmt(slack), _fmt(scale)])
    written.append(path)
    return written


def _radial_profile(result, branch):
    """Sphere-binned profile of v for plotting."""
    from .scenarios import _make_disc
    disc = _make_disc(result.config.scenario)
    v = branch.v_values
    if disc.kind == "radial":
        return disc.axis_coords(), v
    r = disc.radius().ravel()
    vals = v.ravel()
    nbins = 60
    edges = np.linspace(0, r.max(), nbins + 1)
    idx = np.clip(np.digitize(r, edges) - 1, 0, nbins - 1)
    sums = np.bincount(idx, weights=vals, minlength=nbins)
    cnts = np.maximum(np.bincount(idx, minlength=nbins), 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return centers, sums / cnts


def _emit_figures(result: PipelineResult, out: str) -> list:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig_dir = os.path.join(out, "figures")
    os.makedirs(fig_dir, exist_ok=True)
    written = []
    ok = [b for b in result.branches if b.row["status"] == "ok"]

    if ok and np.isfinite(ok[0].row.get("sup_dist", float("nan"))):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        eps = [b.eps for b in ok]
        for key, label in (("sup_dist", "sup distance"),
                           ("w2_dist", "W^{2,n/2} distance"),
                           ("s_diff_n2", "||s_eps - s||"),
                           ("s_neg_n2", "||(s_eps)_-||")):
            vals = [b.row[key] for b in ok]
            if all(np.isfinite(v) and v > 0 for v in vals):
                ax.loglog(eps, vals, "o-", label=label)
        ax.set_xlabel("eps")
        ax.set_ylabel("distance / norm")
        ax.legend(fontsize=8)
        ax.set_title("smoothing convergence")
        fig.tight_layout()
        path = os.path.join(fig_dir, "convergence.png")
        fig.savefig(path, dpi=130)
        plt.close(fig)
        written.append(path)

    if result.mass_report_g is not None:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        mr = result.mass_report_g
        ax.plot(mr.radii, mr.masses, "o-", label="m(r) of g")
        ax.axhline(mr.m_inf, ls="--", c="gray", label="extrapolated")
        for b in reversed(ok):
            if b.mass_report_ghat is not None:
                ax.plot(b.mass_report_ghat.radii, b.mass_report_ghat.masses,
                        "s-", label=f"m(r) of ghat (eps={b.eps:g})")
                break
        ax.set_xlabel("r")
        ax.set_ylabel("m(r)")
        ax.legend(fontsize=8)
        ax.set_title("coordinate-sphere mass")
        fig.tight_layout()
        path = os.path.join(fig_dir, "mass.png")
        fig.savefig(path, dpi=130)
        plt.close(fig)
        written.append(path)

    prof = next((b for b in ok if b.v_values is not None), None)
    if prof is not None:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        rr, vv = _radial_profile(result, prof)
        ax.plot(rr, vv, "-")
        ax.set_xlabel("r")
        ax.set_ylabel("v")
        ax.set_title(f"correction profile (eps = {prof.eps:g})")
        fig.tight_layout()
        path = os.path.join(fig_dir, "solution.png")
        fig.savefig(path, dpi=130)
        plt.close(fig)
        written.append(path)

    slack_rows = [(b.eps, k, v[0]) for b in ok if b.bounds
                  for k, v in b.bounds.slacks.items()]
    if slack_rows:
        fig, ax = plt.subplots(figsize=(5.5, 3.5))
        labels = [f"{k}@{e:g}" for e, k, _ in slack_rows]
        vals = [s for _, _, s in slack_rows]
        colors = ["tab:green" if s >= 0 else "tab:red" for s in vals]
        ax.bar(range(len(vals)), vals, color=colors)
        ax.set_xticks(range(len(vals)))
        ax.set_xticklabels(labels, rotation=60, ha="right", fontsize=7)
        ax.set_ylabel("slack (RHS - LHS)")
        ax.set_title("inequality slack")
        fig.tight_layout()
        path = os.path.join(fig_dir, "bounds.png")
        fig.savefig(path, dpi=130)
        plt.close(fig)
        written.append(path)
    return written
