"""Sobolev-constant estimation and every explicit inequality of the method.

The Sobolev constant c1[g] (smallest C with ||phi||_{n*}^2 <= C
||grad phi||_2^2 for compactly supported phi) admits no closed form on a
curved background, so it is estimated FROM BELOW by maximizing the
Rayleigh quotient over a deterministic family of compactly supported
trials: truncated Aubin-Talenti bubbles (1 + (rho/lam)^2)^(-(n-2)/2) and
polynomial bumps, swept over scales (and jittered centers, seeded).  A
lower estimate makes every smallness gate optimistic and every
right-hand side an underestimate, so inequality checks downstream are
one-sided with the slack recorded, never silently clipped.

Explicit formulas evaluated here (f denotes (1/a_n) s_-):

  alpha      = (1/a_n) c1 ||s_-||_{n/2} = c1 ||f||_{n/2}
  A_p        = c1 ||f||_p vol^{2/n - 1/p}
  ||v||_{n*}        <= alpha/(1-alpha) mu^{1/n*}                 (solvability alpha < 1)
  ||grad v||_2^2    <= (1/a_n) alpha/(1-alpha)^2 ||s_-|| mu^{2/n*}
  sharper, domain-dependent variants with a_n - c1 ||s_-|| in the
  denominators (gate c1 ||s_-|| < a_n), and the mass lower bound
  adm(g) >= -(1/(2(n-1) omega_{n-1})) ||s_-|| / (1 - alpha)^2 mu^{2/n*}.
  Iteration sup bounds: v >= -chi^tau A_p^(sigma/2+1)/(1-A_p),
                        v <= +chi^tau A_p/(1-A_p)      (gate A_p < 1, p > n/2)
  and at the critical exponent p = n/2 the iteration survives only
  beta_max = floor(1/sqrt(c1 ||f||_{n/2})) doublings, capping the
  reachable integrability at p_max = beta_max * n*.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import GateError, GridError
from .fields import MetricField, Region, ScalarField, unit_sphere_area
from .geometry import dirichlet_energy, lp_norm, negative_part, riemannian_volume, scalar_curvature


# ---------------------------------------------------------------------------
# Sobolev constant estimator
# ---------------------------------------------------------------------------

@dataclass
class SobolevEstimate:
    value: float
    trial: str
    n_trials: int
    method: str = "trial-function maximization (lower estimate)"


def _inscribed_radius(region: Region, center) -> float:
    disc = region.disc
    r = disc.radius(center)
    outside = ~region.mask
    if not outside.any():
        return float(disc.extent - 2 * disc.h)
    return float(max(r[outside].min() - disc.h, 0.0))


def estimate_sobolev_constant(g: MetricField, region: Region | None = None,
                              budget: str = "full", seed: int = 0) -> SobolevEstimate:
    """Lower estimate of c1[g] on the region by Rayleigh-quotient search."""
    disc = g.disc
    if region is None:
        region = Region.whole(disc)
    if region.is_empty:
        raise GridError("cannot estimate a Sobolev constant on an empty region")
    n = disc.n
    n_star = 2.0 * n / (n - 2.0)
    rng = np.random.default_rng(seed)

    centers = [None]
    if disc.kind == "cartesian" and budget == "full":
        jit = rng.uniform(-disc.h, disc.h, size=3)
        centers.append(tuple(jit))

    n_scales = 10 if budget == "full" else 5
    best = (-np.inf, "none")
    count = 0
    for center in centers:
        rho_max = _inscribed_radius(region, center)
        if rho_max <= 4 * disc.h:
            continue
        r = disc.radius(center)
        lambdas = np.geomspace(3 * disc.h, 0.6 * rho_max, n_scales)
        for lam in lambdas:
            bubble = (1.0 + (r / lam) ** 2) ** (-(n - 2.0) / 2.0)
            cut = (1.0 + (rho_max / lam) ** 2) ** (-(n - 2.0) / 2.0)
            phi = np.maximum(bubble - cut, 0.0)
            q = _rayleigh(phi, g, region, n_star)
            count += 1
            if q > best[0]:
                best = (q, f"bubble(lambda={lam:.4g})")
        for k in (1, 2):
            for frac in (0.5, 0.75, 1.0):
                R = frac * rho_max
                phi = np.clip(1.0 - (r / R) ** 2, 0.0, None) ** k
                q = _rayleigh(phi, g, region, n_star)
                count += 1
                if q > best[0]:
                    best = (q, f"poly(k={k}, R={R:.4g})")
    if not np.isfinite(best[0]):
        raise GridError("region is too small for any trial function")
    return SobolevEstimate(float(best[0]), best[1], count)


def _rayleigh(phi_vals, g, region, n_star):
    phi = ScalarField(g.disc, np.where(region.mask, phi_vals, 0.0))
    num = lp_norm(phi, n_star, g, region) ** 2
    den = dirichlet_energy(phi.values, g, region)
    if den <= 0:
        return -np.inf
    return num / den


def sobolev_constant(g: MetricField, region: Region | None = None,
                     budget: str = "full", seed: int = 0) -> float:
    return estimate_sobolev_constant(g, region, budget, seed).value


# ---------------------------------------------------------------------------
# smallness quantities
# ---------------------------------------------------------------------------

@dataclass
class SmallnessReport:
    alpha: float
    A_p: float | None
    alpha_ok: bool
    A_p_ok: bool | None
    c1: float
    sneg_norm: float          # ||s_-||_{n/2}
    f_norm_p: float | None    # ||f||_p for the configured p
    vol_factor: float | None  # vol^{2/n - 1/p} used in A_p
    p: float | None


def smallness_alpha(g: MetricField, region: Region | None = None,
                    p: float | None = None, c1: float | None = None,
                    s: ScalarField | None = None,
                    vol_mode: str = "supp") -> SmallnessReport:
    """alpha and A_p with their gates.

    The volume factor in A_p uses mu_g(region ∩ supp s_-) by default
    ("supp"); pass vol_mode="domain" for the full-region volume.
    """
    if region is None:
        region = Region.whole(g.disc)
    n = g.disc.n
    a_n = 4.0 * (n - 1) / (n - 2)
    if s is None:
        s = scalar_curvature(g)
    sneg = negative_part(s)
    sneg_norm = lp_norm(sneg, n / 2.0, g, region)
    if c1 is None:
        c1 = sobolev_constant(g, region)
    alpha = c1 * sneg_norm / a_n
    A_p = f_norm_p = vol_factor = None
    A_p_ok = None
    if p is not None and p > n / 2.0:
        f = ScalarField(g.disc, sneg.values / a_n, support=sneg.support)
        f_norm_p = lp_norm(f, p, g, region)
        supp = Region(g.disc, sneg.support & region.mask, "supp s_-")
        if vol_mode == "supp" and not supp.is_empty:
            vol = riemannian_volume(supp, g)
        else:
            vol = riemannian_volume(region, g)
        vol_factor = vol ** (2.0 / n - 1.0 / p)
        A_p = c1 * f_norm_p * vol_factor
        A_p_ok = A_p < 1.0
    return SmallnessReport(alpha, A_p, alpha < 1.0, A_p_ok, c1,
                           sneg_norm, f_norm_p, vol_factor, p)


# ---------------------------------------------------------------------------
# right-hand sides of the elliptic bounds
# ---------------------------------------------------------------------------

@dataclass
class EllipticBoundsRHS:
    vbound_prop: float     # alpha/(1-alpha) mu^{1/n*}
    dwbound_prop: float    # (1/a_n) alpha/(1-alpha)^2 ||s_-|| mu^{2/n*}
    vbound_sharp: float    # c1||s_-|| / (a_n - c1||s_-||) mu^{1/n*}
    dwbound_sharp: float   # c1||s_-||^2 / (a_n - c1||s_-||)^2 mu^{2/n*}
    alpha: float
    gate_alpha: bool       # alpha < 1
    gate_sharp: bool       # c1 ||s_-|| < a_n
    mu_supp: float
    violated_gate: str | None = None


def elliptic_bounds_rhs(g: MetricField, f: ScalarField,
                        region: Region | None = None,
                        c1: float | None = None) -> EllipticBoundsRHS:
    """All four explicit right-hand sides for the Dirichlet solution.

    ``f`` is the a_n-scaled negative part (the solver's zeroth-order
    coefficient); both the solvability-gated and the sharper
    a_n-denominator variants are returned.  A violated gate marks the
    corresponding values infinite and names the gate.
    """
    if region is None:
        region = Region.whole(g.disc)
    n = g.disc.n
    a_n = 4.0 * (n - 1) / (n - 2)
    n_star = 2.0 * n / (n - 2.0)
    if c1 is None:
        c1 = sobolev_constant(g, region)
    f_norm = lp_norm(f, n / 2.0, g, region)
    sneg_norm = a_n * f_norm
    alpha = c1 * f_norm
    supp = Region(g.disc, f.support & region.mask, "supp f")
    mu = riemannian_volume(supp, g) if not supp.is_empty else 0.0

    gate_alpha = alpha < 1.0
    gate_sharp = c1 * sneg_norm < a_n
    inf = float("inf")
    if gate_alpha:
        vb = alpha / (1.0 - alpha) * mu ** (1.0 / n_star)
        dwb = (alpha / (1.0 - alpha) ** 2) * sneg_norm * mu ** (2.0 / n_star) / a_n
    else:
        vb = dwb = inf
    if gate_sharp:
        den = a_n - c1 * sneg_norm
        vbs = c1 * sneg_norm / den * mu ** (1.0 / n_star)
        dwbs = c1 * sneg_norm**2 / den**2 * mu ** (2.0 / n_star)
    else:
        vbs = dwbs = inf
    violated = None
    if not gate_alpha:
        violated = "alpha < 1"
    elif not gate_sharp:
        violated = "c1 ||s_-|| < a_n"
    return EllipticBoundsRHS(vb, dwb, vbs, dwbs, alpha, gate_alpha,
                             gate_sharp, mu, violated)


# ---------------------------------------------------------------------------
# mass lower bound
# ---------------------------------------------------------------------------

def mass_lower_bound(g: MetricField, c1: float | None = None,
                     s: ScalarField | None = None,
                     region: Region | None = None) -> float:
    """The explicit (negative) lower bound on adm(g).

    Requires s_- compactly supported and c1 ||s_-||_{n/2} < a_n.
    """
    if region is None:
        region = Region.whole(g.disc)
    n = g.disc.n
    a_n = 4.0 * (n - 1) / (n - 2)
    n_star = 2.0 * n / (n - 2.0)
    if s is None:
        s = scalar_curvature(g)
    sneg = negative_part(s)
    supp = Region(g.disc, sneg.support & region.mask, "supp s_-")
    if supp.is_empty:
        return 0.0
    if supp.touches_outer_boundary():
        raise GateError("s_- is not compactly supported inside the domain",
                        gate="compact support")
    sneg_norm = lp_norm(sneg, n / 2.0, g, region)
    if c1 is None:
        c1 = sobolev_constant(g, region)
    if not c1 * sneg_norm < a_n:
        raise GateError(
            f"c1 ||s_-||_{{n/2}} = {c1 * sneg_norm:.4g} is not below a_n = {a_n:.4g}",
            gate="c1 ||s_-|| < a_n", value=c1 * sneg_norm)
    mu = riemannian_volume(supp, g)
    denom = (1.0 - c1 * sneg_norm / a_n) ** 2
    return -sneg_norm / (2.0 * (n - 1) * unit_sphere_area(n) * denom) \
        * mu ** (2.0 / n_star)


# ---------------------------------------------------------------------------
# iteration sup bounds and their critical-exponent breakdown
# ---------------------------------------------------------------------------

def moser_bounds(n: int, p: float, c1: float, f_norm: float, vol: float):
    """Sup bracket (-lower, +upper) for the Dirichlet solution v.

    lower = chi^tau A_p^(sigma/2 + 1) / (1 - A_p),
    upper = chi^tau A_p / (1 - A_p),  A_p = c1 f_norm vol^{2/n - 1/p}.
    """
    from .conformal import structural_constants

    sc = structural_constants(n, p)
    if sc.critical:
        raise GateError(f"p = {p:g} is not above the critical exponent n/2 = {n/2:g}",
                        gate="p > n/2", value=p)
    A_p = c1 * f_norm * vol ** (2.0 / n - 1.0 / p)
    if A_p == 0.0:
        return (0.0, 0.0)
    if A_p >= 1.0:
        raise GateError(f"A_p = {A_p:.4g} is not below 1", gate="A_p < 1", value=A_p)
    chi_tau = sc.chi ** sc.tau
    lower = chi_tau * A_p ** (sc.sigma / 2.0 + 1.0) / (1.0 - A_p)
    upper = chi_tau * A_p / (1.0 - A_p)
    return (-lower, upper)


@dataclass
class BreakdownReport:
    """How far the Moser doubling survives at the critical exponent."""

    beta_max: int
    p_max: float
    step_gates: list      # c1 beta^2 ||f||_{n/2} for beta = 1..beta_max


def moser_breakdown(n: int, c1: float, f_norm_critical: float) -> BreakdownReport:
    """beta_max = floor(1/sqrt(c1 ||f||_{n/2})), p_max = beta_max n*.

    The per-step gate values c1 beta^2 ||f|| show where the doubling
    chain crosses 1; p_max -> infinity as the critical norm -> 0.
    """
    if f_norm_critical <= 0:
        raise ValueError("need a positive critical norm")
    x = c1 * f_norm_critical
    beta_max = max(int(math.floor(1.0 / math.sqrt(x))), 1)
    n_star = 2.0 * n / (n - 2.0)
    gates = [c1 * beta**2 * f_norm_critical for beta in range(1, beta_max + 1)]
    return BreakdownReport(beta_max, beta_max * n_star, gates)


# ---------------------------------------------------------------------------
# consolidated report for a solve
# ---------------------------------------------------------------------------

@dataclass
class BoundsReport:
    """Everything measured against everything promised, with slacks.

    slack = RHS - measured LHS for the upper bounds (>= 0 expected),
    measured - bound for the lower ones.  Negative slack is recorded and
    flagged, never clipped: the Sobolev estimate is one-sided.
    """

    c1: float
    c1_trial: str
    c1_method: str
    alpha: float
    A_p: float | None
    rhs: EllipticBoundsRHS
    moser_lower: float | None
    moser_upper: float | None
    mass_bound: float | None
    breakdown: BreakdownReport | None
    slacks: dict = field(default_factory=dict)
    gates: dict = field(default_factory=dict)

    def worst_relative_slack(self) -> float:
        worst = 0.0
        for key, (slack, scale) in self.slacks.items():
            rel = slack / max(scale, 1e-300)
            worst = min(worst, rel)
        return worst

    def flat_items(self):
        items = [
            ("c1_estimate", self.c1),
            ("c1_trial", self.c1_trial),
            ("alpha", self.alpha),
            ("A_p", self.A_p if self.A_p is not None else float("nan")),
            ("vbound_rhs", self.rhs.vbound_prop),
            ("dwbound_rhs", self.rhs.dwbound_prop),
            ("vbound_sharp_rhs", self.rhs.vbound_sharp),
            ("dwbound_sharp_rhs", self.rhs.dwbound_sharp),
            ("mu_supp", self.rhs.mu_supp),
            ("moser_lower", self.moser_lower if self.moser_lower is not None else float("nan")),
            ("moser_upper", self.moser_upper if self.moser_upper is not None else float("nan")),
            ("mass_lower_bound", self.mass_bound if self.mass_bound is not None else float("nan")),
        ]
        if self.breakdown is not None:
            items += [("beta_max", self.breakdown.beta_max),
                      ("p_max", self.breakdown.p_max)]
        for key, (slack, scale) in self.slacks.items():
            items.append((f"slack_{key}", slack))
        for key, ok in self.gates.items():
            items.append((f"gate_{key}", ok))
        return items


def evaluate_bounds(g: MetricField, sneg: ScalarField, region: Region,
                    p: float | None, measured: dict,
                    c1_est: SobolevEstimate | None = None,
                    seed: int = 0) -> BoundsReport:
    """Assemble the full inequality report for one solve.

    ``measured`` may carry: v_nstar, grad_v_l2sq, v_min, v_max, adm_mass.
    """
    n = g.disc.n
    a_n = 4.0 * (n - 1) / (n - 2)
    if c1_est is None:
        c1_est = estimate_sobolev_constant(g, region, seed=seed)
    c1 = c1_est.value
    f = ScalarField(g.disc, sneg.values / a_n, support=sneg.support)
    rhs = elliptic_bounds_rhs(g, f, region, c1=c1)
    small = smallness_alpha(g, region, p=p, c1=c1,
                            s=ScalarField(g.disc, -sneg.values, support=sneg.support))

    moser_lo = moser_hi = None
    breakdown = None
    f_crit = lp_norm(f, n / 2.0, g, region)
    if f_crit > 0:
        breakdown = moser_breakdown(n, c1, f_crit)
    if p is not None and small.A_p is not None and small.A_p < 1.0:
        supp = Region(g.disc, sneg.support & region.mask, "supp")
        vol = riemannian_volume(supp, g) if not supp.is_empty else 0.0
        if vol > 0:
            moser_lo, moser_hi = moser_bounds(n, p, c1, small.f_norm_p, vol)
        else:
            moser_lo = moser_hi = 0.0

    mass_bound = None
    if rhs.gate_sharp:
        try:
            mass_bound = mass_lower_bound(
                g, c1=c1, s=ScalarField(g.disc, -sneg.values, support=sneg.support),
                region=region)
        except GateError:
            mass_bound = None

    slacks = {}
    if "v_nstar" in measured and np.isfinite(rhs.vbound_prop):
        slacks["v_nstar"] = (rhs.vbound_prop - measured["v_nstar"],
                             max(rhs.vbound_prop, measured["v_nstar"]))
    if "grad_v_l2sq" in measured and np.isfinite(rhs.dwbound_prop):
        slacks["grad_v_l2sq"] = (rhs.dwbound_prop - measured["grad_v_l2sq"],
                                 max(rhs.dwbound_prop, measured["grad_v_l2sq"]))
    if "v_min" in measured and moser_lo is not None:
        slacks["v_min"] = (measured["v_min"] - moser_lo,
                           max(abs(moser_lo), abs(measured["v_min"]), 1e-12))
    if "v_max" in measured and moser_hi is not None:
        slacks["v_max"] = (moser_hi - measured["v_max"],
                           max(abs(moser_hi), abs(measured["v_max"]), 1e-12))
    if "adm_mass" in measured and mass_bound is not None:
        slacks["adm_mass"] = (measured["adm_mass"] - mass_bound,
                              max(abs(mass_bound), abs(measured["adm_mass"]), 1e-12))

    gates = {"alpha": rhs.gate_alpha, "sharp": rhs.gate_sharp}
    if small.A_p_ok is not None:
        gates["A_p"] = small.A_p_ok
    return BoundsReport(c1, c1_est.trial, c1_est.method, rhs.alpha, small.A_p,
                        rhs, moser_lo, moser_hi, mass_bound, breakdown,
                        slacks, gates)
