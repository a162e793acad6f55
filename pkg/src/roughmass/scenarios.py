"""Test-metric families with known ground truth.

Every kind is conformally flat, g = u^(4/(n-2)) delta, built from the
closed-form radial profiles so that masses, curvature signs, and
regularity classes are known exactly:

  euclidean        u = 1.                     mass 0, s = 0.
  schwarzschild    u = 1 + m/(2 r^(n-2)).     mass m, s = 0 (vacuum).
  conformal_bump   u = 1 + c T(r).            mass 2c, s >= 0 pointwise
                   (T the superharmonic capped Green tail; a Gaussian
                   deviation cannot serve here: it stops being
                   superharmonic beyond r^2 > n w^2/2, and no compactly
                   supported deviation is superharmonic at all).
  rough_bump       continuous, W^{2,p} but not C^2: a |x|^gamma cusp.
                   curvature_sign="mixed": w = 1 + c r^gamma eta(r),
                   compact deviation, mass 0, curvature of both signs.
                   curvature_sign="nonneg": u = 1 + c T(r) - a r^gamma
                   chi(r) with the cusp cutoff inside T's transition
                   shell and a small enough that Lap u <= 0 everywhere;
                   mass 2c, s >= 0 pointwise.
  negative_pocket  u = 1 + c T(r) - d P(r) with a compact dimple P;
                   s < 0 exactly where Lap P < 0, inside the pocket
                   ball; d is tuned by bisection to a target
                   ||s_-||_{n/2}.  mass 2c.
  blowup_disc      flat unit disc (n = 2) with unit-mass forcings
                   concentrating on radius-eps balls; demo of the
                   critical-exponent blowup, outside the n >= 3 theory.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import GateError, GridError
from .fields import Discretization, IsotropicExterior, MetricField, Region, ScalarField
from .geometry import lp_norm, negative_part
from .profiles import CappedGreenTail, Dimple, smoothstep, smoothstep_d1, smoothstep_d2

KINDS = ("euclidean", "schwarzschild", "conformal_bump", "rough_bump",
         "negative_pocket", "blowup_disc")


@dataclass
class ScenarioSpec:
    kind: str
    n: int = 3
    disc: str = "radial"            # "radial" | "cartesian"
    extent: float | None = None
    spacing: float | None = None
    r0: float | None = None
    params: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise GridError(f"unknown scenario kind {self.kind!r}; "
                            f"known: {', '.join(KINDS)}")


@dataclass
class ScenarioTruth:
    """What is known exactly about a scenario metric."""

    kind: str
    n: int
    mass_exact: float | None
    curvature_sign: str             # "zero" | "nonneg" | "mixed"
    sneg_radius: float | None       # supp s_- is inside this ball
    regularity: str
    q: float
    rough_charts: tuple = ()        # mollifier chart suggestion
    forcing: ScalarField | None = None   # blowup_disc only
    params: dict = dc_field(default_factory=dict)


_DEFAULTS = {
    "euclidean": dict(extent=8.0, spacing=0.25),
    "schwarzschild": dict(extent=40.0, spacing=0.25, r0=1.0),
    "conformal_bump": dict(extent=24.0, spacing=0.02),
    "rough_bump": dict(extent=20.0, spacing=0.02),
    "negative_pocket": dict(extent=40.0, spacing=0.02),
    "blowup_disc": dict(extent=1.0, spacing=1.0 / 256.0),
}


def _make_disc(spec: ScenarioSpec) -> Discretization:
    dflt = _DEFAULTS[spec.kind]
    extent = spec.extent if spec.extent is not None else dflt["extent"]
    spacing = spec.spacing if spec.spacing is not None else dflt["spacing"]
    if spec.disc == "cartesian":
        if spec.kind == "blowup_disc":
            raise GridError("blowup_disc runs on the radial reduction")
        return Discretization.cartesian(extent, spacing, n=spec.n)
    r0 = spec.r0 if spec.r0 is not None else dflt.get("r0")
    return Discretization.radial(extent, spacing, n=spec.n, r0=r0)


def _isotropic_from_u(disc, n, u_of_r, du_of_r, r_K, q):
    """Metric u^(4/(n-2)) delta from a radial closed-form factor."""
    expo = 4.0 / (n - 2)
    r = disc.radius()
    w_nodes = u_of_r(r) ** expo

    def w(rr):
        return np.asarray(u_of_r(rr)) ** expo

    def dw(rr):
        uu = np.asarray(u_of_r(rr))
        return expo * uu ** (expo - 1.0) * np.asarray(du_of_r(rr))

    ext = IsotropicExterior(w, dw, r_K=r_K, q=q)
    return MetricField.isotropic(disc, w_nodes, exterior=ext, r_K=r_K, q=q)


def make_scenario(spec: ScenarioSpec):
    """Build (MetricField, ScenarioTruth) for the configured kind."""
    builder = {
        "euclidean": _euclidean,
        "schwarzschild": _schwarzschild,
        "conformal_bump": _conformal_bump,
        "rough_bump": _rough_bump,
        "negative_pocket": _negative_pocket,
        "blowup_disc": _blowup_disc,
    }[spec.kind]
    g, truth = builder(spec)
    g.check_definite()
    return g, truth


# ---------------------------------------------------------------------------
# the kinds
# ---------------------------------------------------------------------------

def _euclidean(spec):
    disc = _make_disc(spec)
    g = MetricField.euclidean(disc)
    truth = ScenarioTruth("euclidean", disc.n, 0.0, "zero", None,
                          "smooth", q=np.inf)
    return g, truth


def _schwarzschild(spec):
    if spec.disc == "cartesian" and spec.n != 3:
        raise GridError("cartesian grids are 3-D")
    disc = _make_disc(spec)
    n = disc.n
    m = float(spec.params.get("mass", 1.0))
    if m <= 0:
        raise GridError("schwarzschild needs mass > 0")
    horizon = (m / 2.0) ** (1.0 / (n - 2))
    if disc.kind == "radial" and disc.r0 <= horizon * 0.9:
        raise GridError(f"inner radius {disc.r0:g} is too deep inside the "
                        f"throat (horizon radius {horizon:g}); start the "
                        "exterior chart further out")

    def u(r):
        r = np.asarray(r, dtype=float)
        return 1.0 + m / (2.0 * np.maximum(r, 1e-12) ** (n - 2))

    def du(r):
        r = np.asarray(r, dtype=float)
        return -(n - 2) * m / (2.0 * np.maximum(r, 1e-12) ** (n - 1))

    if disc.kind == "cartesian":
        # keep the sampled factor finite at the central node; it sits far
        # inside r_K and never enters a mass sphere or exterior check
        r = disc.radius()
        expo = 4.0 / (n - 2)
        w_nodes = u(np.maximum(r, 0.55 * horizon)) ** expo
        ext = IsotropicExterior(lambda rr: u(rr) ** expo,
                                lambda rr: expo * u(rr) ** (expo - 1) * du(rr),
                                r_K=horizon, q=float(n - 2))
        g = MetricField.isotropic(disc, w_nodes, exterior=ext,
                                  r_K=2.0 * horizon, q=float(n - 2))
    else:
        g = _isotropic_from_u(disc, n, u, du, r_K=2.0 * horizon, q=float(n - 2))
    truth = ScenarioTruth("schwarzschild", n, m, "zero", None,
                          "smooth (vacuum)", q=float(n - 2),
                          params={"mass": m})
    return g, truth


def _conformal_bump(spec):
    disc = _make_disc(spec)
    n = disc.n
    c = float(spec.params.get("amplitude", 0.1))
    r_a = float(spec.params.get("r_a", 1.0))
    r_b = float(spec.params.get("r_b", 3.0))
    if c <= 0:
        raise GridError("conformal_bump needs amplitude > 0")
    T = CappedGreenTail(n, r_a, r_b)
    g = _isotropic_from_u(disc, n, lambda r: 1.0 + c * T(r),
                          lambda r: c * T.d1(r), r_K=r_b, q=float(n - 2))
    truth = ScenarioTruth("conformal_bump", n, 2.0 * c, "nonneg", None,
                          "smooth, superharmonic factor", q=float(n - 2),
                          rough_charts=(((0.0, 0.0, 0.0) if disc.kind == "cartesian" else 0.0,
                                         r_b),),
                          params={"amplitude": c, "r_a": r_a, "r_b": r_b})
    return g, truth


def _check_gamma(gamma, n, p):
    if not (2.0 - n / p) < gamma < 2.0:
        raise GridError(
            f"gamma = {gamma:g} must lie in (2 - n/p, 2) = "
            f"({2 - n / p:g}, 2) for W^(2,{p:g}) without C^2")


def _rough_bump(spec):
    disc = _make_disc(spec)
    n = disc.n
    c = float(spec.params.get("amplitude", 0.4))
    gamma = float(spec.params.get("gamma", 0.75))
    p = float(spec.params.get("p", 2.0))
    sign = spec.params.get("curvature_sign", "mixed")
    _check_gamma(gamma, n, p)
    r = disc.radius()

    if sign == "mixed":
        r_bump = float(spec.params.get("bump_radius", 1.0))
        eta = Dimple(r_bump, power=3)

        def w(rr):
            rr = np.asarray(rr, dtype=float)
            return 1.0 + c * rr**gamma * eta(rr)

        ext = IsotropicExterior(lambda rr: np.ones_like(np.asarray(rr, float)),
                                lambda rr: np.zeros_like(np.asarray(rr, float)),
                                r_K=r_bump, q=np.inf)
        g = MetricField.isotropic(disc, w(r), exterior=ext, r_K=r_bump, q=np.inf)
        truth = ScenarioTruth(
            "rough_bump", n, 0.0, "mixed", r_bump,
            f"C^0 and W^(2,{p:g}), not C^2 (cusp exponent {gamma:g})",
            q=np.inf,
            rough_charts=(((0.0, 0.0, 0.0) if disc.kind == "cartesian" else 0.0,
                           r_bump),),
            params={"amplitude": c, "gamma": gamma, "p": p,
                    "curvature_sign": sign, "bump_radius": r_bump})
        return g, truth

    if sign != "nonneg":
        raise GridError("curvature_sign must be 'mixed' or 'nonneg'")
    r_a = float(spec.params.get("r_a", 1.0))
    r_b = float(spec.params.get("r_b", 3.0))
    rho1 = float(spec.params.get("rho1", r_a + 0.3 * (r_b - r_a)))
    rho2 = float(spec.params.get("rho2", r_a + 0.7 * (r_b - r_a)))
    T = CappedGreenTail(n, r_a, r_b)

    def chi(rr):
        return 1.0 - smoothstep((np.asarray(rr, float) - rho1) / (rho2 - rho1))

    def dchi(rr):
        return -smoothstep_d1((np.asarray(rr, float) - rho1) / (rho2 - rho1)) / (rho2 - rho1)

    def d2chi(rr):
        return -smoothstep_d2((np.asarray(rr, float) - rho1) / (rho2 - rho1)) / (rho2 - rho1) ** 2

    def lap_cusp(rr):
        rr = np.asarray(rr, dtype=float)
        return (gamma * (gamma + n - 2) * rr ** (gamma - 2) * chi(rr)
                + 2 * gamma * rr ** (gamma - 1) * dchi(rr)
                + rr**gamma * (d2chi(rr) + (n - 1) * dchi(rr) / rr))

    # largest cusp amplitude keeping Lap u <= 0: where the cutoff terms
    # turn Lap(r^gamma chi) negative, the Green shell's strict
    # superharmonicity must absorb them
    ref = np.linspace(1e-4, r_b + 0.5, 20001)
    D = lap_cusp(ref)
    lapT = T.laplacian(ref)
    neg = D < 0
    a_max = np.inf if not neg.any() else float(np.min(c * lapT[neg] / D[neg]))
    if not np.isfinite(a_max) or a_max <= 0:
        raise GridError("cusp cutoff cannot be absorbed; widen [r_a, r_b]")
    a = float(spec.params.get("cusp_amplitude", 0.8 * a_max))
    if a > a_max:
        raise GateError(f"cusp amplitude {a:g} exceeds the superharmonicity "
                        f"budget {a_max:g}", gate="Lap u <= 0")

    def u(rr):
        rr = np.asarray(rr, dtype=float)
        return 1.0 + c * T(rr) - a * rr**gamma * chi(rr)

    def du(rr):
        rr = np.asarray(rr, dtype=float)
        return (c * T.d1(rr)
                - a * (gamma * rr ** (gamma - 1) * chi(rr) + rr**gamma * dchi(rr)))

    g = _isotropic_from_u(disc, n, u, du, r_K=r_b, q=float(n - 2))
    truth = ScenarioTruth(
        "rough_bump", n, 2.0 * c, "nonneg", None,
        f"C^0 and W^(2,{p:g}), not C^2 (cusp exponent {gamma:g}), s >= 0",
        q=float(n - 2),
        rough_charts=(((0.0, 0.0, 0.0) if disc.kind == "cartesian" else 0.0, r_b),),
        params={"amplitude": c, "gamma": gamma, "p": p, "curvature_sign": sign,
                "cusp_amplitude": a, "r_a": r_a, "r_b": r_b})
    return g, truth


def _negative_pocket(spec):
    disc = _make_disc(spec)
    n = disc.n
    a_n = 4.0 * (n - 1) / (n - 2)
    c = float(spec.params.get("amplitude", 0.05))
    R_p = float(spec.params.get("pocket_radius", 0.8))
    r_a = float(spec.params.get("r_a", 1.2))
    r_b = float(spec.params.get("r_b", 2.6))
    target = float(spec.params.get("target_sneg", 0.2))
    p = float(spec.params.get("p", 2.0))
    if R_p > r_a:
        raise GridError("pocket must sit inside the harmonic core (R_p <= r_a)")
    T = CappedGreenTail(n, r_a, r_b)
    P = Dimple(R_p, power=5)
    r = disc.radius()

    def curvature_for(d):
        u = 1.0 + c * T(r) - d * P(r)
        if u.min() <= 0:
            return None, None
        lap_u = c * T.laplacian(r) - d * P.laplacian(r, n)
        s = -a_n * u ** (-(n + 2.0) / (n - 2.0)) * lap_u
        return u, s

    def sneg_norm_for(d):
        u, s = curvature_for(d)
        if u is None:
            return np.inf
        g_try = MetricField.isotropic(disc, u ** (4.0 / (n - 2)))
        sneg = negative_part(ScalarField(disc, s))
        return lp_norm(sneg, n / 2.0, g_try)

    # bracket then bisect the dimple amplitude to the target norm
    d_lo, d_hi = 0.0, max(0.05, 0.5 * c)
    for _ in range(40):
        if sneg_norm_for(d_hi) >= target or not np.isfinite(sneg_norm_for(d_hi)):
            break
        d_hi *= 2.0
    else:
        raise GridError("could not bracket the target ||s_-||; target too large")
    for _ in range(20):
        mid = 0.5 * (d_lo + d_hi)
        if sneg_norm_for(mid) < target:
            d_lo = mid
        else:
            d_hi = mid
    d = 0.5 * (d_lo + d_hi)
    achieved = sneg_norm_for(d)
    if not (0.9 * target <= achieved <= 1.1 * target):
        raise GridError(f"pocket tuning landed at ||s_-|| = {achieved:.4g}, "
                        f"outside 10% of the target {target:.4g}")

    def u_of(rr):
        rr = np.asarray(rr, dtype=float)
        return 1.0 + c * T(rr) - d * P(rr)

    def du_of(rr):
        rr = np.asarray(rr, dtype=float)
        return c * T.d1(rr) - d * P.d1(rr)

    g = _isotropic_from_u(disc, n, u_of, du_of, r_K=r_b, q=float(n - 2))

    # construction-time gate of the mass lower bound hypothesis
    from .bounds import sobolev_constant
    c1 = sobolev_constant(g, budget="small")
    if not c1 * achieved < a_n:
        raise GateError(
            f"c1 ||s_-|| = {c1 * achieved:.4g} violates the bound hypothesis "
            f"(a_n = {a_n:g}); lower target_sneg", gate="c1 ||s_-|| < a_n")

    truth = ScenarioTruth(
        "negative_pocket", n, 2.0 * c, "mixed", R_p,
        "smooth; compact negative pocket", q=float(n - 2),
        rough_charts=(((0.0, 0.0, 0.0) if disc.kind == "cartesian" else 0.0, r_b),),
        params={"amplitude": c, "pocket_radius": R_p, "dimple": d,
                "target_sneg": target, "achieved_sneg": achieved, "p": p,
                "r_a": r_a, "r_b": r_b})
    return g, truth


def _blowup_disc(spec):
    if spec.n not in (2,):
        spec.n = 2
    disc = Discretization.radial(
        spec.extent or _DEFAULTS["blowup_disc"]["extent"],
        spec.spacing or _DEFAULTS["blowup_disc"]["spacing"], n=2)
    eps_f = float(spec.params.get("eps_f", 0.2))
    if eps_f < 2 * disc.h:
        raise GridError("concentration radius under-resolved")
    r = disc.axis_coords()
    P = Dimple(eps_f, power=2)
    g = MetricField.euclidean(disc)
    # unit mass against the discrete disc measure, so the concentration
    # carries exactly the same weight at every eps
    raw = P(r)
    total = float((raw * g.node_measure()).sum())
    f_vals = raw / total
    f = ScalarField(disc, f_vals, support=f_vals > 0)
    truth = ScenarioTruth("blowup_disc", 2, None, "n/a", eps_f,
                          "flat disc demo (outside the n >= 3 theory)",
                          q=np.inf, forcing=f, params={"eps_f": eps_f})
    return g, truth


def scenario_catalog():
    """Kind -> one-line description, for the CLI listing."""
    return {
        "euclidean": "flat metric; mass 0, s = 0",
        "schwarzschild": "isotropic vacuum family (1 + m/(2 r^(n-2)))^(4/(n-2)) delta; mass m",
        "conformal_bump": "superharmonic conformal factor; s >= 0 pointwise, mass 2c",
        "rough_bump": "W^(2,p) cusp, not C^2; curvature_sign mixed (mass 0) or nonneg (mass 2c)",
        "negative_pocket": "compact pocket of s < 0 tuned to a target ||s_-||_(n/2); mass 2c",
        "blowup_disc": "n = 2 unit-disc demo of the critical-exponent blowup",
    }
