"""Dirichlet problems for Lap_g v + f v + f = 0 and decay coefficients.

The operator is discretized in divergence form,
(1/sqrt g) d_i ( sqrt g g^{ij} d_j . ), with diagonal terms as compact
fluxes through cell faces and mixed terms (present only for non-diagonal
metrics) as paired centered differences.  The resulting stencil is
self-adjoint with respect to the discrete Riemannian measure, so the
weighted system is solved with (Jacobi-preconditioned) conjugate
gradients.  A negative-curvature direction during CG means the form
v -> int |grad v|^2 - f v^2 is not coercive, which is exactly the
failure mode of the smallness condition c1 ||f||_{n/2} < 1; it is
surfaced as BreakdownError rather than papered over.

The truncated grid stands in for the manifold: v = 0 is imposed on the
outer boundary, and the decay coefficient A of v ~ A / |x|^(n-2) is
recovered on an interior annulus, both by a least-squares fit and by the
flux integral  A = -(1/((n-2) omega_{n-1})) int [ |grad u|^2 - f u^2 ].
The fit basis includes a constant to absorb the O(R^(2-n)) offset the
artificial boundary imposes on the truncated solution.
"""

from __future__ import annotations

from dataclasses import dataclass
import warnings

import numpy as np
from scipy.ndimage import binary_erosion

from .errors import BreakdownError, GridError, PositivityError, SupportError
from .fields import (
    MetricField,
    Region,
    ScalarField,
    _origin_centered,
    diff1,
    diff2,
    radial_d1,
    radial_d2,
    unit_sphere_area,
)
from .geometry import gradient_squared


# ---------------------------------------------------------------------------
# discrete Laplace-Beltrami
# ---------------------------------------------------------------------------

def _cartesian_flux_coeffs(g: MetricField):
    sqrtg = g.sqrt_det()
    ginv = g.inverse()
    w = [sqrtg * ginv[..., i, i] for i in range(3)]
    offdiag = max(float(np.abs(sqrtg * ginv[..., i, j]).max())
                  for i in range(3) for j in range(3) if i != j)
    mixed = None
    if offdiag > 1e-14:
        mixed = [[sqrtg * ginv[..., i, j] if i != j else None for j in range(3)]
                 for i in range(3)]
    return sqrtg, w, mixed


def _flux_apply_cartesian(g: MetricField, vals: np.ndarray, coeffs=None) -> np.ndarray:
    """Divergence-form Laplacian at margin-1 interior nodes (zeros elsewhere)."""
    h = g.disc.h
    sqrtg, w, mixed = coeffs if coeffs is not None else _cartesian_flux_coeffs(g)
    out = np.zeros_like(vals)
    inner = (slice(1, -1),) * 3
    for i in range(3):
        u = np.moveaxis(vals, i, 0)
        wi = np.moveaxis(w[i], i, 0)
        o = np.moveaxis(out, i, 0)
        w_plus = 0.5 * (wi[1:-1] + wi[2:])
        w_minus = 0.5 * (wi[1:-1] + wi[:-2])
        o[1:-1] += (w_plus * (u[2:] - u[1:-1]) - w_minus * (u[1:-1] - u[:-2])) / (h * h)
    if mixed is not None:
        # paired centered differences; exactly self-adjoint on fields
        # vanishing within two nodes of the edge (the operator interior is
        # eroded accordingly when mixed terms are present)
        for i in range(3):
            for j in range(3):
                if i == j:
                    continue
                dju = diff1(vals, j, h)
                out += diff1(mixed[i][j] * dju, i, h)
    result = np.zeros_like(vals)
    result[inner] = (out / sqrtg)[inner]
    return result


def _radial_flux_coeff_halves(g: MetricField):
    """Flux coefficients rho^{n-1}/sqrt(A) at the two faces of every node."""
    n = g.disc.n
    r = g.disc.axis_coords()
    h = g.disc.h
    A, B = g.radial_AB()
    A_half = 0.5 * (A[:-1] + A[1:])
    B_half = 0.5 * (B[:-1] + B[1:])
    r_half = r[:-1] + h / 2.0
    c_half = (np.sqrt(B_half) * r_half) ** (n - 1) / np.sqrt(A_half)
    c_minus = np.empty_like(r)
    c_plus = np.empty_like(r)
    c_minus[1:] = c_half
    c_plus[:-1] = c_half
    if _origin_centered(g.disc):
        c_minus[0] = 0.0  # face sits at r = 0: no flux through the origin
    else:
        c_minus[0] = np.nan
    c_plus[-1] = np.nan
    return c_minus, c_plus


def _flux_apply_radial(g: MetricField, vals: np.ndarray, halves=None) -> np.ndarray:
    n = g.disc.n
    h = g.disc.h
    # normalize fluxes by the same cell volumes the measure uses; this keeps
    # -W(Lap+f) exactly symmetric and the stencil consistent at the origin
    dens = g.node_measure() / (unit_sphere_area(n) * h)
    c_minus, c_plus = halves if halves is not None else _radial_flux_coeff_halves(g)
    out = np.zeros_like(vals)
    out[1:-1] = (c_plus[1:-1] * (vals[2:] - vals[1:-1])
                 - c_minus[1:-1] * (vals[1:-1] - vals[:-2])) / (h * h)
    if _origin_centered(g.disc):
        out[0] = c_plus[0] * (vals[1] - vals[0]) / (h * h)
    return out / dens


def laplace_beltrami(g: MetricField, values: np.ndarray) -> ScalarField:
    """Lap_g u on the grid: divergence-form fluxes at interior nodes, a
    direct non-divergence evaluation with one-sided stencils on the margin."""
    vals = np.asarray(values, dtype=float)
    disc = g.disc
    if disc.kind == "radial":
        flux = _flux_apply_radial(g, vals)
        interior = np.ones(disc.shape, bool)
        interior[-1] = False
        if not _origin_centered(disc):
            interior[0] = False
        # margin fallback: Lap u = (1/A)[u'' + u'((n-1)(1/r + B'/2B) - A'/2A)]
        A, B = g.radial_AB()
        r = disc.axis_coords()
        du = radial_d1(vals, disc)
        d2u = radial_d2(vals, disc)
        dA = radial_d1(A, disc)
        dB = radial_d1(B, disc)
        direct = (d2u + du * ((disc.n - 1) * (1.0 / r + dB / (2.0 * B))
                              - dA / (2.0 * A))) / A
        out = np.where(interior, flux, direct)
        return ScalarField(disc, out, support=np.abs(out) > 0,
                           meta={"interior": interior})

    flux = _flux_apply_cartesian(g, vals)
    interior = ~_edge_mask(disc.shape)
    # margin fallback: g^{ij} d_i d_j u + (1/sqrt g) d_i(sqrt g g^{ij}) d_j u
    h = disc.h
    ginv = g.inverse()
    sqrtg = g.sqrt_det()
    du = np.stack([diff1(vals, a, h) for a in range(3)], axis=-1)
    direct = np.zeros(disc.shape)
    for i in range(3):
        for j in range(3):
            dd = diff2(vals, i, h) if i == j else diff1(du[..., j], i, h)
            direct += ginv[..., i, j] * dd
    for j in range(3):
        coef = np.zeros(disc.shape)
        for i in range(3):
            coef += diff1(sqrtg * ginv[..., i, j], i, h)
        direct += coef / sqrtg * du[..., j]
    out = np.where(interior, flux, direct)
    return ScalarField(disc, out, support=np.abs(out) > 0,
                       meta={"interior": interior})


def _edge_mask(shape):
    from .fields import boundary_margin_mask
    return boundary_margin_mask(shape, 1)


# ---------------------------------------------------------------------------
# the operator
# ---------------------------------------------------------------------------

@dataclass
class EllipticOperator:
    """Stencil form of Lap_g + f on a region with identity boundary rows."""

    g: MetricField
    f: ScalarField
    region: Region
    interior: np.ndarray
    boundary: np.ndarray
    measure: np.ndarray

    def apply(self, values: np.ndarray) -> np.ndarray:
        """(Lap_g + f) u at interior nodes; u itself on boundary rows."""
        vals = np.asarray(values, dtype=float)
        if self.g.disc.kind == "radial":
            lap = _flux_apply_radial(self.g, vals, self._halves)
        else:
            lap = _flux_apply_cartesian(self.g, vals, self._coeffs)
        out = lap + self.f.values * vals
        return np.where(self.interior, out, vals)

    def system_diagonal(self) -> np.ndarray:
        """Diagonal of the weighted system -W (Lap_g + f) on interior nodes."""
        disc = self.g.disc
        h = disc.h
        if disc.kind == "radial":
            c_minus, c_plus = self._halves
            cm = np.where(np.isnan(c_minus), 0.0, c_minus)
            cp = np.where(np.isnan(c_plus), 0.0, c_plus)
            base = unit_sphere_area(disc.n) * disc.h * (cm + cp) / (h * h)
        else:
            base = np.zeros(disc.shape)
            _, w, _ = self._coeffs
            for i in range(3):
                wi = np.moveaxis(w[i], i, 0)
                tot = np.moveaxis(base, i, 0)
                tot[1:-1] += 0.5 * (wi[1:-1] + wi[2:]) + 0.5 * (wi[1:-1] + wi[:-2])
            base = base * (disc.cell_measure() / (h * h))
        return (base - self.f.values * self.measure)[self.interior]

    def system_apply(self, x_int: np.ndarray) -> np.ndarray:
        """-W (Lap_g + f) applied to an interior vector (zero-extended)."""
        full = np.zeros(self.g.disc.shape)
        full[self.interior] = x_int
        if self.g.disc.kind == "radial":
            lap = _flux_apply_radial(self.g, full, self._halves)
        else:
            lap = _flux_apply_cartesian(self.g, full, self._coeffs)
        out = -(lap + self.f.values * full) * self.measure
        return out[self.interior]


def assemble_operator(g: MetricField, f: ScalarField,
                      region: Region | None = None) -> EllipticOperator:
    """Build Lap_g + f on ``region`` with Dirichlet (identity) boundary rows.

    ``f`` must be non-negative: it is the a_n-scaled negative part of a
    scalar curvature by construction.
    """
    if region is None:
        region = Region.whole(g.disc)
    if (f.values < 0).any():
        idx = np.unravel_index(int(np.argmax(f.values < 0)), f.values.shape)
        raise ValueError(f"zeroth-order coefficient is negative at node {idx}; "
                         "pass a negative part")
    g.check_definite()
    disc = g.disc
    if disc.kind == "radial":
        interior = region.mask.copy()
        interior[-1] = False
        if not _origin_centered(disc):
            interior[0] = False
        shifted = np.zeros_like(interior)
        shifted[:-1] |= ~region.mask[1:]
        shifted[1:] |= ~region.mask[:-1]
        interior &= ~shifted
        coeffs = None
        halves = _radial_flux_coeff_halves(g)
    else:
        coeffs = _cartesian_flux_coeffs(g)
        erosions = 1 if coeffs[2] is None else 2
        interior = binary_erosion(region.mask, structure=np.ones((3, 3, 3), bool),
                                  iterations=erosions)
    boundary = region.mask & ~interior
    op = EllipticOperator(g, f, region, interior, boundary, g.node_measure())
    op._halves = halves if disc.kind == "radial" else None
    op._coeffs = coeffs if disc.kind == "cartesian" else None
    return op


# ---------------------------------------------------------------------------
# conjugate gradients
# ---------------------------------------------------------------------------

def _pcg(apply_A, b, diag, rtol, maxiter):
    bnorm = float(np.linalg.norm(b))
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return x, 0, 0.0
    if (diag <= 0).any():
        diag = np.ones_like(diag)  # indefiniteness suspected; run unpreconditioned
    r = b.copy()
    z = r / diag
    p = z.copy()
    rz = float(r @ z)
    for k in range(1, maxiter + 1):
        Ap = apply_A(p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise BreakdownError(
                "conjugate gradients met a non-positive curvature direction: "
                "the operator -Lap - f is not coercive, i.e. the smallness "
                "condition c1*||f||_{n/2} < 1 fails at this resolution",
                iterations=k, residual=float(np.linalg.norm(r)) / bnorm)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        res = float(np.linalg.norm(r)) / bnorm
        if res <= rtol:
            return x, k, res
        z = r / diag
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise BreakdownError(
        f"conjugate gradients stagnated after {maxiter} iterations "
        f"(relative residual {res:.3e}); the zeroth-order term may violate "
        "the smallness condition", iterations=maxiter, residual=res)


# ---------------------------------------------------------------------------
# solves
# ---------------------------------------------------------------------------

@dataclass
class SolveReport:
    """Outcome of a Dirichlet solve, with both decay-coefficient estimates."""

    v: ScalarField
    iterations: int
    residual: float
    alpha: float | None = None
    A_fit: float | None = None
    A_int: float | None = None
    u_min: float = 1.0
    gate_warning: str | None = None


def solve_dirichlet(g: MetricField, f: ScalarField,
                    region: Region | None = None,
                    tol: float = 1e-8, max_iter: int = 5000,
                    alpha: float | None = None,
                    estimate_gate: bool = True,
                    fit_annulus: tuple | str | None = "auto") -> SolveReport:
    """Solve Lap_g v + f v + f = 0, v = 0 on the region boundary.

    The smallness quantity alpha = (1/a_n) c1 ||s_-||_{n/2}
    (= c1 ||f||_{n/2}) gates solvability; if only the (lower) Sobolev
    estimate violates it we warn and proceed, and let the iteration's
    coercivity check have the final word.
    """
    if region is None:
        region = Region.whole(g.disc)
    op = assemble_operator(g, f, region)

    gate_warning = None
    if alpha is None and estimate_gate:
        from .bounds import sobolev_constant
        from .geometry import lp_norm
        c1 = sobolev_constant(g, region, budget="small")
        alpha = c1 * lp_norm(f, g.disc.n / 2.0, g, region)
    if alpha is not None and alpha >= 1.0:
        gate_warning = (f"smallness estimate alpha = {alpha:.3f} >= 1; "
                        "proceeding, but the solve may break down")
        warnings.warn(gate_warning)

    b = (f.values * op.measure)[op.interior]
    x, iters, res = _pcg(op.system_apply, b, op.system_diagonal(), tol, max_iter)

    v_full = np.zeros(g.disc.shape)
    v_full[op.interior] = x
    v = ScalarField(g.disc, v_full, support=np.abs(v_full) > 0)
    u_min = float(1.0 + v_full.min())
    if u_min <= 0.0:
        raise PositivityError(
            f"conformal factor u = 1 + v reaches {u_min:.3e} <= 0")

    report = SolveReport(v, iters, res, alpha=alpha, u_min=u_min,
                         gate_warning=gate_warning)
    _attach_decay_estimates(report, g, f, region, fit_annulus)
    return report


def solve_with_rhs(g: MetricField, f: ScalarField, rhs: np.ndarray,
                   region: Region | None = None,
                   tol: float = 1e-10, max_iter: int = 20000) -> SolveReport:
    """Solve Lap_g v + f v = rhs with zero Dirichlet data (for manufactured
    solutions and other verification runs)."""
    if region is None:
        region = Region.whole(g.disc)
    op = assemble_operator(g, f, region)
    b = (-np.asarray(rhs, dtype=float) * op.measure)[op.interior]
    x, iters, res = _pcg(op.system_apply, b, op.system_diagonal(), tol, max_iter)
    v_full = np.zeros(g.disc.shape)
    v_full[op.interior] = x
    v = ScalarField(g.disc, v_full, support=np.abs(v_full) > 0)
    return SolveReport(v, iters, res, u_min=float(1.0 + v_full.min()))


def _attach_decay_estimates(report, g, f, region, fit_annulus):
    disc = g.disc
    if fit_annulus is None:
        return
    r_max_usable = disc.extent - 2.0 * disc.h
    if fit_annulus == "auto":
        supp = Region(disc, f.support, "supp f")
        r_f = 0.0
        if not supp.is_empty:
            r_f = float(disc.radius()[supp.mask].max())
        r_lo = max(1.25 * r_f, 1.25 * g.r_K, 0.5 * r_max_usable)
        r_hi = 0.95 * r_max_usable
        if r_hi < 1.5 * r_lo:
            return  # domain too cramped for an exterior read-off
        fit_annulus = (r_lo, r_hi)
    try:
        report.A_fit = extract_decay_coefficient(report.v, g, *fit_annulus)
    except GridError:
        return
    u = ScalarField(disc, 1.0 + report.v.values)
    report.A_int = decay_coefficient_integral(g, u, f)


# ---------------------------------------------------------------------------
# decay coefficients
# ---------------------------------------------------------------------------

def extract_decay_coefficient(v: ScalarField, g: MetricField,
                              r_inner: float, r_outer: float) -> float:
    """Leading coefficient A of v ~ A r^(2-n) on the annulus [r_inner, r_outer].

    Least squares against the basis (r^(2-n), r^(1-n), 1) at exact node
    radii; the constant column soaks up the offset a finite Dirichlet
    radius adds to the truncated solution.
    """
    if r_outer < 1.5 * r_inner:
        raise GridError(f"fit annulus [{r_inner:g}, {r_outer:g}] is too thin "
                        "(need r_outer >= 1.5 r_inner)")
    n = g.disc.n
    r = g.disc.radius()
    sel = (r >= r_inner) & (r <= r_outer)
    if sel.sum() < 8:
        raise GridError("fit annulus contains too few nodes")
    rr = r[sel]
    design = np.stack([rr ** (2.0 - n), rr ** (1.0 - n), np.ones_like(rr)], axis=1)
    coef, *_ = np.linalg.lstsq(design, v.values[sel], rcond=None)
    return float(coef[0])


def decay_coefficient_integral(g: MetricField, u: ScalarField,
                               f: ScalarField) -> float:
    """A = -(1/((n-2) omega_{n-1})) int_M [ |grad u|_g^2 - f u^2 ] dmu_g.

    Requires u = 1 + v from a converged solve of Lap u + f u = 0 and a
    compactly supported f; the flux identity behind the formula holds
    exactly for the truncated problem as well.
    """
    supp = Region(f.disc, f.support, "supp f")
    if supp.touches_outer_boundary():
        raise SupportError("f must be compactly supported away from the boundary")
    n = g.disc.n
    gs = gradient_squared(u.values, g)
    integrand = gs - f.values * u.values ** 2
    total = float((integrand * g.node_measure()).sum())
    return -total / ((n - 2.0) * unit_sphere_area(n))


def energy_identity_gap(g: MetricField, v: ScalarField, f: ScalarField,
                        region: Region | None = None) -> float:
    """Relative gap in  int |grad v|^2 = int f (v^2 + v)  for a solve."""
    if region is None:
        region = Region.whole(g.disc)
    w = g.node_measure()
    lhs = float((gradient_squared(v.values, g) * w)[region.mask].sum())
    rhs = float((f.values * (v.values ** 2 + v.values) * w)[region.mask].sum())
    scale = max(abs(lhs), abs(rhs), 1e-300)
    return abs(lhs - rhs) / scale
