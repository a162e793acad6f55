"""Discrete tensor calculus: curvature, norms, measures, pairings.

Scalar curvature is evaluated from the full coordinate formula: the
inverse metric, Christoffel symbols built from first differences of the
components, and a further difference of the Christoffel field.  On radial
meshes the spherically symmetric reduction is used instead: with areal
radius rho = sqrt(B) r the metric A(r) dr^2 + B(r) r^2 dsigma^2 has

    s = (n-1)/rho^2 * [ (n-2)(1 - rho'^2/A) - 2 rho rho''/A
                        + rho rho' A'/A^2 ].

The formula reproduces s = 0 for flat space and for the vacuum
Schwarzschild family, and n(n-1)/a^2 for the round sphere of radius a.

Norms follow two conventions, mirroring how they are consumed downstream:
``lp_norm`` integrates against the Riemannian measure of the supplied
metric, while ``sobolev_distance`` measures tensors against the Euclidean
background (flat measure, plain partial derivatives).
"""

from __future__ import annotations

import numpy as np

from .errors import GridError
from .fields import (
    MetricField,
    Region,
    ScalarField,
    boundary_margin_mask,
    diff1,
    diff2,
    require_same_disc,
)


# ---------------------------------------------------------------------------
# scalar curvature
# ---------------------------------------------------------------------------

def scalar_curvature(g: MetricField, order: int = 2) -> ScalarField:
    """Scalar curvature field of ``g`` by finite differences.

    One-sided stencils are used near the outer boundary; the affected
    margin (two nodes, since Christoffel symbols are differenced again)
    is flagged in ``meta['onesided_margin']`` and excluded from
    ``meta['interior']``.
    """
    g.check_definite()
    if g.disc.kind == "radial":
        return _scalar_curvature_radial(g, order)
    return _scalar_curvature_cartesian(g, order)


def _scalar_curvature_cartesian(g: MetricField, order: int) -> ScalarField:
    h = g.disc.h
    comps = g.comps
    ginv = g.inverse()

    # dg[..., a, i, j] = d_a g_ij
    dg = np.empty(comps.shape[:-2] + (3, 3, 3))
    for a in range(3):
        dg[..., a, :, :] = diff1(comps, axis=a, h=h, order=order)

    # Gamma^k_ij = 1/2 g^{kl} S_lij with S_lij = d_i g_jl + d_j g_il - d_l g_ij
    S = (np.einsum("...ijl->...lij", dg)    # d_i g_jl
         + np.einsum("...jil->...lij", dg)  # d_j g_il
         - dg)                              # d_l g_ij, leading index l
    Gam = 0.5 * np.einsum("...kl,...lij->...kij", ginv, S, optimize=True)
    del S, dg

    # gam_i = Gamma^k_{ki}
    gam = np.einsum("...kki->...i", Gam)

    # T1_ij = d_k Gamma^k_ij ; T2_ij = d_j gam_i
    T1 = np.zeros(comps.shape)
    for k in range(3):
        T1 += diff1(Gam[..., k, :, :], axis=k, h=h, order=order)
    T2 = np.empty(comps.shape)
    for j in range(3):
        T2[..., :, j] = diff1(gam, axis=j, h=h, order=order)

    Q1 = np.einsum("...l,...lij->...ij", gam, Gam, optimize=True)
    Q2 = np.einsum("...kjl,...lki->...ij", Gam, Gam, optimize=True)
    ric = T1 - T2 + Q1 - Q2
    s = np.einsum("...ij,...ij->...", ginv, ric, optimize=True)

    margin = 2 if order == 2 else 3
    meta = {
        "onesided_margin": margin,
        "interior": ~boundary_margin_mask(g.disc.shape, margin),
    }
    return ScalarField(g.disc, s, support=np.abs(s) > 0, meta=meta)


def _scalar_curvature_radial(g: MetricField, order: int) -> ScalarField:
    # With rho = sqrt(B) r, the warped-product curvature
    #   s = (n-1)/rho^2 [ (n-2)(1 - rho'^2/A) - 2 rho rho''/A + rho rho' A'/A^2 ]
    # regroups into origin-regular terms (the 1/r^2 piece cancels exactly):
    #   s/(n-1) = (n-2)/(AB) [ (A-B)/r^2 - B'/r - B'^2/(4B) ]
    #             - (2/A) [ B'/(rB) + B''/(2B) - B'^2/(4B^2) ]
    #             + (A'/A^2) [ 1/r + B'/(2B) ]
    # so finite-difference noise is never amplified by 1/r^2.
    from .fields import _origin_centered, radial_d1, radial_d2

    n = g.disc.n
    r = g.disc.axis_coords()
    A, B = g.radial_AB()
    dA = radial_d1(A, g.disc, order)
    dB = radial_d1(B, g.disc, order)
    d2B = radial_d2(B, g.disc, order)
    s = (n - 1) * (
        (n - 2) / (A * B) * ((A - B) / r**2 - dB / r - dB**2 / (4.0 * B))
        - (2.0 / A) * (dB / (r * B) + d2B / (2.0 * B) - dB**2 / (4.0 * B**2))
        + (dA / A**2) * (1.0 / r + dB / (2.0 * B))
    )
    margin = 1 if order == 2 else 2
    interior = np.ones(g.disc.shape, dtype=bool)
    if not _origin_centered(g.disc):
        interior[:margin] = False
    interior[-margin:] = False
    meta = {"onesided_margin": margin, "interior": interior}
    return ScalarField(g.disc, s, support=np.abs(s) > 0, meta=meta)


# ---------------------------------------------------------------------------
# norms and measures
# ---------------------------------------------------------------------------

def lp_norm(u: ScalarField, p: float, g: MetricField,
            region: Region | None = None) -> float:
    """L^p norm of ``u`` over ``region`` w.r.t. the Riemannian measure of g."""
    require_same_disc(u, g)
    if region is None:
        region = Region.whole(u.disc)
    if region.is_empty:
        raise GridError("cannot take a norm over an empty region")
    vals = u.values[region.mask]
    if np.isinf(p):
        return float(np.abs(vals).max())
    if p < 1:
        raise ValueError("p must be >= 1")
    w = g.node_measure()[region.mask]
    return float((np.abs(vals) ** p * w).sum() ** (1.0 / p))


def riemannian_volume(region: Region, g: MetricField) -> float:
    """mu_g(region) = sum of sqrt(det g) cell weights over the region."""
    if region.is_empty:
        raise GridError("cannot measure an empty region")
    require_same_disc(region, g, "region and metric")
    return float(g.node_measure()[region.mask].sum())


def negative_part(u: ScalarField) -> ScalarField:
    """Pointwise max(-u, 0); support marker is the set {u < 0}."""
    vals = np.maximum(-u.values, 0.0)
    return ScalarField(u.disc, vals, support=u.values < 0.0)


def distributional_pairing(s: ScalarField, phi: ScalarField, g: MetricField) -> float:
    """<s, phi> = integral of s * phi against the measure of g.

    ``phi`` must be compactly supported strictly inside the domain.
    """
    require_same_disc(s, phi)
    require_same_disc(s, g)
    supp = Region(phi.disc, phi.support, "supp phi")
    if supp.touches_outer_boundary():
        raise GridError("test function support touches the domain boundary; "
                        "it is not compactly supported")
    w = g.node_measure()
    return float((s.values * phi.values * w).sum())


# ---------------------------------------------------------------------------
# gradients against the metric
# ---------------------------------------------------------------------------

def gradient_squared(values: np.ndarray, g: MetricField, order: int = 2) -> np.ndarray:
    """|grad u|_g^2 = g^{ij} d_i u d_j u per node."""
    from .fields import radial_d1

    h = g.disc.h
    if g.disc.kind == "radial":
        A, _ = g.radial_AB()
        du = radial_d1(values, g.disc, order)
        return du * du / A
    du = np.stack([diff1(values, a, h, order) for a in range(3)], axis=-1)
    ginv = g.inverse()
    return np.einsum("...ij,...i,...j->...", ginv, du, du, optimize=True)


def dirichlet_energy(values: np.ndarray, g: MetricField,
                     region: Region | None = None, order: int = 2) -> float:
    """integral of |grad u|_g^2 dmu_g over the region."""
    gs = gradient_squared(values, g, order)
    w = g.node_measure()
    if region is None:
        return float((gs * w).sum())
    return float((gs * w)[region.mask].sum())


# ---------------------------------------------------------------------------
# Sobolev distance against the Euclidean background
# ---------------------------------------------------------------------------

def sobolev_distance(g1: MetricField, g2: MetricField,
                     region: Region | None = None, p: float | None = None,
                     order: int = 2) -> float:
    """Discrete W^{2,p} norm of g1 - g2 (default p = n/2).

    The background is the Euclidean coordinate metric, so covariant
    derivatives are plain partial differences and the measure is flat.
    On radial meshes the difference is measured through its orthonormal
    frame components (dA, dB with multiplicity n-1), each treated as a
    radial scalar; the Hessian magnitude of a radial scalar f is
    f''^2 + (n-1)(f'/r)^2, which reproduces the Cartesian computation
    exactly for isotropic (A = B) fields.
    """
    require_same_disc(g1, g2, "metrics")
    disc = g1.disc
    n = disc.n
    if p is None:
        p = n / 2.0
    if region is None:
        region = Region.whole(disc)
    if region.is_empty:
        raise GridError("cannot take a norm over an empty region")

    if disc.kind == "cartesian":
        diff = g1.comps - g2.comps
        sq0 = np.einsum("...ij,...ij->...", diff, diff)
        d1 = [diff1(diff, a, disc.h, order) for a in range(3)]
        sq1 = sum(np.einsum("...ij,...ij->...", d, d) for d in d1)
        sq2 = np.zeros(disc.shape)
        for a in range(3):
            for b in range(3):
                if a == b:
                    dd = diff2(diff, a, disc.h, order)
                else:
                    dd = diff1(d1[a], b, disc.h, order)
                sq2 += np.einsum("...ij,...ij->...", dd, dd)
        dens = sq0 ** (p / 2) + sq1 ** (p / 2) + sq2 ** (p / 2)
        cell = disc.cell_measure()
        return float((dens[region.mask] * cell).sum() ** (1.0 / p))

    # radial: frame components, flat measure of R^n restricted to radii
    from .fields import unit_sphere_area
    r = disc.axis_coords()
    dA = g1.comps[:, 0] - g2.comps[:, 0]
    dB = g1.comps[:, 1] - g2.comps[:, 1]
    sq0 = dA**2 + (n - 1) * dB**2
    sq1 = np.zeros_like(sq0)
    sq2 = np.zeros_like(sq0)
    for comp, m in ((dA, 1.0), (dB, float(n - 1))):
        c1 = diff1(comp, 0, disc.h, order)
        c2 = diff2(comp, 0, disc.h, order)
        sq1 += m * c1**2
        sq2 += m * (c2**2 + (n - 1) * (c1 / r) ** 2)
    dens = sq0 ** (p / 2) + sq1 ** (p / 2) + sq2 ** (p / 2)
    w = unit_sphere_area(n) * r ** (n - 1) * disc.h
    return float((dens * w)[region.mask].sum() ** (1.0 / p))


def sup_distance(g1: MetricField, g2: MetricField) -> float:
    """Max over nodes of the Euclidean-frame magnitude of g1 - g2."""
    require_same_disc(g1, g2, "metrics")
    if g1.disc.kind == "cartesian":
        diff = g1.comps - g2.comps
        return float(np.sqrt(np.einsum("...ij,...ij->...", diff, diff)).max())
    n = g1.disc.n
    dA = g1.comps[:, 0] - g2.comps[:, 0]
    dB = g1.comps[:, 1] - g2.comps[:, 1]
    return float(np.sqrt(dA**2 + (n - 1) * dB**2).max())
