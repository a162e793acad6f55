"""Conformal rescaling and the scalar-curvature transformation.

For ghat = u^(4/(n-2)) g the curvatures are related by

    (1/a_n) s_ghat u^((n+2)/(n-2)) = -Lap_g u + (1/a_n) s_g u,
    a_n = 4 (n-1)/(n-2),

so s_ghat = a_n u^(-(n+2)/(n-2)) ( -Lap_g u + (1/a_n) s_g u ).  A positive
factor solving Lap_g u + (1/a_n) (s_g)_- u = 0 therefore turns the
negative part of the curvature off without touching where s_g >= 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import PositivityError
from .fields import MetricField, ScalarField, require_same_disc
from .geometry import scalar_curvature


@dataclass(frozen=True)
class StructuralConstants:
    """Dimension- and exponent-derived constants of the estimates.

    chi, sigma, tau drive the iteration bounds and exist only for
    p > n/2; at or below the critical exponent they are None and
    ``critical`` is set.
    """

    n: int
    p: float | None
    a_n: float
    n_star: float
    two_p_star: float | None = None
    chi: float | None = None
    sigma: float | None = None
    tau: float | None = None
    critical: bool = False


def structural_constants(n: int, p: float | None = None) -> StructuralConstants:
    if n < 3:
        raise ValueError("need n >= 3")
    a_n = 4.0 * (n - 1) / (n - 2)
    n_star = 2.0 * n / (n - 2)
    if p is None:
        return StructuralConstants(n, None, a_n, n_star)
    if p <= 1:
        raise ValueError("need p > 1")
    two_p_star = 4.0 * p / (2.0 * p - 2.0)
    if p <= n / 2.0:
        return StructuralConstants(n, p, a_n, n_star, two_p_star, critical=True)
    chi = n_star / two_p_star
    sigma = 1.0 / (chi - 1.0)
    tau = chi / (chi - 1.0) ** 2
    return StructuralConstants(n, p, a_n, n_star, two_p_star, chi, sigma, tau)


def _check_positive(u: ScalarField):
    bad = u.values <= 0.0
    if bad.any():
        idx = np.unravel_index(int(np.argmax(bad)), bad.shape)
        raise PositivityError(
            f"conformal factor is not positive at node {idx}: u = {u.values[idx]:.3e}",
            node=idx,
        )


def conformal_rescale(g: MetricField, u: ScalarField) -> MetricField:
    """ghat = u^(4/(n-2)) g, with the closed-form exterior rescaled when
    ``u`` carries a radial closed form."""
    require_same_disc(g, u)
    _check_positive(u)
    n = g.disc.n
    expo = 4.0 / (n - 2)
    factor = u.values ** expo
    if g.disc.kind == "cartesian":
        comps = g.comps * factor[..., None, None]
    else:
        comps = g.comps * factor[:, None]
    exterior = None
    if g.exterior is not None and u.radial_form is not None:
        uc, duc = u.radial_form
        exterior = g.exterior.rescaled(uc, duc, expo)
    return MetricField(g.disc, comps, exterior=exterior, r_K=g.r_K, q=g.q,
                       lambda_min=g.lambda_min)


def conformal_scalar(g: MetricField, u: ScalarField,
                     s_g: ScalarField | None = None) -> ScalarField:
    """Scalar curvature of u^(4/(n-2)) g via the transformation formula.

    Uses the discrete Laplace-Beltrami operator; pass ``s_g`` to reuse an
    already computed curvature of the base metric.
    """
    from .elliptic import laplace_beltrami

    require_same_disc(g, u)
    _check_positive(u)
    n = g.disc.n
    a_n = 4.0 * (n - 1) / (n - 2)
    if s_g is None:
        s_g = scalar_curvature(g)
    lap_u = laplace_beltrami(g, u.values)
    vals = a_n * u.values ** (-(n + 2.0) / (n - 2.0)) * (
        -lap_u.values + s_g.values * u.values / a_n
    )
    interior = lap_u.meta.get("interior", np.ones(g.disc.shape, bool)) \
        & s_g.meta.get("interior", np.ones(g.disc.shape, bool))
    meta = {"interior": interior}
    return ScalarField(g.disc, vals, support=np.abs(vals) > 0, meta=meta)
