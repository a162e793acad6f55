"""Discretizations and the tensor/scalar fields living on them.

Two grid kinds are supported:

* ``cartesian`` -- a uniform grid on the cube [-L, L]^3 (n = 3 only).
  Metric components are full symmetric 3x3 matrices per node.
* ``radial`` -- a uniform 1-D mesh r in [r0, R] carrying spherically
  symmetric metrics A(r) dr^2 + B(r) r^2 dsigma^2 in dimension n.
  The 1-D reduction makes 3 <= n <= 7 affordable; n = 2 is admitted
  solely for the flat-disc demo scenario.

All finite differences are centered second order by default with a
fourth-order option; stencils fall back to one-sided forms at the outer
nodes and the affected margin is flagged in field metadata.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DefinitenessError, GridError

MIN_NODES_PER_AXIS = 16
DEFAULT_LAMBDA_MIN = 1e-8


def unit_sphere_area(n: int) -> float:
    """Area of the unit (n-1)-sphere, 2 pi^(n/2) / Gamma(n/2)."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


# ---------------------------------------------------------------------------
# discretizations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Discretization:
    """Uniform grid, either a Cartesian cube or a radial mesh."""

    kind: str              # "cartesian" | "radial"
    n: int                 # ambient dimension
    extent: float          # half-width L (cartesian) or outer radius R (radial)
    h: float               # grid spacing
    npts: int              # nodes per axis
    r0: float = 0.0        # innermost radius (radial only)

    @staticmethod
    def cartesian(extent: float, spacing: float, n: int = 3) -> "Discretization":
        if n != 3:
            raise GridError(f"cartesian grids support n = 3 only, got n = {n}")
        if spacing <= 0:
            raise GridError("spacing must be positive")
        npts = int(round(2.0 * extent / spacing)) + 1
        if npts < MIN_NODES_PER_AXIS:
            raise GridError(f"need >= {MIN_NODES_PER_AXIS} nodes per axis, got {npts}")
        h = 2.0 * extent / (npts - 1)
        return Discretization("cartesian", n, float(extent), h, npts)

    @staticmethod
    def radial(extent: float, spacing: float, n: int = 3, r0: float | None = None) -> "Discretization":
        if not 2 <= n <= 7:
            raise GridError(f"radial meshes support 2 <= n <= 7, got n = {n}")
        if spacing <= 0:
            raise GridError("spacing must be positive")
        if r0 is None:
            # origin-centered midpoint mesh: nodes (k + 1/2) h tile [0, extent]
            r0 = spacing / 2.0
            npts = int(round(extent / spacing))
        else:
            npts = int(np.floor((extent - r0) / spacing + 1e-9)) + 1
        if r0 < spacing / 2.0 - 1e-12 * spacing:
            raise GridError("innermost radius must satisfy r0 >= h/2")
        if npts < MIN_NODES_PER_AXIS:
            raise GridError(f"need >= {MIN_NODES_PER_AXIS} nodes, got {npts}")
        return Discretization("radial", n, float(extent), float(spacing), npts, float(r0))

    # -- geometry of the node set ------------------------------------------

    @property
    def shape(self) -> tuple:
        if self.kind == "cartesian":
            return (self.npts,) * 3
        return (self.npts,)

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.shape))

    def axis_coords(self) -> np.ndarray:
        """1-D coordinates: a Cartesian axis, or the radii themselves."""
        if self.kind == "cartesian":
            return np.linspace(-self.extent, self.extent, self.npts)
        return self.r0 + self.h * np.arange(self.npts)

    def coords(self) -> tuple[np.ndarray, ...]:
        """Per-axis coordinate arrays broadcastable to ``shape``."""
        ax = self.axis_coords()
        if self.kind == "radial":
            return (ax,)
        return (ax[:, None, None], ax[None, :, None], ax[None, None, :])

    def radius(self, center=None) -> np.ndarray:
        """Euclidean distance of every node from ``center`` (default origin)."""
        if self.kind == "radial":
            r = self.axis_coords()
            return r if center is None else np.abs(r - center)
        x, y, z = self.coords()
        if center is None:
            cx = cy = cz = 0.0
        else:
            cx, cy, cz = center
        return np.sqrt((x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2)

    def cell_measure(self) -> float:
        """Coordinate volume per node: h^n (cartesian) or h (radial line)."""
        if self.kind == "cartesian":
            return self.h ** 3
        return self.h

    def same_as(self, other: "Discretization") -> bool:
        return (
            self.kind == other.kind
            and self.n == other.n
            and self.shape == other.shape
            and abs(self.h - other.h) < 1e-14 * self.h
            and abs(self.r0 - other.r0) < 1e-12
        )


def require_same_disc(a, b, what="fields"):
    if not a.disc.same_as(b.disc):
        raise GridError(f"{what} live on different discretizations")


# ---------------------------------------------------------------------------
# finite differences on node arrays
# ---------------------------------------------------------------------------

def diff1(arr: np.ndarray, axis: int, h: float, order: int = 2) -> np.ndarray:
    """First derivative along ``axis``; one-sided at the ends."""
    if order not in (2, 4):
        raise ValueError("stencil order must be 2 or 4")
    out = np.empty_like(arr, dtype=float)
    a = np.moveaxis(arr, axis, 0)
    o = np.moveaxis(out, axis, 0)
    o[1:-1] = (a[2:] - a[:-2]) / (2.0 * h)
    if order == 4 and a.shape[0] >= 5:
        o[2:-2] = (-a[4:] + 8.0 * a[3:-1] - 8.0 * a[1:-3] + a[:-4]) / (12.0 * h)
    o[0] = (-3.0 * a[0] + 4.0 * a[1] - a[2]) / (2.0 * h)
    o[-1] = (3.0 * a[-1] - 4.0 * a[-2] + a[-3]) / (2.0 * h)
    return out


def diff2(arr: np.ndarray, axis: int, h: float, order: int = 2) -> np.ndarray:
    """Second derivative along ``axis``; one-sided at the ends."""
    if order not in (2, 4):
        raise ValueError("stencil order must be 2 or 4")
    out = np.empty_like(arr, dtype=float)
    a = np.moveaxis(arr, axis, 0)
    o = np.moveaxis(out, axis, 0)
    o[1:-1] = (a[2:] - 2.0 * a[1:-1] + a[:-2]) / (h * h)
    if order == 4 and a.shape[0] >= 5:
        o[2:-2] = (
            -a[4:] + 16.0 * a[3:-1] - 30.0 * a[2:-2] + 16.0 * a[1:-3] - a[:-4]
        ) / (12.0 * h * h)
    o[0] = (2.0 * a[0] - 5.0 * a[1] + 4.0 * a[2] - a[3]) / (h * h)
    o[-1] = (2.0 * a[-1] - 5.0 * a[-2] + 4.0 * a[-3] - a[-4]) / (h * h)
    return out


def _origin_centered(disc) -> bool:
    return disc.kind == "radial" and abs(disc.r0 - disc.h / 2.0) < 1e-12 * disc.h


def radial_d1(arr: np.ndarray, disc, order: int = 2, parity: str = "even") -> np.ndarray:
    """Radial first derivative with parity ghosts across r = 0.

    On origin-centered meshes (r0 = h/2) the innermost stencil reflects
    through the origin using the field's parity, so smooth even/odd
    profiles keep second-order accuracy down to the first node.  Meshes
    starting further out fall back to one-sided stencils at the inner end.
    """
    out = diff1(arr, 0, disc.h, order)
    if _origin_centered(disc):
        sgn = 1.0 if parity == "even" else -1.0
        ghost = sgn * arr[0]  # value at -h/2 mirrors node 0
        out[0] = (arr[1] - ghost) / (2.0 * disc.h)
    return out


def radial_d2(arr: np.ndarray, disc, order: int = 2, parity: str = "even") -> np.ndarray:
    """Radial second derivative with parity ghosts across r = 0."""
    out = diff2(arr, 0, disc.h, order)
    if _origin_centered(disc):
        sgn = 1.0 if parity == "even" else -1.0
        ghost = sgn * arr[0]
        out[0] = (arr[1] - 2.0 * arr[0] + ghost) / (disc.h * disc.h)
    return out


def boundary_margin_mask(shape: tuple, margin: int) -> np.ndarray:
    """True on nodes within ``margin`` nodes of any array edge."""
    mask = np.zeros(shape, dtype=bool)
    for ax in range(len(shape)):
        sl = [slice(None)] * len(shape)
        sl[ax] = slice(0, margin)
        mask[tuple(sl)] = True
        sl[ax] = slice(-margin, None)
        mask[tuple(sl)] = True
    return mask


# ---------------------------------------------------------------------------
# regions
# ---------------------------------------------------------------------------

@dataclass
class Region:
    """A node subset of a discretization, held as a boolean mask."""

    disc: Discretization
    mask: np.ndarray
    label: str = "region"

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.disc.shape:
            raise GridError("region mask shape does not match discretization")

    @staticmethod
    def whole(disc: Discretization, label: str = "domain") -> "Region":
        return Region(disc, np.ones(disc.shape, dtype=bool), label)

    @staticmethod
    def ball(disc: Discretization, radius: float, center=None, label=None) -> "Region":
        r = disc.radius(center)
        return Region(disc, r <= radius, label or f"ball(r<={radius:g})")

    @staticmethod
    def annulus(disc: Discretization, r_inner: float, r_outer: float, center=None) -> "Region":
        r = disc.radius(center)
        return Region(disc, (r >= r_inner) & (r <= r_outer),
                      f"annulus[{r_inner:g},{r_outer:g}]")

    @staticmethod
    def support_of(u: "ScalarField") -> "Region":
        return Region(u.disc, u.support.copy(), "supp")

    @property
    def count(self) -> int:
        return int(self.mask.sum())

    @property
    def is_empty(self) -> bool:
        return not bool(self.mask.any())

    def coordinate_measure(self) -> float:
        """Node count times the coordinate cell volume."""
        return self.count * self.disc.cell_measure()

    def intersect(self, other: "Region") -> "Region":
        require_same_disc(self, other, "regions")
        return Region(self.disc, self.mask & other.mask,
                      f"{self.label}&{other.label}")

    def touches_outer_boundary(self) -> bool:
        if self.is_empty:
            return False
        if self.disc.kind == "radial":
            return bool(self.mask[-1])
        edge = boundary_margin_mask(self.disc.shape, 1)
        return bool((self.mask & edge).any())


# ---------------------------------------------------------------------------
# scalar fields
# ---------------------------------------------------------------------------

@dataclass
class ScalarField:
    """Scalar samples on a discretization with an explicit support marker."""

    disc: Discretization
    values: np.ndarray
    support: np.ndarray = None
    meta: dict = field(default_factory=dict)
    radial_form: object = None   # optional callable r -> value for closed forms

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.disc.shape:
            raise GridError("scalar values shape does not match discretization")
        if self.support is None:
            self.support = self.values != 0.0
        self.support = np.asarray(self.support, dtype=bool)
        if self.support.shape != self.disc.shape:
            raise GridError("support mask shape does not match discretization")

    @staticmethod
    def constant(disc: Discretization, value: float) -> "ScalarField":
        vals = np.full(disc.shape, float(value))
        return ScalarField(disc, vals, np.full(disc.shape, value != 0.0))

    @staticmethod
    def from_values(disc: Discretization, values: np.ndarray) -> "ScalarField":
        return ScalarField(disc, np.asarray(values, dtype=float))

    def copy(self) -> "ScalarField":
        return ScalarField(self.disc, self.values.copy(), self.support.copy(),
                           dict(self.meta), self.radial_form)

    def check_support_marker(self) -> bool:
        """Support marker must contain every node carrying a nonzero value."""
        return bool(np.all(self.support[self.values != 0.0]))


# ---------------------------------------------------------------------------
# metric fields
# ---------------------------------------------------------------------------

class IsotropicExterior:
    """Closed-form conformally flat exterior g = w(r) * delta for |x| > r_K.

    ``w`` and ``dw`` evaluate the conformal factor and its radial
    derivative; ``q`` is the decay exponent of g - delta.
    """

    def __init__(self, w, dw, r_K: float, q: float):
        self.w = w
        self.dw = dw
        self.r_K = float(r_K)
        self.q = float(q)

    def rescaled(self, uc, duc, exponent: float) -> "IsotropicExterior":
        """Exterior of u^exponent * g for a closed-form radial factor u."""
        w_old, dw_old = self.w, self.dw

        def w_new(r):
            return np.asarray(uc(r)) ** exponent * np.asarray(w_old(r))

        def dw_new(r):
            u = np.asarray(uc(r))
            return (exponent * u ** (exponent - 1.0) * np.asarray(duc(r)) * np.asarray(w_old(r))
                    + u ** exponent * np.asarray(dw_old(r)))

        return IsotropicExterior(w_new, dw_new, self.r_K, self.q)


@dataclass
class MetricField:
    """Symmetric (0,2) tensor samples plus an optional closed-form exterior.

    comps has shape ``disc.shape + (3, 3)`` on Cartesian grids.  On radial
    meshes it has shape ``(npts, 2)`` holding (A, B) of
    A(r) dr^2 + B(r) r^2 dsigma^2.
    """

    disc: Discretization
    comps: np.ndarray
    exterior: IsotropicExterior | None = None
    r_K: float = 0.0
    q: float | None = None
    lambda_min: float = DEFAULT_LAMBDA_MIN
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.comps = np.asarray(self.comps, dtype=float)
        expected = self.disc.shape + ((3, 3) if self.disc.kind == "cartesian" else (2,))
        if self.comps.shape != expected:
            raise GridError(
                f"metric component shape {self.comps.shape} != expected {expected}")

    # -- constructors --------------------------------------------------------

    @staticmethod
    def euclidean(disc: Discretization) -> "MetricField":
        ext = IsotropicExterior(lambda r: np.ones_like(np.asarray(r, dtype=float)),
                                lambda r: np.zeros_like(np.asarray(r, dtype=float)),
                                r_K=0.0, q=np.inf)
        if disc.kind == "cartesian":
            comps = np.broadcast_to(np.eye(3), disc.shape + (3, 3)).copy()
        else:
            comps = np.ones(disc.shape + (2,))
        return MetricField(disc, comps, exterior=ext, r_K=0.0, q=np.inf)

    @staticmethod
    def isotropic(disc: Discretization, w_nodes: np.ndarray,
                  exterior: IsotropicExterior | None = None,
                  r_K: float = 0.0, q: float | None = None) -> "MetricField":
        """Conformally flat metric w * delta from nodewise factor samples."""
        w_nodes = np.asarray(w_nodes, dtype=float)
        if disc.kind == "cartesian":
            comps = w_nodes[..., None, None] * np.eye(3)
        else:
            comps = np.stack([w_nodes, w_nodes], axis=-1)
        return MetricField(disc, comps, exterior=exterior, r_K=r_K, q=q)

    def copy(self) -> "MetricField":
        return MetricField(self.disc, self.comps.copy(), self.exterior,
                           self.r_K, self.q, self.lambda_min, dict(self.meta))

    # -- pointwise linear algebra --------------------------------------------

    def radial_AB(self) -> tuple[np.ndarray, np.ndarray]:
        if self.disc.kind != "radial":
            raise GridError("radial_AB is only defined on radial meshes")
        return self.comps[:, 0], self.comps[:, 1]

    def min_eigenvalues(self) -> np.ndarray:
        if self.disc.kind == "radial":
            return self.comps.min(axis=-1)
        return np.linalg.eigvalsh(self.comps)[..., 0]

    def check_definite(self):
        lam = self.min_eigenvalues()
        bad = lam < self.lambda_min
        if bad.any():
            idx = np.unravel_index(int(np.argmax(bad)), bad.shape)
            raise DefinitenessError(
                f"metric is not positive definite at node {idx}: "
                f"min eigenvalue {lam[idx]:.3e} < {self.lambda_min:.1e}",
                node=idx,
            )

    def sqrt_det(self) -> np.ndarray:
        """sqrt(det g) per node (angular unit-sphere factor excluded radially)."""
        if self.disc.kind == "radial":
            A, B = self.radial_AB()
            return np.sqrt(A) * B ** ((self.disc.n - 1) / 2.0)
        return np.sqrt(np.linalg.det(self.comps))

    def inverse(self) -> np.ndarray:
        if self.disc.kind == "radial":
            return 1.0 / self.comps
        return np.linalg.inv(self.comps)

    def node_measure(self) -> np.ndarray:
        """Riemannian quadrature weight per node.

        Cartesian: sqrt(det g) h^3.  Radial: the n-dimensional shell weight
        omega_{n-1} sqrt(A) sqrt(B)^(n-1) * [(r+h/2)^n - (r-h/2)^n]/n, so
        radial sums reproduce integrals over R^n for spherically symmetric
        integrands.  The r-power is integrated exactly over each cell: near
        the origin the midpoint value of r^(n-1) misweights cells by O(1),
        which would break the consistency of the divergence-form Laplacian
        normalized against this measure.
        """
        if self.disc.kind == "cartesian":
            return self.sqrt_det() * self.disc.cell_measure()
        A, B = self.radial_AB()
        r = self.disc.axis_coords()
        n = self.disc.n
        h = self.disc.h
        r_lo = np.maximum(r - h / 2.0, 0.0)
        r_hi = r + h / 2.0
        vol = (r_hi**n - r_lo**n) / n
        return unit_sphere_area(n) * np.sqrt(A) * np.sqrt(B) ** (n - 1) * vol

    def exterior_mismatch(self) -> float:
        """Max deviation between samples and the closed form where |x| > r_K."""
        if self.exterior is None:
            return 0.0
        r = self.disc.radius()
        outside = r > max(self.r_K, self.exterior.r_K)
        if not outside.any():
            return 0.0
        w = self.exterior.w(r[outside])
        if self.disc.kind == "radial":
            A, B = self.radial_AB()
            return float(max(np.abs(A[outside] - w).max(),
                             np.abs(B[outside] - w).max()))
        diff = self.comps[outside] - w[..., None, None] * np.eye(3)
        return float(np.abs(diff).max())
