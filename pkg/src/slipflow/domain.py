"""Truncated half-space grids, discrete fields and differential operators.

The domain is a box: ``[-R, R]^(n-1) x [0, R]`` when ``half_space`` is true,
the mirrored box ``[-R, R]^n`` otherwise.  The last axis is the wall-normal
direction; the wall (the plane x_n = 0) carries the slip conditions
u_n = 0 and d(u_i)/d(x_n) = 0 for the tangential components.

Stencil conventions, chosen so that algebraic identities used by the tests
hold exactly rather than approximately:

* ``sym_gradient_field`` and the trace residuals use centered differences in
  the interior and one-sided second-order rows on every boundary face, so
  boundary traces are measured, not assumed.
* ``divergence`` and the transport gradient use ghost-parity rows at the
  wall (tangential components extended evenly, the normal one oddly).  This
  makes the mirror extension of a discretely divergence-free field exactly
  divergence-free on the full box, which is the discrete heart of the
  reflection argument.
* ``leray_project`` is the exact weighted least-squares projection onto the
  discrete constraint null space, hence idempotent to solver precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lstsq

__all__ = [
    "Grid",
    "VelocityField",
    "PressureField",
    "deriv",
    "sym_gradient_field",
    "velocity_gradient",
    "divergence",
    "leray_project",
    "reflect",
    "restrict",
    "reflect_pressure",
    "restrict_pressure",
    "slip_trace_residual",
    "korn_ratio",
    "difference_quotient",
    "omega_prime",
    "regularity_functionals",
    "lp_norm",
    "integrate",
    "shell_maxima",
    "field_magnitude",
    "save_snapshot",
]


@dataclass(frozen=True)
class Grid:
    """Uniform node-centered grid on the (half) box with spacing h = radius / cells."""

    dim: int = 2
    radius: float = 1.0
    cells: int = 8
    half_space: bool = True

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.cells < 2:
            raise ValueError("need at least 2 cells per half-axis")

    @property
    def h(self) -> float:
        return self.radius / self.cells

    @property
    def normal_axis(self) -> int:
        return self.dim - 1

    @property
    def shape(self) -> tuple[int, ...]:
        tang = 2 * self.cells + 1
        norm = self.cells + 1 if self.half_space else 2 * self.cells + 1
        return (tang,) * (self.dim - 1) + (norm,)

    @property
    def plane_index(self) -> int:
        """Index of the x_n = 0 slice along the normal axis."""
        return 0 if self.half_space else self.cells

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.shape))

    def axis_coords(self, axis: int) -> np.ndarray:
        n = self.shape[axis]
        if axis < self.normal_axis or not self.half_space:
            return np.linspace(-self.radius, self.radius, n)
        return np.linspace(0.0, self.radius, n)

    def coords(self) -> list[np.ndarray]:
        """Open-mesh coordinate arrays, broadcastable to ``shape``."""
        out = []
        for axis in range(self.dim):
            c = self.axis_coords(axis)
            shp = [1] * self.dim
            shp[axis] = c.size
            out.append(c.reshape(shp))
        return out

    def refine(self, factor: int = 2) -> "Grid":
        return Grid(self.dim, self.radius, self.cells * factor, self.half_space)

    def full_box(self) -> "Grid":
        return Grid(self.dim, self.radius, self.cells, half_space=False)

    def quad_weights(self) -> np.ndarray:
        """Trapezoid quadrature weights per node (includes the h^dim factor)."""
        return _quad_weights(self)


def _box_weights(shape: tuple[int, ...], h: float) -> np.ndarray:
    w = np.ones(shape)
    for axis, n in enumerate(shape):
        wa = np.ones(n)
        wa[0] = wa[-1] = 0.5
        shp = [1] * len(shape)
        shp[axis] = n
        w = w * wa.reshape(shp)
    return w * h ** len(shape)


@lru_cache(maxsize=64)
def _quad_weights_cached(dim, radius, cells, half_space) -> np.ndarray:
    g = Grid(dim, radius, cells, half_space)
    w = _box_weights(g.shape, g.h)
    w.setflags(write=False)
    return w


def _quad_weights(grid: Grid) -> np.ndarray:
    return _quad_weights_cached(grid.dim, grid.radius, grid.cells, grid.half_space)


@dataclass
class VelocityField:
    """n scalar component arrays collocated on the grid nodes."""

    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        want = (self.grid.dim,) + self.grid.shape
        if self.data.shape != want:
            raise ValueError(f"expected data shape {want}, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("velocity field contains non-finite entries")

    @classmethod
    def zero(cls, grid: Grid) -> "VelocityField":
        return cls(grid, np.zeros((grid.dim,) + grid.shape))

    @classmethod
    def from_expressions(cls, grid: Grid, exprs, t: float | None = None) -> "VelocityField":
        from .expressions import evaluate

        if len(exprs) != grid.dim:
            raise ValueError(f"need {grid.dim} component expressions, got {len(exprs)}")
        coords = grid.coords()
        data = np.stack([evaluate(e, coords, t=t) for e in exprs])
        return cls(grid, data)

    def copy(self) -> "VelocityField":
        return VelocityField(self.grid, self.data.copy())

    def __add__(self, other: "VelocityField") -> "VelocityField":
        return VelocityField(self.grid, self.data + other.data)

    def __sub__(self, other: "VelocityField") -> "VelocityField":
        return VelocityField(self.grid, self.data - other.data)

    def __mul__(self, s: float) -> "VelocityField":
        return VelocityField(self.grid, self.data * float(s))

    __rmul__ = __mul__


@dataclass
class PressureField:
    """Scalar nodal field; eigen-pressures are gauged to zero interior mean."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"expected shape {self.grid.shape}, got {self.values.shape}")

    def interior_mean(self) -> float:
        inner = tuple(slice(1, -1) for _ in range(self.grid.dim))
        return float(np.mean(self.values[inner]))

    def recenter(self) -> "PressureField":
        return PressureField(self.grid, self.values - self.interior_mean())


# ---------------------------------------------------------------------------
# derivative stencils
# ---------------------------------------------------------------------------


def _apply_parity_row(df, f, grid: Grid, parity: int):
    """Overwrite the wall row of a normal-axis derivative with the ghost-parity value."""
    ax = f.ndim - grid.dim + grid.normal_axis
    idx0 = [slice(None)] * f.ndim
    idx0[ax] = 0
    idx1 = [slice(None)] * f.ndim
    idx1[ax] = 1
    if parity == 1:
        df[tuple(idx0)] = 0.0
    else:
        df[tuple(idx0)] = f[tuple(idx1)] / grid.h
    return df


def deriv(f: np.ndarray, grid: Grid, axis: int, parity: int | None = None) -> np.ndarray:
    """d/dx_axis with centered interior and one-sided second-order edges.

    ``parity`` (+1 even, -1 odd) replaces the wall row of a normal-axis
    derivative on half grids by the ghost-mirror value.
    """
    arr_axis = f.ndim - grid.dim + axis
    df = np.gradient(f, grid.h, axis=arr_axis, edge_order=2)
    if parity is not None and grid.half_space and axis == grid.normal_axis:
        _apply_parity_row(df, f, grid, parity)
    return df


def sym_gradient_field(u: VelocityField) -> np.ndarray:
    """Symmetric velocity gradient D(u), shape (n, n, *grid shape).

    One-sided rows on all faces, so wall values reflect the actual traces.
    """
    g = u.grid
    n = g.dim
    du = np.stack([
        np.stack([deriv(u.data[i], g, j) for j in range(n)]) for i in range(n)
    ])  # du[i, j] = d u_i / d x_j
    return 0.5 * (du + du.transpose(1, 0, *range(2, 2 + n)))


def velocity_gradient(u: VelocityField, slip_parity: bool = False) -> np.ndarray:
    """Full gradient, G[i, j] = d u_j / d x_i.

    With ``slip_parity`` the wall rows use the slip ghost extension
    (tangential components even, normal component odd); used by the
    transport pairing so it commutes with the mirror reflection.
    """
    g = u.grid
    n = g.dim
    out = np.empty((n, n) + g.shape)
    for j in range(n):
        for i in range(n):
            parity = None
            if slip_parity and i == g.normal_axis:
                parity = -1 if j == g.normal_axis else 1
            out[i, j] = deriv(u.data[j], g, i, parity=parity)
    return out


def divergence(u: VelocityField) -> np.ndarray:
    """Nodal divergence; on half grids the wall row uses the slip ghost extension."""
    g = u.grid
    out = np.zeros(g.shape)
    for i in range(g.dim):
        parity = -1 if (g.half_space and i == g.normal_axis) else None
        out += deriv(u.data[i], g, i, parity=parity)
    return out


# sparse matrix forms of the same stencils ---------------------------------


def _deriv_matrix_1d(n: int, h: float, parity_row0: int | None = None) -> sp.csr_matrix:
    m = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        m[i, i - 1] = -0.5 / h
        m[i, i + 1] = 0.5 / h
    m[0, 0], m[0, 1], m[0, 2] = -1.5 / h, 2.0 / h, -0.5 / h
    m[n - 1, n - 1], m[n - 1, n - 2], m[n - 1, n - 3] = 1.5 / h, -2.0 / h, 0.5 / h
    if parity_row0 is not None:
        m[0, :] = 0.0
        if parity_row0 == -1:
            m[0, 1] = 1.0 / h
    return m.tocsr()


def _second_deriv_matrix_1d(n: int, h: float) -> sp.csr_matrix:
    m = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        m[i, i - 1] = 1.0 / h**2
        m[i, i] = -2.0 / h**2
        m[i, i + 1] = 1.0 / h**2
    if n >= 4:
        m[0, 0], m[0, 1], m[0, 2], m[0, 3] = (
            2.0 / h**2,
            -5.0 / h**2,
            4.0 / h**2,
            -1.0 / h**2,
        )
        m[n - 1, n - 1], m[n - 1, n - 2], m[n - 1, n - 3], m[n - 1, n - 4] = (
            2.0 / h**2,
            -5.0 / h**2,
            4.0 / h**2,
            -1.0 / h**2,
        )
    else:
        m[0, :] = m[1, :]
        m[n - 1, :] = m[n - 2, :]
    return m.tocsr()


def _kron_chain(mats) -> sp.csr_matrix:
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return out


@lru_cache(maxsize=256)
def _axis_matrix_cached(dim, radius, cells, half_space, axis, parity, order):
    g = Grid(dim, radius, cells, half_space)
    mats = []
    for a, n in enumerate(g.shape):
        if a == axis:
            if order == 2:
                mats.append(_second_deriv_matrix_1d(n, g.h))
            else:
                p = parity if (half_space and a == g.normal_axis) else None
                mats.append(_deriv_matrix_1d(n, g.h, parity_row0=p))
        else:
            mats.append(sp.eye(n, format="csr"))
    return _kron_chain(mats)


def deriv_matrix(grid: Grid, axis: int, parity: int | None = None) -> sp.csr_matrix:
    """Sparse matrix realization of :func:`deriv` on raveled scalar fields."""
    return _axis_matrix_cached(
        grid.dim, grid.radius, grid.cells, grid.half_space, axis, parity, 1
    )


def second_deriv_matrix(grid: Grid, axis: int) -> sp.csr_matrix:
    return _axis_matrix_cached(
        grid.dim, grid.radius, grid.cells, grid.half_space, axis, None, 2
    )


def divergence_matrix(grid: Grid) -> sp.csr_matrix:
    """Divergence as an (N x n N) sparse map on stacked components."""
    blocks = []
    for i in range(grid.dim):
        parity = -1 if (grid.half_space and i == grid.normal_axis) else None
        blocks.append(deriv_matrix(grid, i, parity=parity))
    return sp.hstack(blocks, format="csr")


# ---------------------------------------------------------------------------
# Leray projection
# ---------------------------------------------------------------------------


def _plane_normal_rows(grid: Grid) -> sp.csr_matrix:
    """Constraint rows pinning u_n = 0 on the wall."""
    n_nodes = grid.num_nodes
    mask = np.zeros(grid.shape, dtype=bool)
    idx = [slice(None)] * grid.dim
    idx[grid.normal_axis] = grid.plane_index
    mask[tuple(idx)] = True
    rows = np.flatnonzero(mask.ravel())
    cols = grid.normal_axis * n_nodes + rows
    data = np.ones(rows.size)
    return sp.csr_matrix(
        (data, (np.arange(rows.size), cols)), shape=(rows.size, grid.dim * n_nodes)
    )


def projection_constraints(grid: Grid) -> sp.csr_matrix:
    """Stacked divergence rows (all nodes) plus wall impermeability rows."""
    c = divergence_matrix(grid)
    if grid.half_space:
        c = sp.vstack([c, _plane_normal_rows(grid)], format="csr")
    return c


def leray_project(u: VelocityField, rcond: float = 1e-12) -> VelocityField:
    """Weighted L2 projection onto discretely divergence-free fields.

    Solves min ||v - u||_W subject to div v = 0 at every node and v_n = 0 on
    the wall; equivalently v = u - grad(phi) with phi the Schur-complement
    solution of the mixed Poisson problem.  Idempotent by construction.
    """
    g = u.grid
    c = projection_constraints(g)
    w = np.tile(_quad_weights(g).ravel(), g.dim)
    sqw = np.sqrt(w)
    x = (c.multiply(1.0 / sqw)).T.toarray()  # W^{-1/2} C^T
    uvec = u.data.reshape(-1)
    xi, *_ = lstsq(x, sqw * uvec, cond=rcond, lapack_driver="gelsd")
    vvec = uvec - (x @ xi) / sqw
    return VelocityField(g, vvec.reshape((g.dim,) + g.shape))


# ---------------------------------------------------------------------------
# mirror reflection across the wall
# ---------------------------------------------------------------------------


def reflect(u: VelocityField, parity: int = 1) -> VelocityField:
    """Extend a half-grid field to the full box by the mirror rules.

    ``parity=+1`` is the slip reflection: tangential components even in the
    normal coordinate, normal component odd.  ``parity=-1`` flips every
    sign rule (odd mirror images, consistent for fields whose tangential
    components vanish on the wall).  Restriction recovers the input exactly.
    """
    g = u.grid
    if not g.half_space:
        raise ValueError("reflect expects a half-space field")
    full = g.full_box()
    m = g.cells
    ax = 1 + g.normal_axis  # data axis for the normal direction
    out = np.zeros((g.dim,) + full.shape)
    upper = [slice(None)] * (1 + g.dim)
    upper[ax] = slice(m, None)
    out[tuple(upper)] = u.data
    lower = [slice(None)] * (1 + g.dim)
    lower[ax] = slice(m - 1, None, -1)
    mirror = [slice(None)] * (1 + g.dim)
    mirror[ax] = slice(1, None)
    signs = float(parity) * np.ones(g.dim)
    signs[g.normal_axis] = -float(parity)
    out[tuple(lower)] = signs.reshape((-1,) + (1,) * g.dim) * u.data[tuple(mirror)]
    return VelocityField(full, out)


def restrict(u: VelocityField) -> VelocityField:
    """Restriction of a full-box field to the half grid x_n >= 0."""
    g = u.grid
    if g.half_space:
        raise ValueError("restrict expects a full-box field")
    half = Grid(g.dim, g.radius, g.cells, half_space=True)
    ax = 1 + g.normal_axis
    idx = [slice(None)] * (1 + g.dim)
    idx[ax] = slice(g.cells, None)
    return VelocityField(half, u.data[tuple(idx)].copy())


def reflect_pressure(p: PressureField) -> PressureField:
    g = p.grid
    if not g.half_space:
        raise ValueError("reflect_pressure expects a half-space field")
    full = g.full_box()
    m = g.cells
    ax = g.normal_axis
    out = np.zeros(full.shape)
    upper = [slice(None)] * g.dim
    upper[ax] = slice(m, None)
    out[tuple(upper)] = p.values
    lower = [slice(None)] * g.dim
    lower[ax] = slice(m - 1, None, -1)
    mirror = [slice(None)] * g.dim
    mirror[ax] = slice(1, None)
    out[tuple(lower)] = p.values[tuple(mirror)]
    return PressureField(full, out)


def restrict_pressure(p: PressureField) -> PressureField:
    g = p.grid
    if g.half_space:
        raise ValueError("restrict_pressure expects a full-box field")
    half = Grid(g.dim, g.radius, g.cells, half_space=True)
    idx = [slice(None)] * g.dim
    idx[g.normal_axis] = slice(g.cells, None)
    return PressureField(half, p.values[tuple(idx)].copy())


# ---------------------------------------------------------------------------
# boundary traces, Korn ratio
# ---------------------------------------------------------------------------


def slip_trace_residual(u: VelocityField) -> tuple[float, float]:
    """(max |u_n|, max |d u_i / d x_n|) over the wall, one-sided second order."""
    g = u.grid
    if not g.half_space:
        raise ValueError("slip traces are defined on half-space grids")
    ax = 1 + g.normal_axis
    sl = [slice(None)] * (1 + g.dim)

    def row(k):
        s = list(sl)
        s[ax] = k
        return tuple(s)

    normal_res = float(np.max(np.abs(u.data[g.normal_axis][row(0)[1:]])))
    d = (-3.0 * u.data[row(0)] + 4.0 * u.data[row(1)] - u.data[row(2)]) / (2.0 * g.h)
    tangential = [d[i] for i in range(g.dim) if i != g.normal_axis]
    tang_res = float(max(np.max(np.abs(t)) for t in tangential))
    return normal_res, tang_res


def field_magnitude(f: np.ndarray, grid: Grid) -> np.ndarray:
    """Pointwise Euclidean/Frobenius magnitude over leading component axes."""
    lead = f.ndim - grid.dim
    if lead == 0:
        return np.abs(f)
    return np.sqrt(np.sum(f.reshape((-1,) + f.shape[lead:]) ** 2, axis=0))


def integrate(values: np.ndarray, grid: Grid, region=None) -> float:
    """Trapezoid integral of a nodal scalar array, optionally over a sub-box."""
    if region is None:
        return float(np.sum(_quad_weights(grid) * values))
    sub = values[tuple(region)]
    return float(np.sum(_box_weights(sub.shape, grid.h) * sub))


def lp_norm(f: np.ndarray, p: float, grid: Grid, region=None) -> float:
    """L^p norm by nodal quadrature; ``f`` has shape (*components, *grid shape)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    mag = field_magnitude(f, grid)
    if region is not None:
        mag = mag[tuple(region)]
        w = _box_weights(mag.shape, grid.h)
    else:
        w = _quad_weights(grid)
    return float(np.sum(w * mag**p) ** (1.0 / p))


def korn_ratio(u: VelocityField, p: float) -> float:
    """||grad u||_p / ||D(u)||_p for compactly supported fields.

    Equals sqrt(2) in the limit for p = 2 and divergence-free data.  Raises
    for zero strain (e.g. rigid rotations, which the compact-support
    precondition excludes).
    """
    g = u.grid
    dnorm = lp_norm(sym_gradient_field(u), p, g)
    if dnorm == 0.0:
        raise ValueError("zero strain field: Korn ratio undefined")
    gnorm = lp_norm(velocity_gradient(u), p, g)
    return gnorm / dnorm


# ---------------------------------------------------------------------------
# difference quotients and regularity functionals
# ---------------------------------------------------------------------------


def _steps_of(grid: Grid, lam: float) -> int:
    steps = lam / grid.h
    if abs(steps - round(steps)) > 1e-9:
        raise ValueError(f"lambda={lam} is not an integer multiple of h={grid.h}")
    return int(round(steps))


def omega_prime(grid: Grid, width: int, protect_plane: bool = False):
    """Sub-box slices keeping ``width`` nodes away from every non-wall face."""
    slices = []
    for axis, n in enumerate(grid.shape):
        lo = width
        hi = n - width
        if grid.half_space and axis == grid.normal_axis and not protect_plane:
            lo = 0
        if hi - lo < 1:
            raise ValueError(f"margin {width} leaves no interior nodes on axis {axis}")
        slices.append(slice(lo, hi))
    return tuple(slices)


def difference_quotient(f: np.ndarray, grid: Grid, lam: float, axis: int):
    """Translate difference f(x + lam e_axis) - f(x) on the admissible interior.

    Returns ``(values, region)`` where ``region`` indexes the evaluation
    sub-box in the grid arrays.  ``lam`` must be a signed integer multiple of
    h small enough that the shifted stencil stays inside the domain.
    """
    steps = _steps_of(grid, lam)
    if steps == 0:
        raise ValueError("lambda must be nonzero")
    toward_plane = grid.half_space and axis == grid.normal_axis and steps < 0
    region = omega_prime(grid, abs(steps), protect_plane=toward_plane)
    lead = f.ndim - grid.dim
    base = (slice(None),) * lead + region
    shifted = list(base)
    r = region[axis]
    shifted[lead + axis] = slice(r.start + steps, r.stop + steps)
    return f[tuple(shifted)] - f[tuple(base)], region


def regularity_functionals(
    u: VelocityField,
    pp,
    lam: float,
    axis: int,
    margin: int = 4,
    trim_plane: bool = False,
) -> tuple[float, float]:
    """Interior second-derivative functional and its difference-quotient shadow.

    Returns ``(J, I/lam^2)`` with
    ``J  = int (1 + |D|)^(p-2) |grad D|^2`` and
    ``I  = int (1 + |D(x + lam e)| + |D|)^(p-2) |Delta_lam D|^2``,
    both over the same interior sub-box with the given node margin.  The
    sub-box may touch the wall unless ``trim_plane`` keeps the margin there
    as well (the interior subdomain is the caller's choice).
    """
    g = u.grid
    steps = _steps_of(g, lam)
    width = max(abs(steps), margin)
    d = sym_gradient_field(u)
    s = field_magnitude(d, g)

    toward_plane = g.half_space and axis == g.normal_axis and steps < 0
    region = omega_prime(g, width, protect_plane=trim_plane or toward_plane)

    grad_d = np.stack([deriv(d, g, a) for a in range(g.dim)])
    gd2 = np.sum(grad_d.reshape((-1,) + g.shape) ** 2, axis=0)
    wgt = (1.0 + s) ** (pp.p - 2.0)
    j = float(np.sum(_box_weights(s[region].shape, g.h) * (wgt * gd2)[region]))

    base = (slice(None), slice(None)) + region
    shifted = list(base)
    r = region[axis]
    shifted[2 + axis] = slice(r.start + steps, r.stop + steps)
    if shifted[2 + axis].start < 0 or shifted[2 + axis].stop > g.shape[axis]:
        raise ValueError(f"lambda={lam} shifts outside the grid for this margin")
    dd = d[tuple(shifted)] - d[tuple(base)]
    dd2 = np.sum(dd.reshape((-1,) + dd.shape[2:]) ** 2, axis=0)
    s_shift = s[tuple(shifted[2:])]
    wgt_i = (1.0 + s_shift + s[region]) ** (pp.p - 2.0)
    i_val = float(np.sum(_box_weights(dd2.shape, g.h) * wgt_i * dd2))
    return j, i_val / lam**2


def shell_maxima(u: VelocityField, num_shells_per_radius: int = 8) -> np.ndarray:
    """Max |u| over concentric shells of width R / num_shells_per_radius."""
    g = u.grid
    width = g.radius / num_shells_per_radius
    r = np.sqrt(sum(c**2 for c in g.coords()) + np.zeros(g.shape))
    bins = np.minimum((r / width).astype(int), int(np.ceil(r.max() / width)))
    mag = field_magnitude(u.data, g)
    k = int(bins.max()) + 1
    out = np.zeros(k)
    flat_bins = bins.ravel()
    flat_mag = mag.ravel()
    np.maximum.at(out, flat_bins, flat_mag)
    return out


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------


def save_snapshot(path_prefix, grid: Grid, fields: dict) -> None:
    """Write nodal fields as flat CSV plus a JSON header with grid metadata.

    ``fields`` maps a name to an array of shape ``grid.shape`` or
    ``(k, *grid.shape)``; components get suffixes ``_1 .. _k``.
    """
    import json
    from pathlib import Path

    path_prefix = Path(path_prefix)
    mesh = np.meshgrid(*[grid.axis_coords(a) for a in range(grid.dim)], indexing="ij")
    columns = [f"x{a + 1}" for a in range(grid.dim)]
    arrays = [m.ravel() for m in mesh]
    meta_fields = {}
    for name, arr in fields.items():
        arr = np.asarray(arr)
        if arr.shape == grid.shape:
            columns.append(name)
            arrays.append(arr.ravel())
            meta_fields[name] = 1
        else:
            k = arr.shape[0]
            meta_fields[name] = k
            for i in range(k):
                columns.append(f"{name}_{i + 1}")
                arrays.append(arr[i].ravel())
    table = np.column_stack(arrays)
    np.savetxt(
        path_prefix.with_suffix(".csv"),
        table,
        delimiter=",",
        header=",".join(columns),
        comments="",
    )
    meta = {
        "dim": grid.dim,
        "radius": grid.radius,
        "cells": grid.cells,
        "h": grid.h,
        "shape": list(grid.shape),
        "half_space": grid.half_space,
        "fields": meta_fields,
    }
    path_prefix.with_suffix(".json").write_text(json.dumps(meta, indent=2))
