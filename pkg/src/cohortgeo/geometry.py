"""Discrete differential geometry on rate grids.

Each grid point ``p = (t, x, z)`` lives in R^3: calendar year, age, and the
rate value. Around every interior point with a complete 3x3 neighbourhood we
build four three-point stencil curves::

    cohort: {p[i-1,j-1], p[i,j], p[i+1,j+1]}   year and age advance together
    cross:  {p[i-1,j+1], p[i,j], p[i+1,j-1]}   anti-diagonal
    period: {p[i-1,j],   p[i,j], p[i+1,j]}     along calendar years, fixed age
    age:    {p[i,j-1],   p[i,j], p[i,j+1]}     along ages, fixed year

and estimate, per curve: a chord-length discrete parameter, a constrained
least-squares tangent at the centre, and a curvature vector. The unit
surface normal is the direction least aligned with all four tangents
(smallest eigenvector of the tangent scatter matrix), and the signed normal
curvature along each direction is the projection of that direction's
curvature vector onto the normal.

Numerical scheme, in the order the quantities are built:

* discrete parameter: ``s0 = 0``, ``s2 = 1``, ``s1 = |q1-q0| / (|q1-q0| +
  |q2-q1|)`` (chord-length ratio).
* tangent at the centre: the slope of the line through ``(s1, q1)`` that
  best fits the two remaining points in the least-squares sense,
  ``T = [(s0-s1)(q0-q1) + (s2-s1)(q2-q1)] / [(s0-s1)^2 + (s2-s1)^2]``,
  applied componentwise. ``V = T/|T|``.
* curvature vector: the same constrained least-squares slope applied to the
  *unit tangent field* sampled at three parameters, divided by the speed
  ``|T|``. The endpoint samples are the normalized chords, which match the
  curve's unit tangent at the chord midpoints to second order, so they are
  placed at the midpoint parameters ``(s0+s1)/2`` and ``(s1+s2)/2``. (Placing
  them at the endpoints instead biases curvature low by a factor of two;
  three points on a circle of radius r must give ``|CV| -> 1/r``.)
* normal: minimiser of ``sum_k (N . V_k)^2`` over unit vectors, i.e. the
  eigenvector of ``M = sum_k V_k V_k^T`` for the smallest eigenvalue,
  oriented so its z-component is positive (ties broken toward the first
  nonzero component being positive).
* normal curvature: ``NC_k = N . CV_k``.

Border points, points whose 3x3 neighbourhood touches a missing cell, and
points with degenerate stencils are flagged invalid and carry zero fields.
All functions are pure; :func:`compute_geometry_field` is a vectorized map
over independent grid points and is deterministic regardless of scheduling.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AmbiguousNormalError,
    DegenerateStencilError,
    DegenerateTangentError,
    SurfaceSizeError,
)
from .surface import MortalitySurface, SurfaceGrid

COHORT, CROSS, PERIOD, AGE = 0, 1, 2, 3
DIRECTION_NAMES = ("cohort", "cross", "period", "age")

# (di, dj) offsets of the stencil endpoints relative to the centre.
_STENCIL_OFFSETS = (
    ((-1, -1), (1, 1)),
    ((-1, 1), (1, -1)),
    ((-1, 0), (1, 0)),
    ((0, -1), (0, 1)),
)

_TANGENT_EPS = 1e-14
_EIGENGAP_TOL = 1e-9


def _norm3(v: np.ndarray) -> float:
    return math.sqrt(float(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]))


def discrete_parameter(q0, q1, q2) -> tuple[float, float, float]:
    """Chord-length parameters (0, s1, 1) of a three-point discrete curve.

    ``s1`` is the fraction of total chord length covered by the first leg.
    Raises :class:`DegenerateStencilError` if consecutive points coincide.
    """
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    a = _norm3(q1 - q0)
    b = _norm3(q2 - q1)
    if a == 0.0 or b == 0.0:
        raise DegenerateStencilError("coincident consecutive stencil points")
    return 0.0, a / (a + b), 1.0


def _ls_slope(v0, v1, v2, s0, s1, s2):
    """Slope at ``s1`` of the best-fit line constrained through ``(s1, v1)``.

    Minimises ``(v0 - v1 - d (s0 - s1))^2 + (v2 - v1 - d (s2 - s1))^2`` over
    the slope ``d``. Broadcasts over arrays.
    """
    d0 = s0 - s1
    d2 = s2 - s1
    return (d0 * (v0 - v1) + d2 * (v2 - v1)) / (d0 * d0 + d2 * d2)


def ls_derivative(values, params) -> float:
    """Constrained least-squares derivative at the middle sample.

    ``values`` are three reals sampled at ``params`` (as produced by
    :func:`discrete_parameter`); the returned slope is exact for data that
    is affine in the parameter.
    """
    v0, v1, v2 = (float(v) for v in values)
    s0, s1, s2 = (float(s) for s in params)
    return float(_ls_slope(v0, v1, v2, s0, s1, s2))


@dataclass(frozen=True, eq=False)
class StencilCurve:
    """Three-point discrete curve with its chord-length parameters."""

    q0: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    s: tuple[float, float, float]

    @classmethod
    def from_points(cls, q0, q1, q2) -> "StencilCurve":
        q0 = np.asarray(q0, dtype=float)
        q1 = np.asarray(q1, dtype=float)
        q2 = np.asarray(q2, dtype=float)
        return cls(q0=q0, q1=q1, q2=q2, s=discrete_parameter(q0, q1, q2))


def discrete_tangent(curve: StencilCurve) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares tangent at the centre point: ``(T, V = T/|T|)``.

    Raises :class:`DegenerateTangentError` when ``|T|`` falls below 1e-14
    (the three points fold back onto the centre).
    """
    s0, s1, s2 = curve.s
    T = _ls_slope(curve.q0, curve.q1, curve.q2, s0, s1, s2)
    nT = _norm3(T)
    if nT < _TANGENT_EPS:
        raise DegenerateTangentError("least-squares tangent has near-zero magnitude")
    return T, T / nT


def curvature_vector(curve: StencilCurve) -> np.ndarray:
    """Curvature vector at the centre: tangent-field derivative over speed.

    The unit tangent field is sampled three times: normalized chords for
    the two legs (at the chord-midpoint parameters) and the least-squares
    tangent at the centre. Its constrained least-squares derivative divided
    by the centre speed ``|T|`` gives curvature per unit arc length. Exactly
    zero for collinear points at any spacing.
    """
    s0, s1, s2 = curve.s
    T, v_center = discrete_tangent(curve)
    nT = _norm3(T)
    c01 = curve.q1 - curve.q0
    c12 = curve.q2 - curve.q1
    u0 = c01 / _norm3(c01)
    u2 = c12 / _norm3(c12)
    m0 = 0.5 * (s0 + s1)
    m2 = 0.5 * (s1 + s2)
    dV = _ls_slope(u0, v_center, u2, m0, s1, m2)
    return dV / nT


def _orient(n: np.ndarray) -> np.ndarray:
    """Fix the normal's sign: z-component >= 0, ties toward +t then +x."""
    flip = n[2] < 0 or (
        n[2] == 0 and (n[0] < 0 or (n[0] == 0 and n[1] < 0))
    )
    return -n if flip else n


def estimate_normal(v1, v2, v3, v4) -> np.ndarray:
    """Unit vector least aligned with four unit tangents.

    Returns the eigenvector of ``M = sum_k v_k v_k^T`` belonging to the
    smallest eigenvalue, which minimises ``f(N) = sum_k (N . v_k)^2`` over
    the unit sphere. Raises :class:`AmbiguousNormalError` when the two
    smallest eigenvalues are closer than 1e-9 (tangents do not pin down a
    unique orthogonal direction).
    """
    V = np.asarray([v1, v2, v3, v4], dtype=float)
    M = V.T @ V
    w, vecs = np.linalg.eigh(M)
    if w[1] - w[0] < _EIGENGAP_TOL:
        raise AmbiguousNormalError(
            f"smallest eigenvalue not unique (gap {w[1] - w[0]:.3e})"
        )
    return _orient(vecs[:, 0])


def normal_curvature(n, cv) -> float:
    """Signed bending along one direction: projection of CV onto N."""
    n = np.asarray(n, dtype=float)
    cv = np.asarray(cv, dtype=float)
    return float(n[0] * cv[0] + n[1] * cv[1] + n[2] * cv[2])


# --- whole-grid assembly -----------------------------------------------------

@dataclass(frozen=True)
class GeometryOptions:
    """Value-axis conventions for the kernel.

    ``z_scale`` multiplies all rates before any geometry; ``log_rates``
    replaces rates by their natural log (nonpositive rates become missing).
    Defaults reproduce raw-rate geometry on a unit grid.
    """

    z_scale: float = 1.0
    log_rates: bool = False

    def __post_init__(self) -> None:
        if not (self.z_scale > 0 and math.isfinite(self.z_scale)):
            raise ValueError("z_scale must be positive and finite")

    def label(self) -> str:
        parts = [f"z_scale={self.z_scale!r}"]
        if self.log_rates:
            parts.append("log_rates")
        return ",".join(parts)


def prepare_grid(surface: MortalitySurface | SurfaceGrid,
                 options: GeometryOptions | None = None) -> SurfaceGrid:
    """Apply value-axis options and return the raw grid the kernel runs on."""
    grid = surface.to_grid()
    options = options or GeometryOptions()
    if options.z_scale == 1.0 and not options.log_rates:
        return grid
    z = grid.z * options.z_scale
    if options.log_rates:
        with np.errstate(invalid="ignore", divide="ignore"):
            z = np.where(z > 0, np.log(np.where(z > 0, z, 1.0)), np.nan)
    return SurfaceGrid(t=grid.t, x=grid.x, z=z)


@dataclass(frozen=True, eq=False)
class GeometryField:
    """Per-grid-point tangents, curvature vectors, normal, normal curvatures.

    Arrays are full grid size; border points and points rejected by the
    kernel have ``valid == False`` and all-zero fields. Direction index
    order is ``(cohort, cross, period, age)``.
    """

    years: np.ndarray                 # t coordinates, shape (ny,)
    ages: np.ndarray                  # x coordinates, shape (nx,)
    valid: np.ndarray                 # (ny, nx) bool
    tangents: np.ndarray              # (ny, nx, 4, 3) unit tangents
    curvature_vectors: np.ndarray     # (ny, nx, 4, 3)
    normals: np.ndarray               # (ny, nx, 3) unit normals
    normal_curvatures: np.ndarray     # (ny, nx, 4) signed
    options: GeometryOptions

    @property
    def shape(self) -> tuple[int, int]:
        return self.valid.shape

    def to_csv(self) -> str:
        """One row per grid point: coordinates, validity, normal, curvatures."""
        out = io.StringIO()
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(
            ["year", "age", "valid", "normal_t", "normal_x", "normal_z"]
            + [f"nc_{name}" for name in DIRECTION_NAMES]
        )
        for i, t in enumerate(self.years):
            for j, x in enumerate(self.ages):
                writer.writerow(
                    [_format_coord(t), _format_coord(x), int(self.valid[i, j])]
                    + [repr(float(v)) for v in self.normals[i, j]]
                    + [repr(float(v)) for v in self.normal_curvatures[i, j]]
                )
        return out.getvalue()

    def to_json(self) -> str:
        obj = {
            "years": [float(t) for t in self.years],
            "ages": [float(x) for x in self.ages],
            "directions": list(DIRECTION_NAMES),
            "options": self.options.label(),
            "valid": self.valid.astype(int).tolist(),
            "normals": self.normals.tolist(),
            "normal_curvatures": self.normal_curvatures.tolist(),
        }
        return json.dumps(obj, indent=2) + "\n"


def _format_coord(v: float) -> str:
    f = float(v)
    return str(int(f)) if f.is_integer() else repr(f)


def compute_point_geometry(grid: SurfaceGrid, i: int, j: int):
    """Reference per-point path: scalar ops on the four stencil curves.

    Exists so the vectorized field assembly can be cross-checked against
    the one-point definitions. Raises the scalar ops' errors for border
    points, missing neighbours, and degenerate configurations.
    """
    ny, nx = grid.shape
    if not (1 <= i < ny - 1 and 1 <= j < nx - 1):
        raise SurfaceSizeError(f"({i}, {j}) is not interior to the grid")
    present = grid.present
    if not present[i - 1:i + 2, j - 1:j + 2].all():
        raise DegenerateStencilError(
            f"missing cell in the 3x3 neighbourhood of ({i}, {j})"
        )

    def point(ii: int, jj: int) -> np.ndarray:
        return np.array([grid.t[ii], grid.x[jj], grid.z[ii, jj]])

    tangents = np.empty((4, 3))
    cvs = np.empty((4, 3))
    for k, ((di0, dj0), (di2, dj2)) in enumerate(_STENCIL_OFFSETS):
        curve = StencilCurve.from_points(
            point(i + di0, j + dj0), point(i, j), point(i + di2, j + dj2)
        )
        _, tangents[k] = discrete_tangent(curve)
        cvs[k] = curvature_vector(curve)
    normal = estimate_normal(*tangents)
    ncs = np.array([normal_curvature(normal, cvs[k]) for k in range(4)])
    return tangents, cvs, normal, ncs


def compute_geometry_field(surface: MortalitySurface | SurfaceGrid,
                           options: GeometryOptions | None = None) -> GeometryField:
    """Run the kernel over every interior grid point.

    Vectorized over points; identical arithmetic to
    :func:`compute_point_geometry` at each valid point. Points are valid
    only when all nine neighbourhood cells are present and every stencil is
    non-degenerate with an unambiguous normal.
    """
    options = options or GeometryOptions()
    grid = prepare_grid(surface, options)
    ny, nx = grid.shape
    if ny < 3 or nx < 3:
        raise SurfaceSizeError(f"grid {ny}x{nx} is smaller than 3x3")

    P = np.empty((ny, nx, 3))
    P[..., 0] = grid.t[:, None]
    P[..., 1] = grid.x[None, :]
    P[..., 2] = grid.z
    present = grid.present

    valid = np.ones((ny - 2, nx - 2), dtype=bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            valid &= present[1 + di:ny - 1 + di, 1 + dj:nx - 1 + dj]

    center = P[1:-1, 1:-1]
    V = np.zeros(center.shape[:2] + (4, 3))
    CV = np.zeros_like(V)
    with np.errstate(invalid="ignore", divide="ignore"):
        for k, ((di0, dj0), (di2, dj2)) in enumerate(_STENCIL_OFFSETS):
            q0 = P[1 + di0:ny - 1 + di0, 1 + dj0:nx - 1 + dj0]
            q2 = P[1 + di2:ny - 1 + di2, 1 + dj2:nx - 1 + dj2]
            c01 = center - q0
            c12 = q2 - center
            a = np.sqrt(c01[..., 0] ** 2 + c01[..., 1] ** 2 + c01[..., 2] ** 2)
            b = np.sqrt(c12[..., 0] ** 2 + c12[..., 1] ** 2 + c12[..., 2] ** 2)
            ok = valid & (a > 0) & (b > 0)
            s1 = a / (a + b)
            d0 = 0.0 - s1
            d2 = 1.0 - s1
            den = d0 * d0 + d2 * d2
            T = (d0[..., None] * (q0 - center) + d2[..., None] * (q2 - center)) \
                / den[..., None]
            nT = np.sqrt(T[..., 0] ** 2 + T[..., 1] ** 2 + T[..., 2] ** 2)
            ok &= nT >= _TANGENT_EPS
            vk = T / nT[..., None]
            u0 = c01 / a[..., None]
            u2 = c12 / b[..., None]
            m0 = 0.5 * (0.0 + s1)
            m2 = 0.5 * (s1 + 1.0)
            e0 = m0 - s1
            e2 = m2 - s1
            dV = (e0[..., None] * (u0 - vk) + e2[..., None] * (u2 - vk)) \
                / (e0 * e0 + e2 * e2)[..., None]
            cvk = dV / nT[..., None]
            V[..., k, :] = np.where(ok[..., None], vk, 0.0)
            CV[..., k, :] = np.where(ok[..., None], cvk, 0.0)
            valid &= ok

    M = np.einsum("yxki,yxkj->yxij", V, V)
    # eigh needs clean input at masked points; the identity is harmless there.
    M = np.where(valid[..., None, None], M, np.eye(3))
    w, vecs = np.linalg.eigh(M)
    valid &= (w[..., 1] - w[..., 0]) >= _EIGENGAP_TOL
    n = vecs[..., :, 0]
    flip = (n[..., 2] < 0) | (
        (n[..., 2] == 0)
        & ((n[..., 0] < 0) | ((n[..., 0] == 0) & (n[..., 1] < 0)))
    )
    n = np.where(flip[..., None], -n, n)
    NC = np.einsum("yxi,yxki->yxk", n, CV)

    keep = valid[..., None]
    n = np.where(keep, n, 0.0)
    NC = np.where(keep, NC, 0.0)
    V = np.where(keep[..., None], V, 0.0)
    CV = np.where(keep[..., None], CV, 0.0)

    full_valid = np.zeros((ny, nx), dtype=bool)
    full_valid[1:-1, 1:-1] = valid
    full_V = np.zeros((ny, nx, 4, 3))
    full_V[1:-1, 1:-1] = V
    full_CV = np.zeros((ny, nx, 4, 3))
    full_CV[1:-1, 1:-1] = CV
    full_n = np.zeros((ny, nx, 3))
    full_n[1:-1, 1:-1] = n
    full_NC = np.zeros((ny, nx, 4))
    full_NC[1:-1, 1:-1] = NC
    return GeometryField(
        years=grid.t,
        ages=grid.x,
        valid=full_valid,
        tangents=full_V,
        curvature_vectors=full_CV,
        normals=full_n,
        normal_curvatures=full_NC,
        options=options,
    )
