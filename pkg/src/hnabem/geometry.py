"""Polygon geometry: side classification, class membership and local frames.

The solver works on simple polygons whose exterior angles are either greater
than pi ("convex" corners) or exactly pi/2 (reentrant right angles). Sides
are classified as convex (both endpoint exterior angles > pi) or nonconvex
(one endpoint exterior angle = pi/2); nonconvex sides come in adjacent pairs
sharing the right-angled corner.

Conventions fixed here and relied on everywhere else:

* vertices are stored anticlockwise, so the exterior lies to the right of
  each directed edge and the outward unit normal is the tangent rotated by
  -pi/2;
* the incident plane wave travels along d = (-sin(alpha), cos(alpha)), with
  alpha measured anticlockwise from the downwards vertical;
* each side carries its own arc-length parameter: convex sides start at the
  traversal start vertex, nonconvex sides start at the shared right-angled
  corner.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ClassificationError, DomainError, GeometryError

__all__ = [
    "RIGHT_ANGLE_TOL",
    "SideDescriptor",
    "PolygonModel",
    "IncidentWave",
    "NcFrame",
    "ValidationReport",
    "validate_class_c",
    "make_test_polygon",
    "make_square",
    "make_triangle",
    "make_l_shape",
    "arc_param",
    "local_frame",
    "find_star_center",
    "load_polygon_file",
]

RIGHT_ANGLE_TOL = 1e-9

CONVEX = "convex"
NONCONVEX = "nonconvex"


def _unit(v: np.ndarray) -> np.ndarray:
    n = float(np.hypot(v[0], v[1]))
    if n == 0.0:
        raise GeometryError("zero-length edge")
    return v / n


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SideDescriptor:
    """One oriented polygon side with its classification and local chart.

    ``exterior_angles`` are the exterior angles at (start, end) vertex of the
    traversal; ``singularity_exponents`` holds 1 - pi/omega for each endpoint
    with omega > pi and None at right-angled corners. ``param_origin`` and
    ``param_dir`` define the side-local arc-length chart
    x(s) = param_origin + s * param_dir; for convex sides the origin is the
    traversal start vertex, for nonconvex sides it is the shared right-angled
    corner.
    """

    index: int
    endpoints: tuple
    length: float
    kind: str
    exterior_angles: tuple
    unit_normal: np.ndarray
    unit_tangent: np.ndarray
    partner_index: Optional[int]
    singularity_exponents: tuple
    param_origin: np.ndarray
    param_dir: np.ndarray
    origin_is_start: bool

    def point_at(self, s):
        """Point(s) at side-local arc length s (vectorised)."""
        s = np.asarray(s, dtype=float)
        return self.param_origin[None, :] + s[..., None] * self.param_dir[None, :] \
            if s.ndim else self.param_origin + float(s) * self.param_dir


@dataclass(frozen=True)
class IncidentWave:
    """Incident plane wave exp(i k x . d), d = (-sin(alpha), cos(alpha))."""

    k: float
    alpha: float
    d: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.k <= 0.0:
            raise DomainError("wavenumber k must be positive")
        object.__setattr__(self, "alpha", float(self.alpha) % (2.0 * math.pi))
        d = _frozen([-math.sin(self.alpha), math.cos(self.alpha)])
        object.__setattr__(self, "d", d)

    @property
    def wavelength(self) -> float:
        return 2.0 * math.pi / self.k

    def field(self, points):
        """exp(i k x . d) at an (n, 2) array of points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.exp(1j * self.k * pts @ self.d)


@dataclass(frozen=True)
class NcFrame:
    """Rigid map from global coordinates to the canonical notch frame.

    x_local = rotation @ (x_global - origin). In the local frame the partner
    side runs down the negative x2-axis from the corner opposite the notch
    (the frame origin) to the right-angled corner at (0, -partner_length),
    and the nonconvex side itself lies on x2 = -partner_length with its far
    end at x1 = -length. alpha_local is the incidence angle seen in this
    frame, so the mapped wave is exp(ik(-x1 sin(a) + x2 cos(a))).
    """

    side_index: int
    partner_index: int
    origin: np.ndarray
    rotation: np.ndarray
    length: float
    partner_length: float
    alpha_local: float

    def to_local(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (pts - self.origin[None, :]) @ self.rotation.T

    def local_wave_direction(self) -> np.ndarray:
        return np.array([-math.sin(self.alpha_local), math.cos(self.alpha_local)])


class PolygonModel:
    """Simple polygon with classified sides, normalised to anticlockwise order.

    Immutable after construction; all arrays are read-only.
    """

    def __init__(self, vertices: Sequence, star_center=None):
        verts = np.array(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2 or len(verts) < 3:
            raise GeometryError("polygon needs at least 3 two-dimensional vertices")
        if len(np.unique(verts.round(decimals=12), axis=0)) != len(verts):
            raise GeometryError("polygon vertices must be distinct")
        if _signed_area(verts) < 0.0:
            verts = verts[::-1].copy()
        _check_simple(verts)
        self.vertices = _frozen(verts)
        self.n_vertices = len(verts)
        scale = float(np.max(np.abs(verts)) or 1.0)
        self._scale = scale

        angles = _exterior_angles(verts)
        for i, omega in enumerate(angles):
            if abs(omega - math.pi) < RIGHT_ANGLE_TOL:
                raise GeometryError(f"vertices {i} is collinear with its neighbours")
        self.exterior_angles = tuple(angles)

        self.sides = self._build_sides(verts, angles)
        self.perimeter = float(sum(s.length for s in self.sides))
        self.side_offsets = tuple(np.concatenate([[0.0], np.cumsum([s.length for s in self.sides])]))

        self.star_center = None
        if star_center is not None:
            c = np.asarray(star_center, dtype=float)
            m = self.star_margin(c)
            if m <= 0.0:
                raise GeometryError(f"star_center margin min (x-c).n = {m:.3e} is not positive")
            self.star_center = _frozen(c)

    # -- construction helpers ------------------------------------------------

    def _build_sides(self, verts, angles):
        n = len(verts)
        sides = []
        kinds = []
        for i in range(n):
            a, b = verts[i], verts[(i + 1) % n]
            w_start, w_end = angles[i], angles[(i + 1) % n]
            start_right = abs(w_start - 0.5 * math.pi) <= RIGHT_ANGLE_TOL
            end_right = abs(w_end - 0.5 * math.pi) <= RIGHT_ANGLE_TOL
            if start_right and end_right:
                raise GeometryError(
                    f"side {i} has right-angled corners at both ends (unsupported)")
            kinds.append(NONCONVEX if (start_right or end_right) else CONVEX)
        for i in range(n):
            a, b = verts[i], verts[(i + 1) % n]
            t = _unit(b - a)
            normal = np.array([t[1], -t[0]])  # outward for anticlockwise order
            length = float(np.hypot(*(b - a)))
            w_start, w_end = angles[i], angles[(i + 1) % n]
            start_right = abs(w_start - 0.5 * math.pi) <= RIGHT_ANGLE_TOL
            end_right = abs(w_end - 0.5 * math.pi) <= RIGHT_ANGLE_TOL
            kind = kinds[i]
            partner = None
            if kind == NONCONVEX:
                partner = (i - 1) % n if start_right else (i + 1) % n
                if kinds[partner] != NONCONVEX:
                    raise GeometryError(
                        f"right-angled corner of side {i} is not shared with a nonconvex partner")
            if kind == NONCONVEX and end_right:
                origin, direction, origin_is_start = b, -t, False
            else:
                origin, direction, origin_is_start = a, t, True
            expo = tuple(
                (1.0 - math.pi / w) if w > math.pi + RIGHT_ANGLE_TOL else None
                for w in (w_start, w_end)
            )
            sides.append(SideDescriptor(
                index=i,
                endpoints=(_frozen(a), _frozen(b)),
                length=length,
                kind=kind,
                exterior_angles=(float(w_start), float(w_end)),
                unit_normal=_frozen(normal),
                unit_tangent=_frozen(t),
                partner_index=partner,
                singularity_exponents=expo,
                param_origin=_frozen(origin),
                param_dir=_frozen(direction),
                origin_is_start=origin_is_start,
            ))
        return tuple(sides)

    # -- queries ---------------------------------------------------------------

    @property
    def n_convex(self) -> int:
        return sum(1 for s in self.sides if s.kind == CONVEX)

    @property
    def n_nonconvex(self) -> int:
        return sum(1 for s in self.sides if s.kind == NONCONVEX)

    def star_margin(self, center, samples_per_side: int = 16) -> float:
        """min over boundary samples of (x - center) . n(x)."""
        c = np.asarray(center, dtype=float)
        worst = math.inf
        for s in self.sides:
            # (x - c).n is affine in arc length: endpoint values suffice, but a
            # few interior samples guard against degenerate inputs.
            ts = np.linspace(0.0, s.length, samples_per_side)
            pts = s.point_at(ts)
            worst = min(worst, float(np.min((pts - c) @ s.unit_normal)))
        return worst

    def global_to_side(self, s_global):
        """Map global arc length (from vertex 0, along traversal) to (side index, local s)."""
        s_global = float(s_global) % self.perimeter
        idx = int(np.searchsorted(self.side_offsets, s_global, side="right") - 1)
        idx = min(idx, len(self.sides) - 1)
        side = self.sides[idx]
        along = s_global - self.side_offsets[idx]
        local = along if side.origin_is_start else side.length - along
        return idx, local

    def centroid(self) -> np.ndarray:
        return np.mean(np.asarray(self.vertices), axis=0)


# -- free functions -------------------------------------------------------


def _signed_area(verts: np.ndarray) -> float:
    x, y = verts[:, 0], verts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _exterior_angles(verts: np.ndarray):
    n = len(verts)
    out = []
    for i in range(n):
        t_in = _unit(verts[i] - verts[(i - 1) % n])
        t_out = _unit(verts[(i + 1) % n] - verts[i])
        turn = math.atan2(float(np.cross(t_in, t_out)), float(np.dot(t_in, t_out)))
        out.append(math.pi + turn)
    return out


def _segments_properly_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0))


def _check_simple(verts: np.ndarray):
    n = len(verts)
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_properly_intersect(verts[i], verts[(i + 1) % n],
                                            verts[j], verts[(j + 1) % n]):
                raise GeometryError(f"polygon is not simple: edges {i} and {j} intersect")


@dataclass
class ValidationReport:
    passed: bool
    conditions: list

    def failures(self):
        return [c for c in self.conditions if not c["passed"]]


def validate_class_c(poly: PolygonModel) -> ValidationReport:
    """Check the orthogonality and visibility conditions for the polygon.

    Condition (i): every exterior angle is > pi or equal to pi/2 within
    RIGHT_ANGLE_TOL. Condition (ii): for each right-angled corner, after
    mapping to the canonical notch frame the polygon lies inside the region
    bounded by the two nonconvex sides and their two bounding parallels,
    i.e. no vertex above the notch mouth, none beyond the far end of the
    nonconvex side, and no edge entering the open exterior quadrant.
    """
    conditions = []
    tol_len = 1e-9 * poly._scale

    bad_corners = []
    for i, omega in enumerate(poly.exterior_angles):
        if not (omega > math.pi + RIGHT_ANGLE_TOL
                or abs(omega - 0.5 * math.pi) <= RIGHT_ANGLE_TOL):
            bad_corners.append((i, omega))
    conditions.append({
        "name": "orthogonality",
        "passed": not bad_corners,
        "detail": f"corners with exterior angle neither > pi nor pi/2: {bad_corners}",
    })

    visibility_ok = True
    details = []
    if not bad_corners:
        for side in poly.sides:
            if side.kind != NONCONVEX:
                continue
            # One check per right-angled corner; the frame of either adjacent
            # side gives the same region up to the diagonal reflection, so do
            # it once from the side whose origin sits at the corner.
            frame = local_frame(poly, side, wave=None)
            local = frame.to_local(np.asarray(poly.vertices))
            l_nc, l_p = frame.length, frame.partner_length
            for j, v in enumerate(local):
                if v[1] > tol_len:
                    visibility_ok = False
                    details.append(f"corner of side {side.index}: vertex {j} above the mouth")
                if v[0] < -l_nc - tol_len:
                    visibility_ok = False
                    details.append(f"corner of side {side.index}: vertex {j} beyond far end")
            n = len(local)
            for j in range(n):
                a, b = local[j], local[(j + 1) % n]
                if _segment_enters_quadrant(a, b, l_p, tol_len):
                    visibility_ok = False
                    details.append(f"corner of side {side.index}: edge {j} crosses the notch quadrant")
    conditions.append({
        "name": "visibility",
        "passed": visibility_ok,
        "detail": "; ".join(details) or "ok",
    })

    return ValidationReport(passed=all(c["passed"] for c in conditions), conditions=conditions)


def _segment_enters_quadrant(a, b, depth, tol) -> bool:
    """Does the open segment (a, b) intersect {x1 < 0, x2 > -depth}?"""
    lo, hi = 0.0, 1.0
    dx, dy = b[0] - a[0], b[1] - a[1]
    # clip to x1 < -tol
    if abs(dx) < 1e-300:
        if a[0] >= -tol:
            return False
    else:
        t = (-tol - a[0]) / dx
        if dx < 0:
            lo = max(lo, t)
        else:
            hi = min(hi, t)
    # clip to x2 > -depth + tol
    if abs(dy) < 1e-300:
        if a[1] <= -depth + tol:
            return False
    else:
        t = (-depth + tol - a[1]) / dy
        if dy > 0:
            lo = max(lo, t)
        else:
            hi = min(hi, t)
    return lo < hi


def arc_param(side: SideDescriptor, s: float):
    """Point at arc length s from the side's parameter origin."""
    s_arr = np.asarray(s, dtype=float)
    if np.any(s_arr < -1e-12) or np.any(s_arr > side.length + 1e-12):
        raise DomainError(f"arc length outside [0, {side.length}]")
    return side.point_at(s)


def local_frame(poly: PolygonModel, nc_side: SideDescriptor,
                wave: Optional[IncidentWave] = None) -> NcFrame:
    """Rigid map taking a nonconvex side into the canonical notch frame.

    Returns the frame together with the local incidence angle (0 when no
    wave is supplied). The map is a rotation plus, when needed, a reflection,
    chosen so the partner side lies along the negative x2-axis and the side
    itself along x2 = -partner_length with its far corner at x1 = -length.
    """
    if nc_side.kind != NONCONVEX:
        raise ClassificationError(f"side {nc_side.index} is not nonconvex")
    partner = poly.sides[nc_side.partner_index]
    q = np.asarray(nc_side.param_origin)  # shared right-angled corner
    p = np.asarray(nc_side.point_at(nc_side.length))
    # partner endpoint away from the corner:
    pa, pb = partner.endpoints
    r = pb if np.allclose(pa, q) else pa
    u = _unit(q - r)         # maps to (0, -1)
    w = _unit(p - q)         # maps to (-1, 0)
    if abs(float(np.dot(u, w))) > 1e-9:
        raise GeometryError("nonconvex pair does not meet at a right angle")
    rotation = np.array([[-w[0], -w[1]], [-u[0], -u[1]]])
    alpha_local = 0.0
    if wave is not None:
        d_loc = rotation @ wave.d
        alpha_local = math.atan2(-d_loc[0], d_loc[1]) % (2.0 * math.pi)
    return NcFrame(
        side_index=nc_side.index,
        partner_index=partner.index,
        origin=_frozen(r),
        rotation=_frozen(rotation),
        length=nc_side.length,
        partner_length=partner.length,
        alpha_local=alpha_local,
    )


def find_star_center(poly: PolygonModel) -> np.ndarray:
    """Center maximising the worst-case margin min (x - c) . n over the boundary.

    Solves the small linear program max t s.t. (v - c).n_side >= t at all side
    endpoints. Raises GeometryError when the polygon is not star-like.
    """
    from scipy.optimize import linprog

    rows, rhs = [], []
    for s in poly.sides:
        n = np.asarray(s.unit_normal)
        for v in s.endpoints:
            # (v - c).n >= t  ->  n.c + t <= n.v
            rows.append([n[0], n[1], 1.0])
            rhs.append(float(np.dot(n, v)))
    res = linprog(c=[0.0, 0.0, -1.0], A_ub=np.array(rows), b_ub=np.array(rhs),
                  bounds=[(None, None)] * 3, method="highs")
    if not res.success or res.x[2] <= 0.0:
        raise GeometryError("polygon is not star-like: no valid star center exists")
    return np.array(res.x[:2])


# -- builtin polygons -------------------------------------------------------


def make_test_polygon() -> PolygonModel:
    """Nonconvex test quadrilateral: notch sides 2*pi, convex sides 4*pi.

    Vertices (0,0), (0,-2pi), (-2pi,-2pi), ((sqrt(7)-1)pi, -(1+sqrt(7))pi);
    the last vertex is the unique point making both convex sides length 4*pi.
    """
    two_pi = 2.0 * math.pi
    r7 = math.sqrt(7.0)
    verts = [
        (0.0, 0.0),
        (0.0, -two_pi),
        (-two_pi, -two_pi),
        ((r7 - 1.0) * math.pi, -(1.0 + r7) * math.pi),
    ]
    return PolygonModel(verts)


def make_square(half_width: float = 0.5, center=(0.0, 0.0)) -> PolygonModel:
    cx, cy = center
    h = float(half_width)
    verts = [(cx - h, cy - h), (cx + h, cy - h), (cx + h, cy + h), (cx - h, cy + h)]
    return PolygonModel(verts, star_center=center)


def make_triangle(side: float = 1.0) -> PolygonModel:
    h = side * math.sqrt(3.0) / 2.0
    return PolygonModel([(0.0, 0.0), (side, 0.0), (side / 2.0, h)])


def make_l_shape(size: float = 1.0) -> PolygonModel:
    """L-shaped hexagon with one right-angled reentrant corner (class member)."""
    a = float(size)
    verts = [(0, 0), (2 * a, 0), (2 * a, a), (a, a), (a, 2 * a), (0, 2 * a)]
    return PolygonModel([(x, y) for x, y in verts])


def load_polygon_file(path) -> PolygonModel:
    """Read a polygon from a plain-text file: one "x y" pair per line, '#' comments."""
    verts = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise GeometryError(f"bad polygon line: {line!r}")
            verts.append((float(parts[0]), float(parts[1])))
    return PolygonModel(verts)


BUILTIN_POLYGONS = {
    "test-quad": make_test_polygon,
    "square": make_square,
    "triangle": make_triangle,
    "l-shape": make_l_shape,
}
