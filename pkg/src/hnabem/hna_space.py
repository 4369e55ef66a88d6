"""Oscillation-adapted hp approximation space on the polygon boundary.

The unknown on each side is expanded in piecewise polynomials carrying known
phase factors:

* convex side of length L: polynomials on a geometric mesh graded toward
  s = 0 carry exp(iks); polynomials on the mirror mesh graded toward s = L
  carry exp(-iks);
* nonconvex side of length L (arc length from the right-angled corner):
  polynomials on a mesh graded toward s = L carry exp(-iks); two families of
  single polynomials supported on the whole side carry exp(iks) and the
  corner-diffraction phase exp(ikr(s)) with r(s) = sqrt(s^2 + Lp^2).

Per element the polynomials are L2-orthonormalised (scaled Legendre), which
keeps the Galerkin matrix well conditioned. The global ordering is
deterministic: by side, then phase (plus, minus, corner), then element, then
degree. Total degrees of freedom: N = (p+1) (2 n n_c + (n+2) n_nc).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DomainError
from .geometry import CONVEX, NONCONVEX, IncidentWave, PolygonModel

__all__ = [
    "PHASE_PLUS",
    "PHASE_MINUS",
    "PHASE_CORNER",
    "PHASE_NONE",
    "GeometricMesh",
    "HnaBasisFunction",
    "SpaceParams",
    "SideBasis",
    "HnaSpace",
    "build_geometric_mesh",
    "build_space",
    "evaluate_basis",
    "dof_count",
]

PHASE_PLUS = "plus"
PHASE_MINUS = "minus"
PHASE_CORNER = "corner"
PHASE_NONE = "none"

_PHASE_ORDER = {PHASE_PLUS: 0, PHASE_MINUS: 1, PHASE_CORNER: 2, PHASE_NONE: 0}


@dataclass(frozen=True)
class GeometricMesh:
    """Geometric mesh on [0, A]: x_0 = 0, x_i = sigma^(n-i) A."""

    interval_length: float
    n: int
    sigma: float
    points: np.ndarray

    def element(self, i: int):
        return float(self.points[i]), float(self.points[i + 1])


def build_geometric_mesh(A: float, n: int, sigma: float) -> GeometricMesh:
    if n < 1:
        raise DomainError("geometric mesh needs at least one layer")
    if not (0.0 < sigma < 1.0):
        raise DomainError("grading parameter sigma must lie in (0, 1)")
    if A <= 0.0:
        raise DomainError("interval length must be positive")
    pts = np.empty(n + 1)
    pts[0] = 0.0
    for i in range(1, n + 1):
        pts[i] = sigma ** (n - i) * A
    if not np.all(np.diff(pts) > 0.0):
        raise DomainError("geometric mesh points are not strictly increasing")
    pts.setflags(write=False)
    return GeometricMesh(A, n, sigma, pts)


@dataclass(frozen=True)
class HnaBasisFunction:
    """One basis function: orthonormal polynomial on its support times a phase.

    ``direction`` records whether the amplitude it discretises is written in
    the variable s ('forward') or L - s ('reverse'); the spanned space per
    element is the same either way.
    """

    side_index: int
    phase: str
    support: tuple
    degree: int
    element_index: int
    direction: str
    k: float
    corner_offset: Optional[float] = None

    def phase_values(self, s: np.ndarray) -> np.ndarray:
        return _phase_values(self.phase, s, self.k, self.corner_offset)

    def poly_values(self, s: np.ndarray) -> np.ndarray:
        a, b = self.support
        return _scaled_legendre(s, a, b, self.degree)


def _phase_values(phase: str, s: np.ndarray, k: float, corner_offset) -> np.ndarray:
    if phase == PHASE_PLUS:
        return np.exp(1j * k * s)
    if phase == PHASE_MINUS:
        return np.exp(-1j * k * s)
    if phase == PHASE_CORNER:
        return np.exp(1j * k * np.hypot(s, corner_offset))
    return np.ones_like(s, dtype=complex)


def _phase_log_derivative(phase: str, s: np.ndarray, k: float, corner_offset):
    """d/ds log(phase), i.e. phase'(s)/phase(s)."""
    if phase == PHASE_PLUS:
        return 1j * k * np.ones_like(s)
    if phase == PHASE_MINUS:
        return -1j * k * np.ones_like(s)
    if phase == PHASE_CORNER:
        return 1j * k * s / np.hypot(s, corner_offset)
    return np.zeros_like(s)


def _legendre_all(t: np.ndarray, p: int) -> np.ndarray:
    """P_0..P_p at t, shape (len(t), p+1), by the three-term recurrence."""
    out = np.empty(t.shape + (p + 1,))
    out[..., 0] = 1.0
    if p >= 1:
        out[..., 1] = t
    for d in range(1, p):
        out[..., d + 1] = ((2 * d + 1) * t * out[..., d] - d * out[..., d - 1]) / (d + 1)
    return out


def _legendre_all_deriv(t: np.ndarray, p: int, vals: np.ndarray) -> np.ndarray:
    """P'_0..P'_p at t via (1-t^2) P'_d = d (P_{d-1} - t P_d)."""
    out = np.zeros_like(vals)
    if p >= 1:
        denom = 1.0 - t * t
        safe = np.abs(denom) > 1e-14
        for d in range(1, p + 1):
            num = d * (vals[..., d - 1] - t * vals[..., d])
            out[..., d] = np.where(safe, num / np.where(safe, denom, 1.0), 0.0)
        if not np.all(safe):
            # endpoint values P'_d(+-1) = (+-1)^(d-1) d(d+1)/2
            for d in range(1, p + 1):
                end = np.sign(t) ** (d - 1) * d * (d + 1) / 2.0
                out[..., d] = np.where(safe, out[..., d], end)
    return out


def _scaled_legendre(s: np.ndarray, a: float, b: float, degree: int) -> np.ndarray:
    t = (2.0 * s - a - b) / (b - a)
    vals = _legendre_all(t, degree)
    return math.sqrt((2 * degree + 1) / (b - a)) * vals[..., degree]


@dataclass(frozen=True)
class SpaceParams:
    """Degree, layer count and grading of the hp space.

    n defaults to 2 (p + 1); the layer condition n >= c p with c = 2 is then
    automatic. N is filled in by build_space.
    """

    p: int
    n: Optional[int] = None
    sigma: float = 0.15
    c: float = 2.0
    N: Optional[int] = field(default=None, compare=False)

    def resolved_n(self) -> int:
        return self.n if self.n is not None else 2 * (self.p + 1)

    def validate(self):
        if self.p < 0:
            raise ConfigurationError("polynomial degree p must be >= 0")
        n = self.resolved_n()
        if n < 1:
            raise ConfigurationError("layer count n must be >= 1")
        if n < self.c * self.p:
            raise ConfigurationError(
                f"layer count n = {n} violates n >= c p = {self.c * self.p}")
        if not (0.0 < self.sigma < 1.0):
            raise ConfigurationError("sigma must lie in (0, 1)")


def dof_count(p: int, n: int, n_convex: int, n_nonconvex: int) -> int:
    return (p + 1) * (2 * n * n_convex + (n + 2) * n_nonconvex)


class SideBasis:
    """Basis functions living on one side, with the side's breakpoint set."""

    def __init__(self, side, functions, breakpoints):
        self.side = side
        self.functions = tuple(functions)
        self.breakpoints = np.asarray(breakpoints, dtype=float)

    def __len__(self):
        return len(self.functions)

    def evaluate_matrix(self, s: np.ndarray, derivative: bool = False,
                        subset=None) -> np.ndarray:
        """(len(s), n_cols) matrix of basis values (or d/ds) at arc lengths s.

        With `subset` (a list of column indices) only those functions are
        evaluated; columns follow the subset order.
        """
        s = np.asarray(s, dtype=float)
        indices = range(len(self.functions)) if subset is None else list(subset)
        col_of = {fn_idx: col for col, fn_idx in enumerate(indices)}
        out = np.zeros((len(s), len(col_of)), dtype=complex)
        tol = 1e-12 * max(self.side.length, 1.0)
        groups: dict = {}
        for idx in indices:
            fn = self.functions[idx]
            groups.setdefault((fn.phase, fn.support), []).append(idx)
        for (phase, (a, b)), idxs in groups.items():
            mask = (s >= a - tol) & (s <= b + tol)
            if not np.any(mask):
                continue
            sm = s[mask]
            p_max = max(self.functions[i].degree for i in idxs)
            t = (2.0 * sm - a - b) / (b - a)
            vals = _legendre_all(t, p_max)
            fn0 = self.functions[idxs[0]]
            ph = _phase_values(phase, sm, fn0.k, fn0.corner_offset)
            if derivative:
                dvals = _legendre_all_deriv(t, p_max, vals) * (2.0 / (b - a))
                dlog = _phase_log_derivative(phase, sm, fn0.k, fn0.corner_offset)
            for i in idxs:
                d = self.functions[i].degree
                norm = math.sqrt((2 * d + 1) / (b - a))
                if derivative:
                    col = norm * (dvals[..., d] + vals[..., d] * dlog) * ph
                else:
                    col = norm * vals[..., d] * ph
                out[mask, col_of[i]] = col
        return out

    def active_indices(self, a: float, b: float):
        """Indices of functions whose support contains [a, b]."""
        tol = 1e-12 * max(self.side.length, 1.0)
        return [i for i, fn in enumerate(self.functions)
                if fn.support[0] <= a + tol and fn.support[1] >= b - tol]


class HnaSpace:
    """Ordered global basis with per-side blocks."""

    def __init__(self, poly: PolygonModel, wave: IncidentWave, params,
                 side_bases):
        self.poly = poly
        self.wave = wave
        self.params = params
        self.side_bases = tuple(side_bases)
        counts = [len(sb) for sb in self.side_bases]
        self.offsets = tuple(np.concatenate([[0], np.cumsum(counts)]).astype(int))
        self.N = int(self.offsets[-1])
        self.functions = tuple(fn for sb in self.side_bases for fn in sb.functions)

    def side_slice(self, side_index: int) -> slice:
        return slice(self.offsets[side_index], self.offsets[side_index + 1])

    def evaluate_density(self, coefficients, side_index: int, s) -> np.ndarray:
        """Sum_j c_j b_j at side-local arc lengths s."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        mat = self.side_bases[side_index].evaluate_matrix(s)
        return mat @ np.asarray(coefficients)[self.side_slice(side_index)]

    def describe(self):
        """Rows (side, phase, support_lo, support_hi, element, degree) per function."""
        rows = []
        for sb in self.side_bases:
            for fn in sb.functions:
                rows.append((fn.side_index, fn.phase, fn.support[0], fn.support[1],
                             fn.element_index, fn.degree))
        return rows


def build_space(poly: PolygonModel, wave: IncidentWave,
                params: SpaceParams) -> HnaSpace:
    """Build the hp space for a validated polygon.

    Raises ConfigurationError for inconsistent parameters. The basis count
    always equals (p+1)(2 n n_c + (n+2) n_nc).
    """
    params.validate()
    p, n, sigma = params.p, params.resolved_n(), params.sigma
    k = wave.k
    side_bases = []
    for side in poly.sides:
        fns = []
        L = side.length
        mesh = build_geometric_mesh(L, n, sigma)
        breakpoints = {0.0, L}
        if side.kind == CONVEX:
            plus_elems = [mesh.element(i) for i in range(n)]
            minus_elems = [(L - b, L - a) for (a, b) in reversed([mesh.element(i) for i in range(n)])]
            for phase, elems, direction in ((PHASE_PLUS, plus_elems, "forward"),
                                            (PHASE_MINUS, minus_elems, "reverse")):
                for e_idx, (a, b) in enumerate(elems):
                    breakpoints.update((a, b))
                    for d in range(p + 1):
                        fns.append(HnaBasisFunction(side.index, phase, (a, b), d,
                                                    e_idx, direction, k))
        elif side.kind == NONCONVEX:
            lp = poly.sides[side.partner_index].length
            for d in range(p + 1):
                fns.append(HnaBasisFunction(side.index, PHASE_PLUS, (0.0, L), d,
                                            0, "forward", k))
            minus_elems = [(L - b, L - a) for (a, b) in reversed([mesh.element(i) for i in range(n)])]
            for e_idx, (a, b) in enumerate(minus_elems):
                breakpoints.update((a, b))
                for d in range(p + 1):
                    fns.append(HnaBasisFunction(side.index, PHASE_MINUS, (a, b), d,
                                                e_idx, "reverse", k))
            for d in range(p + 1):
                fns.append(HnaBasisFunction(side.index, PHASE_CORNER, (0.0, L), d,
                                            0, "forward", k, corner_offset=lp))
        else:  # pragma: no cover
            raise ConfigurationError(f"unknown side kind {side.kind!r}")
        fns.sort(key=lambda f: (_PHASE_ORDER[f.phase], f.element_index, f.degree))
        side_bases.append(SideBasis(side, fns, sorted(breakpoints)))

    space = HnaSpace(poly, wave, params, side_bases)
    expected = dof_count(p, n, poly.n_convex, poly.n_nonconvex)
    if space.N != expected:
        raise ConfigurationError(
            f"basis enumeration yielded {space.N} functions, expected {expected}")
    object.__setattr__(params, "N", space.N)
    return space


def evaluate_basis(fn: HnaBasisFunction, s) -> np.ndarray:
    """Value of one basis function at arc length(s) s (0 outside support)."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    a, b = fn.support
    tol = 1e-12 * max(b - a, 1.0)
    mask = (s_arr >= a - tol) & (s_arr <= b + tol)
    out = np.zeros(s_arr.shape, dtype=complex)
    if np.any(mask):
        sm = s_arr[mask]
        out[mask] = fn.poly_values(sm) * fn.phase_values(sm)
    return out if np.asarray(s).ndim else complex(out[0])
