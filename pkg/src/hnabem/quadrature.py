"""Quadrature rules for boundary integrals.

Three layers of machinery:

* plain Gauss-Legendre rules on an interval;
* composite rules whose panels are geometrically graded (ratio 0.15) toward
  singular endpoints and subdivided so that oscillatory integrands are
  resolved with a fixed number of points per wavelength;
* pair rules for double integrals of log-singular kernels over two panels of
  the same straight side. These substitute the gap v = |x - y|, which turns
  the diagonal singularity into the endpoint v -> 0 of the gap variable,
  where geometric grading integrates the logarithm accurately; panels that
  merely come close (positive minimal gap) use the same substitution graded
  toward the minimal gap.

Per-panel Gauss orders adapt to the acoustic size of the panel: sub-
wavelength panels fall back to order 8, full-width panels use the configured
order. All rules are deterministic functions of their parameters, and
weights are always positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError

__all__ = [
    "QuadratureRule",
    "SingularPairRule",
    "gauss_legendre",
    "composite_graded",
    "oscillation_panel_edges",
    "rule_on_panels",
    "graded_panel_edges",
    "refined_rule_toward",
    "adaptive_order",
    "singular_pair_rule",
]

GRADING_RATIO = 0.15
MIN_PANEL_ORDER = 8


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes/weights on [a, b]; exactness_degree is per-panel polynomial degree."""

    nodes: np.ndarray
    weights: np.ndarray
    exactness_degree: int
    panel_edges: np.ndarray | None = None

    def integrate(self, f):
        return np.sum(self.weights * f(self.nodes))

    def __len__(self):
        return len(self.nodes)


@lru_cache(maxsize=256)
def _leggauss(m: int):
    x, w = np.polynomial.legendre.leggauss(m)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(m: int, a: float, b: float) -> QuadratureRule:
    """m-point Gauss-Legendre rule on [a, b], exact for degree <= 2m - 1."""
    if m < 1:
        raise DomainError("gauss_legendre requires m >= 1")
    if not a < b:
        raise DomainError("gauss_legendre requires a < b")
    x, w = _leggauss(m)
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    return QuadratureRule(mid + half * x, half * w, 2 * m - 1,
                          panel_edges=np.array([a, b]))


def adaptive_order(k: float | None, width: float, order: int) -> int:
    """Gauss order resolving phase variation ~2k*width, capped at `order`."""
    if k is None or k <= 0.0 or not math.isfinite(width):
        return order
    need = int(math.ceil(k * width)) + 6
    return max(MIN_PANEL_ORDER, min(order, need))


def max_panel_width(k: float | None, ppw: float, order: int) -> float:
    """Oscillation-resolving panel width: lambda/ppw * (2m - 1)/2."""
    if k is None or k <= 0.0:
        return math.inf
    lam = 2.0 * math.pi / k
    return lam / ppw * (2.0 * order - 1.0) / 2.0


def oscillation_panel_edges(a: float, b: float, k: float | None,
                            ppw: float, order: int,
                            breakpoints=None) -> np.ndarray:
    """Panel edges on [a, b]: given breakpoints, each segment split uniformly
    to at most the oscillation-resolving width."""
    pts = {a, b}
    if breakpoints is not None:
        pts.update(float(t) for t in breakpoints if a < t < b)
    base = np.array(sorted(pts))
    h_max = max_panel_width(k, ppw, order)
    edges = [base[0]]
    for lo, hi in zip(base[:-1], base[1:]):
        width = hi - lo
        if width <= 0.0:
            continue
        n = max(1, int(math.ceil(width / h_max))) if math.isfinite(h_max) else 1
        edges.extend(lo + width * (i + 1) / n for i in range(n))
    return np.array(edges)


def rule_on_panels(panel_edges, order: int, k: float | None = None) -> QuadratureRule:
    """Composite Gauss rule; per-panel order adapts to panel width when k is given."""
    order = max(int(order), 1)
    edges = np.asarray(panel_edges, dtype=float)
    span = float(edges[-1] - edges[0])
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi - lo <= 1e-15 * span:
            continue
        m = adaptive_order(k, hi - lo, order)
        x, w = _leggauss(m)
        half = 0.5 * (hi - lo)
        nodes.append(0.5 * (lo + hi) + half * x)
        weights.append(half * w)
    return QuadratureRule(np.concatenate(nodes), np.concatenate(weights),
                          2 * order - 1, panel_edges=edges)


def graded_panel_edges(a: float, b: float, toward: float,
                       layers: int, w_min: float,
                       ratio: float = GRADING_RATIO) -> np.ndarray:
    """Edges on [a, b] graded geometrically toward the endpoint `toward`.

    Distances from the graded end follow (b-a) * ratio^j, stopping at w_min
    or after `layers` steps, whichever comes first."""
    if toward not in (a, b):
        raise DomainError("graded_panel_edges: toward must be an endpoint")
    span = b - a
    if span <= 0.0:
        raise DomainError("graded_panel_edges requires a < b")
    w_min = max(w_min, span * 1e-300)
    dists = []
    d = span * ratio
    for _ in range(max(int(layers), 1)):
        dists.append(d)
        if d <= w_min:
            break
        d *= ratio
    dists = sorted(set(t for t in dists if 0.0 < t < span))
    if toward == a:
        pts = [a] + [a + t for t in dists] + [b]
    else:
        pts = [a] + [b - t for t in reversed(dists)] + [b]
    return np.array(sorted(set(pts)))


def composite_graded(a: float, b: float, singular_ends=(),
                     k: float | None = None, ppw: float = 10.0,
                     layers: int = 12, order: int = 16) -> QuadratureRule:
    """Composite rule graded toward singular ends and resolving oscillation.

    Panels shrink geometrically (ratio 0.15) toward each end listed in
    `singular_ends` down to width min(lambda/10, (b-a)*0.15^layers); all
    remaining panels are split uniformly to the oscillation-resolving width.
    Per-panel order is max(order, 8), adapted down on sub-wavelength panels.
    """
    if not a < b:
        raise DomainError("composite_graded requires a < b")
    if k is not None and ppw < 4:
        raise DomainError("composite_graded requires ppw >= 4")
    order = max(int(order), MIN_PANEL_ORDER)
    span = b - a
    w_min = span * GRADING_RATIO ** max(int(layers), 1)
    if k is not None and k > 0.0:
        w_min = min(w_min, (2.0 * math.pi / k) / 10.0)
    breakpoints = set()
    for end in set(float(e) for e in singular_ends):
        if not (abs(end - a) <= 1e-12 * max(1.0, abs(a)) + 1e-300
                or abs(end - b) <= 1e-12 * max(1.0, abs(b)) + 1e-300):
            raise DomainError("singular_ends entries must be interval endpoints")
        toward = a if abs(end - a) <= abs(end - b) else b
        breakpoints.update(graded_panel_edges(a, b, toward, layers=10 ** 9,
                                              w_min=w_min).tolist())
    edges = oscillation_panel_edges(a, b, k, ppw, order,
                                    breakpoints=sorted(breakpoints))
    return rule_on_panels(edges, order, k=k)


def refined_rule_toward(a: float, b: float, toward: float, layers: int,
                        order: int, w_min: float,
                        k: float | None = None) -> QuadratureRule:
    """Composite Gauss rule on [a, b] graded toward one endpoint."""
    edges = graded_panel_edges(a, b, toward, layers, w_min)
    return rule_on_panels(edges, order, k=k)


@dataclass(frozen=True)
class SingularPairRule:
    """Flattened node/weight sets for a double integral over two panels.

    The double integral of f(x, y) * kernel(x, y) over panel_x x panel_y is
    approximated by sum_q ws[q] * f(xs[q], ys[q]) * kernel(xs[q], ys[q]).
    Points never coincide, so kernels with a logarithmic diagonal singularity
    are evaluable everywhere.
    """

    kind: str
    xs: np.ndarray
    ys: np.ndarray
    ws: np.ndarray


def pair_relation_1d(px, py, near_factor: float = 0.5) -> str:
    """'coincident' / 'touching' / 'near' / 'far' for two same-side intervals."""
    (ax, bx), (ay, by) = px, py
    scale = max(bx - ax, by - ay)
    if abs(ax - ay) < 1e-14 * max(1.0, abs(ax)) and abs(bx - by) < 1e-14 * max(1.0, abs(bx)):
        return "coincident"
    gap = max(ay - bx, ax - by)
    if gap <= 1e-12 * scale:
        return "touching"
    if gap <= near_factor * scale:
        return "near"
    return "far"


def _gap_rule(v_lo: float, v_hi: float, k: float | None, order: int,
              layers: int, v_floor: float, kinks=()) -> QuadratureRule:
    """Rule in the gap variable, graded toward v_lo when the pair touches.

    `kinks` lists interior gap values where the admissible x-range changes
    slope (the integrand is only C^0 there); they become panel edges.
    """
    if v_lo <= v_floor:
        edges = graded_panel_edges(v_lo, v_hi, v_lo, layers,
                                   max(v_floor, (v_hi - v_lo) * 1e-14))
    else:
        edges = graded_panel_edges(v_lo, v_hi, v_lo, max(layers // 2, 4),
                                   max(0.25 * v_lo, (v_hi - v_lo) * 1e-10))
    interior = [v for v in kinks if v_lo < v < v_hi]
    if interior:
        edges = np.unique(np.concatenate([edges, np.asarray(interior)]))
    return rule_on_panels(edges, order, k=2.0 * k if k else None)


def singular_pair_rule(panel_x, panel_y, k: float | None = None,
                       order: int = 16, layers: int = 12,
                       w_floor_rel: float = 1e-10) -> SingularPairRule:
    """Rule for a log-on-the-diagonal double integral over two collinear panels.

    Substitutes the gap v = |x - y|: coincident panels integrate the two
    triangles {y < x} and {y > x} with the v-rule graded toward v = 0;
    touching or near panels keep a single strip with v graded toward the
    minimal gap. The x-rule per gap value is a fixed-order Gauss rule on the
    admissible x-range.
    """
    ax, bx = float(panel_x[0]), float(panel_x[1])
    ay, by = float(panel_y[0]), float(panel_y[1])
    if not (ax < bx and ay < by):
        raise DomainError("singular_pair_rule requires nonempty panels")
    relation = pair_relation_1d((ax, bx), (ay, by))
    w = bx - ax
    # gap floor: relative to the panel, but never below the spacing of
    # representable arc-length values (y = x + v must differ from x).
    pos_scale = max(abs(ax), abs(bx), abs(ay), abs(by), 1e-30)
    ulp_floor = 4e-16 * pos_scale

    if relation == "coincident":
        v_floor = max(w * w_floor_rel, ulp_floor)
        v_rule = _gap_rule(0.0, w, k, order, layers, v_floor)
        v_nodes = np.maximum(v_rule.nodes, ulp_floor)
        m_x = adaptive_order(2.0 * k if k else None, w, order)
        gx, gw = _leggauss(m_x)
        xs_all, ys_all, ws_all = [], [], []
        for sign in (-1.0, 1.0):
            # y = x + sign * v; admissible x-range depends on v
            lo = ax + np.where(sign < 0, v_nodes, 0.0)
            hi = bx - np.where(sign < 0, 0.0, v_nodes)
            half = 0.5 * (hi - lo)
            mid = 0.5 * (lo + hi)
            x_nodes = mid[:, None] + half[:, None] * gx[None, :]
            wts = (v_rule.weights * half)[:, None] * gw[None, :]
            y_nodes = x_nodes + sign * v_nodes[:, None]
            keep = half > 0.0
            xs_all.append(x_nodes[keep].ravel())
            ys_all.append(y_nodes[keep].ravel())
            ws_all.append(wts[keep].ravel())
        return SingularPairRule("coincident", np.concatenate(xs_all),
                                np.concatenate(ys_all), np.concatenate(ws_all))

    if relation == "far":
        rx = gauss_legendre(adaptive_order(2.0 * k if k else None, bx - ax, order), ax, bx)
        ry = gauss_legendre(adaptive_order(2.0 * k if k else None, by - ay, order), ay, by)
        xs = np.repeat(rx.nodes, len(ry.nodes))
        ys = np.tile(ry.nodes, len(rx.nodes))
        ws = np.outer(rx.weights, ry.weights).ravel()
        return SingularPairRule("far", xs, ys, ws)

    # touching / near: one signed strip. Orient so y > x.
    flipped = ax > ay  # panel_y lies left of panel_x
    if flipped:
        ax, bx, ay, by = ay, by, ax, bx
    v_lo = max(ay - bx, 0.0)
    v_hi = by - ax
    v_floor = max(max(bx - ax, by - ay) * w_floor_rel, ulp_floor)
    v_rule = _gap_rule(max(v_lo, 0.0), v_hi, k, order, layers, v_floor,
                       kinks=(ay - ax, by - bx))
    v_nodes = np.maximum(v_rule.nodes, ulp_floor)
    m_x = adaptive_order(2.0 * k if k else None, bx - ax, order)
    gx, gw = _leggauss(m_x)
    lo = np.maximum(ax, ay - v_nodes)
    hi = np.minimum(bx, by - v_nodes)
    half = 0.5 * (hi - lo)
    mid = 0.5 * (lo + hi)
    x_nodes = mid[:, None] + half[:, None] * gx[None, :]
    wts = (v_rule.weights * half)[:, None] * gw[None, :]
    y_nodes = x_nodes + v_nodes[:, None]
    keep = half > 0.0
    xs = x_nodes[keep].ravel()
    ys = y_nodes[keep].ravel()
    ws = wts[keep].ravel()
    if flipped:
        xs, ys = ys, xs
    return SingularPairRule(relation, xs, ys, ws)
