"""Dense Galerkin assembly and solve for the boundary integral equation.

The matrix entry (i, j) is <A b_j, b_i> in the L2(Gamma) inner product; the
right-hand side is (1/k) <f - A Psi, b_i> when solving for the nondimensional
remainder density, or <f, b_i> when solving for the normal derivative
directly (conventional reference runs).

Assembly is organised by side pairs. Each side carries one quadrature grid:
panels aligned with every basis breakpoint, subdivided to an
oscillation-resolving width, with fixed-order Gauss nodes per panel. For a
side pair the kernel matrix on the tensor grid is formed once and contracted
with the test/trial basis matrices (dense BLAS); panel pairs that touch or
nearly touch are excluded from that pass and re-integrated with log-aware
singular pair rules. The known leading-order term rides along as one extra
trial column so <A Psi, v> shares all machinery, including the singular
corrections.

Determinism: worker threads only distribute whole side-pair blocks; each
block is computed with a fixed internal summation order and written to a
disjoint slice, so results are bitwise identical for any worker count.
"""

from __future__ import annotations

import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import ConfigurationError, DomainError, SolverError
from .geometry import IncidentWave, PolygonModel
from .hna_space import HnaSpace, SideBasis, SpaceParams
from .operators import (STANDARD, STAR, OperatorConfig,
                        adjoint_double_layer_kernel, incident_rhs,
                        single_layer_kernel)
from .quadrature import (_leggauss, adaptive_order, graded_panel_edges,
                         oscillation_panel_edges, rule_on_panels,
                         singular_pair_rule)

__all__ = [
    "QuadConfig",
    "GalerkinSystem",
    "assemble",
    "assemble_blocks",
    "assemble_rhs",
    "solve",
    "condition_number",
    "gram_matrix",
    "adhoc_space",
    "build_side_grid",
    "dump_system",
    "load_system",
]

DUMP_MAGIC = b"HNAS"
DUMP_VERSION = 1


@dataclass(frozen=True)
class QuadConfig:
    """Quadrature controls for assembly.

    `layers` is the grading depth for singular rules and defaults to 2p + 4;
    `near_factor` controls which panel pairs get singular treatment
    (distance <= near_factor * max panel width).
    """

    ppw: float = 10.0
    order: int = 16
    layers: Optional[int] = None
    near_layers: int = 10
    near_factor: float = 0.5
    chunk_entries: int = 4_000_000

    def resolved_layers(self, p: int) -> int:
        return self.layers if self.layers is not None else 2 * p + 4

    def doubled(self) -> "QuadConfig":
        """Same panels, doubled per-panel order (self-convergence checks)."""
        return QuadConfig(ppw=self.ppw * 2, order=2 * self.order,
                          layers=None if self.layers is None else self.layers + 4,
                          near_layers=self.near_layers + 4,
                          near_factor=self.near_factor,
                          chunk_entries=self.chunk_entries)


@dataclass
class GalerkinSystem:
    """Assembled dense system plus solve results and provenance."""

    matrix: np.ndarray
    rhs: np.ndarray
    space: HnaSpace
    unknown: str
    coefficients: Optional[np.ndarray] = None
    cond2: Optional[float] = None
    metadata: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.matrix.shape[0]


class SideGrid:
    """Quadrature grid on one side, aligned with the basis breakpoints."""

    def __init__(self, side_basis: SideBasis, k: float, quad: QuadConfig):
        side = side_basis.side
        edges = oscillation_panel_edges(0.0, side.length, k, quad.ppw,
                                        quad.order, side_basis.breakpoints)
        span = side.length
        panels, s_parts, w_parts, counts = [], [], [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi - lo <= 1e-15 * span:
                continue
            # phase variation per panel is up to 2k (basis phase + kernel)
            m = adaptive_order(2.0 * k, hi - lo, quad.order)
            gx, gw = _leggauss(m)
            half = 0.5 * (hi - lo)
            panels.append((lo, hi))
            s_parts.append(0.5 * (lo + hi) + half * gx)
            w_parts.append(half * gw)
            counts.append(m)
        self.side = side
        self.panels = np.array(panels)
        self.s = np.concatenate(s_parts)
        self.w = np.concatenate(w_parts)
        offsets = np.concatenate([[0], np.cumsum(counts)]).astype(int)
        self.panel_slices = [slice(int(offsets[i]), int(offsets[i + 1]))
                             for i in range(len(panels))]
        self.pts = np.asarray(side.point_at(self.s))
        self.basis = side_basis
        self._cache: dict = {}

    @property
    def n_nodes(self) -> int:
        return len(self.s)

    def basis_matrix(self, derivative: bool = False) -> np.ndarray:
        key = ("B", derivative)
        if key not in self._cache:
            self._cache[key] = self.basis.evaluate_matrix(self.s, derivative=derivative)
        return self._cache[key]


def build_side_grid(side_basis: SideBasis, k: float, quad: QuadConfig) -> SideGrid:
    return SideGrid(side_basis, k, quad)


def adhoc_space(poly: PolygonModel, wave: IncidentWave, functions) -> HnaSpace:
    """Space holding an explicit list of basis functions (tests, entry studies)."""
    side_bases = []
    for side in poly.sides:
        fns = [f for f in functions if f.side_index == side.index]
        breakpoints = {0.0, side.length}
        for f in fns:
            breakpoints.update(f.support)
        side_bases.append(SideBasis(side, fns, sorted(breakpoints)))
    p_all = max((f.degree for f in functions), default=0)
    params = SpaceParams(p=p_all, n=1, c=0.0)
    return HnaSpace(poly, wave, params, side_bases)


# ---------------------------------------------------------------------------
# pair classification
# ---------------------------------------------------------------------------

def _point_segment_distance(p, a, b):
    """Distances from points p (n,2) to segments a->b ((m,2) each): (n,m)."""
    ab = b - a
    ap = p[:, None, :] - a[None, :, :]
    denom = np.sum(ab * ab, axis=1)
    t = np.einsum("nmk,mk->nm", ap, ab) / np.maximum(denom, 1e-300)
    t = np.clip(t, 0.0, 1.0)
    closest = a[None, :, :] + t[..., None] * ab[None, :, :]
    d = p[:, None, :] - closest
    return np.hypot(d[..., 0], d[..., 1])


def _panel_distance_matrix(gx: SideGrid, gy: SideGrid) -> np.ndarray:
    ax = np.asarray(gx.side.point_at(gx.panels[:, 0]))
    bx = np.asarray(gx.side.point_at(gx.panels[:, 1]))
    ay = np.asarray(gy.side.point_at(gy.panels[:, 0]))
    by = np.asarray(gy.side.point_at(gy.panels[:, 1]))
    d1 = _point_segment_distance(ax, ay, by)
    d2 = _point_segment_distance(bx, ay, by)
    d3 = _point_segment_distance(ay, ax, bx).T
    d4 = _point_segment_distance(by, ax, bx).T
    return np.minimum(np.minimum(d1, d2), np.minimum(d3, d4))


def _near_pairs(gx: SideGrid, gy: SideGrid, same_side: bool, near_factor: float):
    wx = gx.panels[:, 1] - gx.panels[:, 0]
    wy = gy.panels[:, 1] - gy.panels[:, 0]
    if same_side:
        gap = np.maximum(gy.panels[None, :, 0] - gx.panels[:, None, 1],
                         gx.panels[:, None, 0] - gy.panels[None, :, 1])
        dist = np.maximum(gap, 0.0)
    else:
        dist = _panel_distance_matrix(gx, gy)
    thresh = near_factor * np.maximum(wx[:, None], wy[None, :])
    return [tuple(idx) for idx in np.argwhere(dist <= thresh)]


# ---------------------------------------------------------------------------
# block assembly
# ---------------------------------------------------------------------------

def _star_coefficients(cfg, poly, side, pts, k):
    """Pointwise multipliers of the star-combined operator at test points.

    Returns (a, g, c_s): a = (x-c).n, g = (x-c).t, c_s = 1/2 - ik|x-c|.
    """
    center = cfg.validated_center(poly)
    rel = pts - center[None, :]
    a = rel @ np.asarray(side.unit_normal)
    g = rel @ np.asarray(side.unit_tangent)
    c_s = 0.5 - 1j * k * np.hypot(rel[:, 0], rel[:, 1])
    return a, g, c_s


def _left_rows_conj(cfg, poly, grid: SideGrid, k, s_nodes=None, subset=None):
    """Conjugated test-side row matrices per kernel.

    Returns dict kernel_kind -> (npts, n_test) matrix Lc such that the block
    contribution is Lc.T @ diag(w * kernel) @ T. Conjugation applies to the
    basis values only; the star multipliers a, g, c_s enter unconjugated.
    Kinds: 'combined' (standard; D' - i eta S with D' dropped on flat same
    side), 'D' and 'S' (star).
    """
    if s_nodes is None:
        B = grid.basis_matrix()
        Bd = grid.basis_matrix(derivative=True) if cfg.kind == STAR else None
        pts = grid.pts
    else:
        B = grid.basis.evaluate_matrix(s_nodes, subset=subset)
        Bd = grid.basis.evaluate_matrix(s_nodes, derivative=True, subset=subset) \
            if cfg.kind == STAR else None
        pts = np.asarray(grid.side.point_at(np.asarray(s_nodes)))
    if cfg.kind == STANDARD:
        return {"combined": B.conj()}
    a, g, c_s = _star_coefficients(cfg, poly, grid.side, pts, k)
    rows_d = a[:, None] * B.conj()
    rows_s = (c_s - 1.0)[:, None] * B.conj() - g[:, None] * Bd.conj()
    return {"D": rows_d, "S": rows_s}


def _pair_block(test_grid: SideGrid, trial_grid: SideGrid, T: np.ndarray,
                cfg: OperatorConfig, k: float, psi_eval, quad: QuadConfig,
                poly: PolygonModel, layers: int) -> np.ndarray:
    """Dense block <A t_j, v_i> for one (test side, trial side) pair.

    T holds trial basis values on the trial grid, plus the leading-order
    column when psi_eval is not None.
    """
    same_side = test_grid.side.index == trial_grid.side.index \
        and test_grid.side is trial_grid.side
    nqx, nqy = test_grid.n_nodes, trial_grid.n_nodes
    n_test = len(test_grid.basis.functions)
    n_trial = len(trial_grid.basis.functions)
    ncol = T.shape[1]
    block = np.zeros((n_test, ncol), dtype=complex)
    if ncol == 0 or n_test == 0:
        return block

    eta = cfg.resolved_eta(k) if cfg.kind == STANDARD else 0.0
    left = _left_rows_conj(cfg, poly, test_grid, k)
    near = _near_pairs(test_grid, trial_grid, same_side, quad.near_factor)

    # --- far pass: tensor kernel with near panel pairs masked out ----------
    Twy = T * trial_grid.w[:, None]
    chunk = max(1, quad.chunk_entries // max(nqy, 1))
    normal_x = np.asarray(test_grid.side.unit_normal)
    dot_x_full = test_grid.pts @ normal_x
    dot_y_full = trial_grid.pts @ normal_x
    for lo in range(0, nqx, chunk):
        hi = min(lo + chunk, nqx)
        if same_side:
            dist = np.abs(test_grid.s[lo:hi, None] - trial_grid.s[None, :])
        else:
            dx = test_grid.pts[lo:hi, 0][:, None] - trial_grid.pts[None, :, 0]
            dy = test_grid.pts[lo:hi, 1][:, None] - trial_grid.pts[None, :, 1]
            dist = np.hypot(dx, dy)
        mask = np.zeros(dist.shape, dtype=bool)
        for (pi, pj) in near:
            sx = test_grid.panel_slices[pi]
            if sx.stop <= lo or sx.start >= hi:
                continue
            mask[max(sx.start - lo, 0):min(sx.stop - lo, hi - lo),
                 trial_grid.panel_slices[pj]] = True
        np.copyto(dist, 1.0, where=mask)
        ks = single_layer_kernel(dist, k)
        kd = None
        if not same_side:
            dot = dot_x_full[lo:hi, None] - dot_y_full[None, :]
            kd = adjoint_double_layer_kernel(dist, dot, k)
        wx = test_grid.w[lo:hi, None]
        for kind, rows in left.items():
            if kind == "combined":
                kern = (-1j * eta) * ks if kd is None else kd - 1j * eta * ks
            elif kind == "D":
                if kd is None:
                    continue
                kern = kd
            else:
                kern = ks
            if np.any(mask):
                kern = np.where(mask, 0.0, kern)
            block += rows[lo:hi].T @ ((wx * kern) @ Twy)

    # --- singular corrections ----------------------------------------------
    for (pi, pj) in near:
        px = tuple(test_grid.panels[pi])
        py = tuple(trial_grid.panels[pj])
        if same_side:
            rule = singular_pair_rule(px, py, k, order=quad.order,
                                      layers=quad.near_layers)
            xs, ys, ws = rule.xs, rule.ys, rule.ws
            # guard against cancellation to exactly zero on sub-ulp gaps
            dist = np.maximum(np.abs(xs - ys), 1e-300)
            kd_vals = None
        else:
            xs, ys, ws = _cross_pair_nodes(test_grid, pi, trial_grid, pj, quad, k)
            ptx = np.asarray(test_grid.side.point_at(xs))
            pty = np.asarray(trial_grid.side.point_at(ys))
            diff = ptx - pty
            dist = np.hypot(diff[:, 0], diff[:, 1])
            keep = dist > 1e-14 * max(px[1] - px[0], py[1] - py[0])
            xs, ys, ws, dist = xs[keep], ys[keep], ws[keep], dist[keep]
            dot = diff[keep] @ normal_x
            kd_vals = adjoint_double_layer_kernel(dist, dot, k)
        ks_vals = single_layer_kernel(dist, k)
        act_x = test_grid.basis.active_indices(*px)
        act_y = trial_grid.basis.active_indices(*py)
        cols = act_y + ([n_trial] if psi_eval is not None else [])
        left_near = _left_rows_conj(cfg, poly, test_grid, k, s_nodes=xs,
                                    subset=act_x)
        Ta = _trial_values(trial_grid, ys, psi_eval, subset=act_y)
        for kind, rows in left_near.items():
            if kind == "combined":
                kern = (-1j * eta) * ks_vals if kd_vals is None \
                    else kd_vals - 1j * eta * ks_vals
            elif kind == "D":
                if kd_vals is None:
                    continue
                kern = kd_vals
            else:
                kern = ks_vals
            contrib = rows.T @ (Ta * (ws * kern)[:, None])
            block[np.ix_(act_x, cols)] += contrib

    # --- identity term (same side only) -------------------------------------
    if same_side:
        B = test_grid.basis_matrix()
        if cfg.kind == STANDARD:
            block += 0.5 * (B.conj() * test_grid.w[:, None]).T @ T
        else:
            a, _, _ = _star_coefficients(cfg, poly, test_grid.side,
                                         test_grid.pts, k)
            block += 0.5 * (B.conj() * (test_grid.w * a)[:, None]).T @ T

    # --- star corner terms from integration by parts ------------------------
    if cfg.kind == STAR:
        block += _star_endpoint_terms(test_grid, trial_grid, cfg, k, psi_eval,
                                      quad, poly, layers)
    return block


def _trial_values(trial_grid: SideGrid, s_nodes, psi_eval, subset=None):
    mat = trial_grid.basis.evaluate_matrix(np.asarray(s_nodes), subset=subset)
    if psi_eval is None:
        return mat
    psi = np.asarray(psi_eval(np.asarray(s_nodes)), dtype=complex)
    return np.hstack([mat, psi[:, None]])


def _cross_pair_nodes(test_grid: SideGrid, pi: int, trial_grid: SideGrid,
                      pj: int, quad: QuadConfig, k: float):
    """Tensor nodes for a near cross-side panel pair, graded toward the
    closest points of the two panels."""
    ax, bx = test_grid.panels[pi]
    ay, by = trial_grid.panels[pj]
    pax = np.asarray(test_grid.side.point_at(np.array([ax, bx])))
    pay = np.asarray(trial_grid.side.point_at(np.array([ay, by])))
    toward_x = ax if _seg_point_dist(pax[0], pay[0], pay[1]) <= \
        _seg_point_dist(pax[1], pay[0], pay[1]) else bx
    toward_y = ay if _seg_point_dist(pay[0], pax[0], pax[1]) <= \
        _seg_point_dist(pay[1], pax[0], pax[1]) else by
    ex = graded_panel_edges(ax, bx, toward_x, quad.near_layers, (bx - ax) * 1e-10)
    ey = graded_panel_edges(ay, by, toward_y, quad.near_layers, (by - ay) * 1e-10)
    rx = rule_on_panels(ex, quad.order, k=2.0 * k)
    ry = rule_on_panels(ey, quad.order, k=2.0 * k)
    xs = np.repeat(rx.nodes, len(ry.nodes))
    ys = np.tile(ry.nodes, len(rx.nodes))
    ws = np.outer(rx.weights, ry.weights).ravel()
    return xs, ys, ws


def _seg_point_dist(p, a, b):
    ab = b - a
    t = float(np.dot(p - a, ab) / max(float(np.dot(ab, ab)), 1e-300))
    t = min(max(t, 0.0), 1.0)
    c = a + t * ab
    return float(np.hypot(*(p - c)))


def _star_endpoint_terms(test_grid: SideGrid, trial_grid: SideGrid,
                         cfg: OperatorConfig, k: float, psi_eval,
                         quad: QuadConfig, poly: PolygonModel, layers: int):
    """Boundary terms [g conj(v) (S psi)] from the per-support integration by
    parts of the tangential-derivative operator.

    Test functions are discontinuous at their support boundaries, so every
    distinct breakpoint of the test side contributes; each test function
    picks up +/- g conj(v) S(trial) at the two ends of its own support.
    """
    fns = test_grid.basis.functions
    n_test = len(fns)
    ncol = len(trial_grid.basis.functions) + (1 if psi_eval is not None else 0)
    out = np.zeros((n_test, ncol), dtype=complex)
    center = cfg.validated_center(poly)
    side = test_grid.side
    tangent = np.asarray(side.unit_tangent)

    endpoints = sorted({float(fn.support[0]) for fn in fns}
                       | {float(fn.support[1]) for fn in fns})
    s_vec = {}
    g_val = {}
    for s_e in endpoints:
        x_e = np.asarray(side.point_at(s_e))
        g_val[s_e] = float((x_e - center) @ tangent)
        s_vec[s_e] = _single_layer_at_point(x_e, trial_grid, k, psi_eval,
                                            quad, layers)
    for i, fn in enumerate(fns):
        for s_e, sign in ((float(fn.support[0]), -1.0),
                          (float(fn.support[1]), 1.0)):
            v_e = complex(_basis_value_at(fn, s_e))
            if v_e != 0.0:
                out[i] += sign * g_val[s_e] * np.conj(v_e) * s_vec[s_e]
    return out


def _basis_value_at(fn, s: float) -> complex:
    from .hna_space import evaluate_basis

    return evaluate_basis(fn, float(s))


def _single_layer_at_point(x_point: np.ndarray, trial_grid: SideGrid, k: float,
                           psi_eval, quad: QuadConfig, layers: int):
    """Row vector int Phi(x, y) t_j(y) ds(y) over one trial side, for a point
    on or near the boundary (rule graded toward the nearest point)."""
    side = trial_grid.side
    origin = np.asarray(side.param_origin)
    direction = np.asarray(side.param_dir)
    t_star = float((x_point - origin) @ direction)
    t_star = min(max(t_star, 0.0), side.length)
    foot = origin + t_star * direction
    dist = float(np.hypot(*(x_point - foot)))
    w_min = 1e-12 * side.length
    if dist > 0.25 * side.length:
        s_nodes, s_wts = trial_grid.s, trial_grid.w
    else:
        pieces = []
        if t_star > w_min:
            pieces.append(graded_panel_edges(0.0, t_star, t_star,
                                             max(layers, 24), w_min))
        if t_star < side.length - w_min:
            pieces.append(graded_panel_edges(t_star, side.length, t_star,
                                             max(layers, 24), w_min))
        edges = np.unique(np.concatenate(pieces))
        edges = oscillation_panel_edges(0.0, side.length, k, quad.ppw,
                                        quad.order, breakpoints=edges)
        rule = rule_on_panels(edges, quad.order, k=2.0 * k)
        s_nodes, s_wts = rule.nodes, rule.weights
    pts = np.asarray(side.point_at(s_nodes))
    diff = pts - x_point[None, :]
    d = np.hypot(diff[:, 0], diff[:, 1])
    keep = d > 1e-14 * max(side.length, 1.0)
    vals = np.zeros(len(s_nodes), dtype=complex)
    vals[keep] = single_layer_kernel(d[keep], k)
    T = _trial_values(trial_grid, s_nodes, psi_eval)
    return (s_wts * vals) @ T


def assemble_blocks(test_space: HnaSpace, trial_space: HnaSpace,
                    cfg: OperatorConfig, wave: IncidentWave,
                    psi_evals=None, quad: Optional[QuadConfig] = None,
                    threads: int = 1):
    """Matrix <A t_j, v_i> plus, when psi_evals is given, the column <A Psi, v_i>."""
    quad = quad or QuadConfig()
    k = wave.k
    p_ref = max(getattr(test_space.params, "p", 0),
                getattr(trial_space.params, "p", 0))
    layers = quad.resolved_layers(p_ref)
    test_grids = [build_side_grid(sb, k, quad) for sb in test_space.side_bases]
    if trial_space is test_space:
        trial_grids = test_grids
    else:
        trial_grids = [build_side_grid(sb, k, quad) for sb in trial_space.side_bases]
    trial_T = []
    for j, grid in enumerate(trial_grids):
        psi_eval = psi_evals[j] if psi_evals is not None else None
        trial_T.append(_trial_values(grid, grid.s, psi_eval))

    matrix = np.zeros((test_space.N, trial_space.N), dtype=complex)
    psi_col = np.zeros(test_space.N, dtype=complex) if psi_evals is not None else None
    pairs = [(i, j) for i in range(len(test_grids)) for j in range(len(trial_grids))]

    def compute(pair):
        i, j = pair
        psi_eval = psi_evals[j] if psi_evals is not None else None
        return _pair_block(test_grids[i], trial_grids[j], trial_T[j], cfg, k,
                           psi_eval, quad, test_space.poly, layers)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(compute, pairs))
    else:
        results = [compute(p) for p in pairs]

    for (i, j), block in zip(pairs, results):
        rows = test_space.side_slice(i)
        cols = trial_space.side_slice(j)
        nb_j = cols.stop - cols.start
        matrix[rows, cols] = block[:, :nb_j]
        if psi_col is not None:
            psi_col[rows] += block[:, nb_j]
    return matrix, psi_col


def _f_vector(test_space: HnaSpace, cfg: OperatorConfig, wave: IncidentWave,
              quad: QuadConfig) -> np.ndarray:
    out = np.zeros(test_space.N, dtype=complex)
    for i, sb in enumerate(test_space.side_bases):
        grid = build_side_grid(sb, wave.k, quad)
        fvals = incident_rhs(cfg, wave, grid.pts, sb.side.unit_normal,
                             test_space.poly)
        B = grid.basis_matrix()
        out[test_space.side_slice(i)] = B.conj().T @ (grid.w * fvals)
    return out


def assemble_rhs(test_space: HnaSpace, cfg: OperatorConfig, wave: IncidentWave,
                 leading, quad: Optional[QuadConfig] = None) -> np.ndarray:
    """(1/k) <f - A Psi, v_i> for the given leading-order terms."""
    quad = quad or QuadConfig()
    if leading is None:
        psi_col = np.zeros(test_space.N, dtype=complex)
    else:
        empty_trial = adhoc_space(test_space.poly, wave, [])
        psi_evals = [term.evaluator for term in leading]
        _, psi_col = assemble_blocks(test_space, empty_trial, cfg, wave,
                                     psi_evals=psi_evals, quad=quad)
    fvec = _f_vector(test_space, cfg, wave, quad)
    return (fvec - psi_col) / wave.k


def assemble(space: HnaSpace, cfg: OperatorConfig, wave: IncidentWave,
             leading=None, unknown: str = "phi",
             quad: Optional[QuadConfig] = None, threads: int = 1) -> GalerkinSystem:
    """Assemble the dense Galerkin system for the chosen unknown.

    unknown='phi': remainder density, rhs = (1/k) <f - A Psi, v>.
    unknown='dudn': normal derivative directly, rhs = <f, v> (Psi unused).
    """
    if unknown not in ("phi", "dudn"):
        raise ConfigurationError(f"unknown must be 'phi' or 'dudn', got {unknown!r}")
    quad = quad or QuadConfig()
    t0 = time.perf_counter()
    psi_evals = None
    if unknown == "phi":
        if leading is not None:
            psi_evals = [term.evaluator for term in leading]
        else:
            psi_evals = [_zero_psi] * len(space.poly.sides)
    matrix, psi_col = assemble_blocks(space, space, cfg, wave,
                                      psi_evals=psi_evals, quad=quad,
                                      threads=threads)
    fvec = _f_vector(space, cfg, wave, quad)
    rhs = (fvec - psi_col) / wave.k if unknown == "phi" else fvec
    meta = {
        "quad": quad,
        "operator": cfg.kind,
        "eta": cfg.resolved_eta(wave.k) if cfg.kind == STANDARD else None,
        "assembly_seconds": time.perf_counter() - t0,
        "k": wave.k,
        "alpha": wave.alpha,
        "N": space.N,
    }
    return GalerkinSystem(matrix=matrix, rhs=rhs, space=space, unknown=unknown,
                          metadata=meta)


def _zero_psi(s):
    return np.zeros(np.shape(s), dtype=complex)


def gram_matrix(space: HnaSpace, quad: Optional[QuadConfig] = None) -> np.ndarray:
    """L2(Gamma) Gram matrix of the basis (block diagonal over sides)."""
    quad = quad or QuadConfig()
    G = np.zeros((space.N, space.N), dtype=complex)
    for i, sb in enumerate(space.side_bases):
        grid = build_side_grid(sb, space.wave.k, quad)
        B = grid.basis_matrix()
        sl = space.side_slice(i)
        G[sl, sl] = (B.conj() * grid.w[:, None]).T @ B
    return G


def solve(system: GalerkinSystem) -> np.ndarray:
    """Direct dense solve with partial pivoting plus one refinement step.

    Enforces ||M c - rhs|| <= 1e-10 ||rhs||; raises SolverError (with a
    condition estimate) otherwise.
    """
    M, rhs = system.matrix, system.rhs
    if not np.all(np.isfinite(M)) or not np.all(np.isfinite(rhs)):
        raise SolverError("system contains non-finite entries")
    try:
        lu, piv = lu_factor(M)
    except Exception as exc:
        raise SolverError(f"factorisation failed: {exc}") from exc
    x = lu_solve((lu, piv), rhs)
    x = x + lu_solve((lu, piv), rhs - M @ x)
    res_norm = float(np.linalg.norm(rhs - M @ x))
    rhs_norm = float(np.linalg.norm(rhs))
    if rhs_norm > 0.0 and res_norm > 1e-10 * rhs_norm:
        cond = condition_number(system) if system.N <= 2000 else None
        raise SolverError(
            f"residual {res_norm:.3e} exceeds 1e-10 * ||rhs|| = {1e-10 * rhs_norm:.3e}",
            cond_estimate=cond)
    system.coefficients = x
    return x


def condition_number(system_or_matrix) -> float:
    """2-norm condition number via full SVD (guarded to N <= 2000)."""
    M = system_or_matrix.matrix if isinstance(system_or_matrix, GalerkinSystem) \
        else np.asarray(system_or_matrix)
    if M.shape[0] > 2000:
        raise DomainError("condition_number via full SVD is limited to N <= 2000")
    s = np.linalg.svd(M, compute_uv=False)
    cond = float(s[0] / s[-1])
    if isinstance(system_or_matrix, GalerkinSystem):
        system_or_matrix.cond2 = cond
    return cond


def dump_system(system: GalerkinSystem, path) -> None:
    """Binary dump: 32-byte header (magic 'HNAS', version, N), then the matrix
    row-major and the rhs as little-endian complex128 pairs."""
    n = system.N
    header = struct.pack("<4sIQ", DUMP_MAGIC, DUMP_VERSION, n)
    header += b"\x00" * (32 - len(header))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(system.matrix, dtype="<c16").tobytes())
        fh.write(np.ascontiguousarray(system.rhs, dtype="<c16").tobytes())


def load_system(path):
    """Read back a dump_system file; returns (matrix, rhs)."""
    with open(path, "rb") as fh:
        header = fh.read(32)
        magic, version, n = struct.unpack("<4sIQ", header[:16])
        if magic != DUMP_MAGIC:
            raise ConfigurationError("not a system dump (bad magic)")
        if version != DUMP_VERSION:
            raise ConfigurationError(f"unsupported dump version {version}")
        data = np.frombuffer(fh.read(16 * n * n), dtype="<c16").reshape(n, n)
        rhs = np.frombuffer(fh.read(16 * n), dtype="<c16")
    return data.copy(), rhs.copy()
