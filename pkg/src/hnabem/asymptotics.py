"""Leading-order boundary behaviour: geometrical optics and knife-edge terms.

On an illuminated convex side the known leading-order part of the normal
derivative is twice that of the incident wave. On a nonconvex side it is
built from the canonical solution for diffraction of a plane wave by a
sound-soft knife edge,

    u_d(r, theta, alpha) = E(r, theta - alpha) - E(r, theta + alpha),

expressed in the notch-local polar frame whose angle theta is measured
anticlockwise from the edge (the downward vertical through the frame
origin). Points on the nonconvex side sit at r(s) = sqrt(s^2 + Lp^2),
theta(s) = 2 pi - arctan(s / Lp), with Lp the partner side length; this
placement is the one consistent with u_d vanishing on both faces of the
edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ClassificationError, DomainError
from .geometry import (CONVEX, NONCONVEX, IncidentWave, NcFrame, PolygonModel,
                       SideDescriptor, local_frame)
from .specfun import half_plane_E, half_plane_E_partials

__all__ = [
    "LeadingOrderTerm",
    "classify_illumination",
    "knife_edge_field",
    "knife_edge_normal_derivative",
    "leading_order",
    "build_leading_order",
]

ZERO = "zero"
CONVEX_GO = "convex_geometrical_optics"
NONCONVEX_KNIFE = "nonconvex_knife_edge"


@dataclass(frozen=True)
class LeadingOrderTerm:
    """Known leading-order term of the boundary normal derivative on one side.

    ``evaluator`` maps side-local arc length to the complex value (units of
    1/length). ``kind`` is 'zero', 'convex_geometrical_optics' or
    'nonconvex_knife_edge'.
    """

    side_index: int
    kind: str
    evaluator: Callable

    def __call__(self, s):
        return self.evaluator(np.asarray(s, dtype=float))


def classify_illumination(side: SideDescriptor, wave: IncidentWave) -> str:
    """'illuminated' when d . n < 0 on a convex side, 'shadow' otherwise.

    The grazing case d . n = 0 counts as shadow. Nonconvex sides are handled
    through the notch-local incidence angle instead and are rejected here.
    """
    if side.kind != CONVEX:
        raise ClassificationError(
            f"classify_illumination applies to convex sides only (side {side.index})")
    return "illuminated" if float(np.dot(wave.d, side.unit_normal)) < 0.0 else "shadow"


def knife_edge_field(r, theta, alpha_loc: float, k: float):
    """Canonical sound-soft knife-edge solution u_d(r, theta, alpha_loc).

    Vanishes on both faces of the edge (theta = 0 and theta -> 2 pi).
    """
    r = np.asarray(r, dtype=float)
    if r.size and not np.all(r > 0.0):
        raise DomainError("knife_edge_field requires r > 0")
    theta = np.asarray(theta, dtype=float)
    out = half_plane_E(r, theta - alpha_loc, k) - half_plane_E(r, theta + alpha_loc, k)
    return out if np.ndim(out) else complex(out)


def _theta_on_side(s, partner_length: float):
    return 2.0 * math.pi - np.arctan2(s, partner_length)


def knife_edge_normal_derivative(s, frame: NcFrame, wave: IncidentWave):
    """Normal derivative of u_d along the nonconvex side, at arc length s.

    Closed form through the chain rule in (r, theta): with the frame's
    x2-axis normal on the side,

        du_d/dn = -cos(theta) du_d/dr + (sin(theta)/r) du_d/dtheta.

    Smooth on the whole closed side since r >= partner_length > 0.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s < -1e-12) or np.any(s > frame.length + 1e-12):
        raise DomainError("arc length outside the nonconvex side")
    k = wave.k
    alpha = frame.alpha_local
    lp = frame.partner_length
    r = np.hypot(s, lp)
    theta = _theta_on_side(s, lp)
    er_m, epsi_m = half_plane_E_partials(r, theta - alpha, k)
    er_p, epsi_p = half_plane_E_partials(r, theta + alpha, k)
    du_dr = er_m - er_p
    du_dtheta = epsi_m - epsi_p
    out = -np.cos(theta) * du_dr + (np.sin(theta) / r) * du_dtheta
    return out if np.ndim(out) else complex(out)


def leading_order(side: SideDescriptor, wave: IncidentWave,
                  poly: PolygonModel) -> LeadingOrderTerm:
    """Leading-order term for one side of a validated polygon.

    Convex side: 2 ik (d . n) exp(ik x(s) . d) when illuminated, else zero.
    Nonconvex side: 2 u_inc(origin) du_d/dn in the notch frame when the local
    incidence angle lies in the closed interval [pi/2, 3 pi/2], else zero.
    """
    if side.kind == CONVEX:
        if classify_illumination(side, wave) == "shadow":
            return LeadingOrderTerm(side.index, ZERO, _zero_evaluator)
        k, d, n = wave.k, wave.d, side.unit_normal
        amp = 2.0j * k * float(np.dot(d, n))
        origin, direction = side.param_origin, side.param_dir
        phase_rate = k * float(np.dot(direction, d))
        phase0 = k * float(np.dot(origin, d))

        def go_eval(s, _amp=amp, _rate=phase_rate, _p0=phase0):
            s = np.asarray(s, dtype=float)
            return _amp * np.exp(1j * (_p0 + _rate * s))

        return LeadingOrderTerm(side.index, CONVEX_GO, go_eval)

    frame = local_frame(poly, side, wave)
    alpha = frame.alpha_local
    if not (0.5 * math.pi <= alpha <= 1.5 * math.pi):
        return LeadingOrderTerm(side.index, ZERO, _zero_evaluator)
    phase_shift = 2.0 * np.exp(1j * wave.k * float(np.dot(frame.origin, wave.d)))

    def knife_eval(s, _frame=frame, _wave=wave, _shift=phase_shift):
        return _shift * knife_edge_normal_derivative(s, _frame, _wave)

    return LeadingOrderTerm(side.index, NONCONVEX_KNIFE, knife_eval)


def build_leading_order(poly: PolygonModel, wave: IncidentWave):
    """Leading-order terms for every side, indexed like poly.sides."""
    return [leading_order(side, wave, poly) for side in poly.sides]


def _zero_evaluator(s):
    s = np.asarray(s, dtype=float)
    return np.zeros(s.shape, dtype=complex) if s.ndim else 0.0j
