"""Boundary integral operators and right-hand sides.

Two formulations of the exterior sound-soft problem are supported, both
acting on the boundary normal derivative:

* standard combined potential: A = 1/2 I + D'_k - i eta S_k with
  f = du_inc/dn - i eta u_inc (default coupling eta = k);
* star-combined (for star-like polygons, coercive with explicit constant
  (1/2) min (x . n)): A = (x.n)(1/2 I + D'_k) + x . grad_Gamma S_k
  + (1/2 - ik|x|) S_k with f = x . grad u_inc + (1/2 - ik|x|) u_inc.

Kernels: S_k has the fundamental solution Phi_k(x,y) = (i/4) H0(k|x-y|);
D'_k has dPhi_k/dn(x) = -(ik/4) H1(k|x-y|) (x-y).n(x) / |x-y|, which
vanishes identically for collinear flat panels. The tangential-derivative
term of the star operator is assembled by integration by parts along each
side with the endpoint (corner) terms retained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special as _sp

from .errors import ConfigurationError, SingularityError
from .geometry import IncidentWave, PolygonModel

__all__ = [
    "OperatorConfig",
    "fundamental_solution",
    "single_layer_kernel",
    "adjoint_double_layer_kernel",
    "smooth_hankel0_remainder",
    "apply_operator_entry",
    "rhs_functional",
]

STANDARD = "standard_combined"
STAR = "star_combined"


@dataclass(frozen=True)
class OperatorConfig:
    """Choice of boundary integral formulation.

    eta = None means the default coupling eta = k. star_center is required
    for the star-combined operator and must see the whole boundary
    ((x - center) . n > 0 everywhere); coercivity_constant caches
    (1/2) min (x - center) . n when known.
    """

    kind: str = STANDARD
    eta: Optional[float] = None
    star_center: Optional[tuple] = None
    coercivity_constant: Optional[float] = None

    def resolved_eta(self, k: float) -> float:
        if self.kind != STANDARD:
            return 0.0
        eta = self.eta if self.eta is not None else k
        if eta == 0.0:
            raise ConfigurationError("standard combined operator requires eta != 0")
        return eta

    def validated_center(self, poly: PolygonModel) -> np.ndarray:
        if self.kind != STAR:
            raise ConfigurationError("star_center only applies to the star-combined operator")
        center = self.star_center
        if center is None:
            center = poly.star_center
        if center is None:
            raise ConfigurationError("star-combined operator requires a star center")
        center = np.asarray(center, dtype=float)
        margin = poly.star_margin(center)
        if margin <= 0.0:
            raise ConfigurationError(
                f"star center is invalid: min (x - c) . n = {margin:.3e} <= 0")
        return center

    def coercivity_bound(self, poly: PolygonModel) -> float:
        if self.coercivity_constant is not None:
            return self.coercivity_constant
        center = self.validated_center(poly)
        return 0.5 * poly.star_margin(center)


def fundamental_solution(x, y, k: float):
    """Phi_k(x, y) = (i/4) H0^(1)(k |x - y|), vectorised over leading axes."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = x - y
    dist = np.hypot(diff[..., 0], diff[..., 1])
    if np.any(dist == 0.0):
        raise SingularityError("fundamental_solution: coincident source and target")
    out = 0.25j * _sp.hankel1(0, k * dist)
    return out if np.ndim(out) else complex(out)


def single_layer_kernel(dist: np.ndarray, k: float) -> np.ndarray:
    """Phi_k as a function of distance (distance matrix already formed)."""
    return 0.25j * _sp.hankel1(0, k * dist)


def adjoint_double_layer_kernel(dist: np.ndarray, dot_xn: np.ndarray,
                                k: float) -> np.ndarray:
    """dPhi_k/dn(x) given |x-y| and (x-y).n(x)."""
    return -0.25j * k * _sp.hankel1(1, k * dist) * dot_xn / dist


def smooth_hankel0_remainder(z: np.ndarray) -> np.ndarray:
    """H0^(1)(z) - (2i/pi) J0(z) log(z): analytic (even) part of H0.

    Single source of truth: evaluated by subtracting the explicit logarithmic
    term from the direct H0 evaluation.
    """
    z = np.asarray(z, dtype=float)
    return _sp.hankel1(0, z) - (2j / np.pi) * _sp.j0(z) * np.log(z)


def incident_rhs(cfg: OperatorConfig, wave: IncidentWave, points: np.ndarray,
                 normal: np.ndarray, poly: PolygonModel) -> np.ndarray:
    """Right-hand side f of the chosen formulation at boundary points."""
    k, d = wave.k, wave.d
    u = wave.field(points)
    if cfg.kind == STANDARD:
        eta = cfg.resolved_eta(k)
        return (1j * k * float(np.dot(d, normal)) - 1j * eta) * u
    center = cfg.validated_center(poly)
    rel = points - center[None, :]
    return (1j * k * (rel @ d) + 0.5 - 1j * k * np.hypot(rel[:, 0], rel[:, 1])) * u


def apply_operator_entry(cfg: OperatorConfig, test_fn, trial_fn,
                         poly: PolygonModel, k: float, quad=None) -> complex:
    """Galerkin entry <A trial, test> for two basis functions.

    Convenience wrapper over the block assembler; intended for tests and
    small studies, not for production assembly.
    """
    from . import galerkin

    wave = IncidentWave(k=k, alpha=0.0)
    test_space = galerkin.adhoc_space(poly, wave, [test_fn])
    trial_space = galerkin.adhoc_space(poly, wave, [trial_fn])
    matrix, _ = galerkin.assemble_blocks(test_space, trial_space, cfg, wave,
                                         psi_evals=None, quad=quad)
    return complex(matrix[0, 0])


def rhs_functional(cfg: OperatorConfig, test_fn, wave: IncidentWave,
                   leading, poly: PolygonModel, quad=None) -> complex:
    """Galerkin right-hand-side entry (1/k) <f - A Psi, test>."""
    from . import galerkin

    test_space = galerkin.adhoc_space(poly, wave, [test_fn])
    rhs = galerkin.assemble_rhs(test_space, cfg, wave, leading, quad=quad)
    return complex(rhs[0])
