"""Conventional piecewise-polynomial Galerkin BEM on uniform meshes.

Brute-force low-wavenumber oracle for the oscillation-adapted solver: the
same integral equation A (du/dn) = f is discretised with plain (phase-free)
piecewise polynomials on elements of fixed size per wavelength, reusing the
operator, quadrature and solver machinery. Expensive by design and guarded
to k <= 20 unless explicitly overridden.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import CostGuardError
from .galerkin import GalerkinSystem, QuadConfig, assemble, solve
from .geometry import IncidentWave, PolygonModel
from .hna_space import (PHASE_NONE, HnaBasisFunction, HnaSpace, SideBasis,
                        SpaceParams)
from .operators import OperatorConfig

__all__ = ["UniformBemSpace", "build_reference_space", "solve_reference",
           "COST_GUARD_KMAX"]

COST_GUARD_KMAX = 20.0


@dataclass
class UniformBemSpace:
    """Uniform piecewise-polynomial space: bookkeeping for the oracle run."""

    space: HnaSpace
    ppw_dof: float
    degree: int
    elements_per_side: tuple

    @property
    def n_elements(self) -> int:
        return sum(self.elements_per_side)


def build_reference_space(poly: PolygonModel, wave: IncidentWave,
                          ppw_dof: float, degree: int = 0) -> UniformBemSpace:
    """Uniform mesh with at least ppw_dof elements per wavelength per side."""
    if degree not in (0, 1):
        raise CostGuardError("reference space supports degree 0 or 1 only")
    lam = wave.wavelength
    side_bases = []
    counts = []
    for side in poly.sides:
        n_el = max(1, int(math.ceil(ppw_dof * side.length / lam)))
        counts.append(n_el)
        edges = np.linspace(0.0, side.length, n_el + 1)
        fns = []
        for e in range(n_el):
            for d in range(degree + 1):
                fns.append(HnaBasisFunction(side.index, PHASE_NONE,
                                            (float(edges[e]), float(edges[e + 1])),
                                            d, e, "forward", wave.k))
        side_bases.append(SideBasis(side, fns, edges.tolist()))
    params = SpaceParams(p=degree, n=1, c=0.0)
    space = HnaSpace(poly, wave, params, side_bases)
    return UniformBemSpace(space=space, ppw_dof=ppw_dof, degree=degree,
                           elements_per_side=tuple(counts))


def solve_reference(poly: PolygonModel, wave: IncidentWave,
                    cfg: Optional[OperatorConfig] = None,
                    ppw_dof: float = 20.0, degree: int = 0,
                    quad: Optional[QuadConfig] = None,
                    allow_expensive: bool = False,
                    threads: int = 1):
    """Solve A (du/dn) = f in the uniform space; returns (UniformBemSpace, system).

    The solved coefficients give the boundary normal derivative directly:
    density(side, s) = space.evaluate_density(coefficients, side, s).
    """
    if wave.k > COST_GUARD_KMAX and not allow_expensive:
        raise CostGuardError(
            f"reference solve at k = {wave.k} exceeds the cost guard "
            f"(k <= {COST_GUARD_KMAX}); pass allow_expensive=True to override")
    cfg = cfg or OperatorConfig()
    quad = quad or QuadConfig(order=10, near_layers=8)
    ref = build_reference_space(poly, wave, ppw_dof, degree)
    system = assemble(ref.space, cfg, wave, leading=None, unknown="dudn",
                      quad=quad, threads=threads)
    solve(system)
    return ref, system


def reference_density_callable(ref: UniformBemSpace, system: GalerkinSystem):
    """du/dn evaluator (side_index, s) -> complex values."""
    coeff = system.coefficients

    def evaluate(side_index, s):
        return ref.space.evaluate_density(coeff, side_index, np.atleast_1d(s))

    return evaluate
