"""Special functions underlying the scattering kernels.

Provides Hankel functions of the first kind of orders 0-2 for positive real
argument, the Fresnel integral

    Fr(mu) = (e^{-i pi/4} / sqrt(pi)) * integral_mu^inf e^{i z^2} dz,

and the half-plane diffraction building block

    E(r, psi) = e^{-i k r cos(psi)} * Fr(-sqrt(2 k r) cos(psi/2)),

together with the image-sum Green's function for a right-angled quarter
plane. All functions are pure, deterministic, vectorised over numpy arrays,
and never return NaN: invalid inputs raise DomainError / SingularityError.
"""

from __future__ import annotations

import numpy as np
from scipy import special as _sp

from .errors import DomainError, SingularityError

__all__ = [
    "hankel1",
    "fresnel_fr",
    "half_plane_E",
    "quarter_plane_green",
]

# e^{-i pi/4}, used by the Fresnel <-> erfc identity and Fr'.
_EXP_MI_PI4 = complex(np.sqrt(0.5), -np.sqrt(0.5))


def hankel1(order: int, x):
    """Hankel function of the first kind H_order(x) for positive real x.

    Orders 0 and 1 are evaluated directly; order 2 uses the recurrence
    H_2(x) = (2/x) H_1(x) - H_0(x).

    Parameters
    ----------
    order : int
        One of 0, 1, 2.
    x : float or ndarray
        Strictly positive argument(s).
    """
    if order not in (0, 1, 2):
        raise DomainError(f"hankel1 order must be 0, 1 or 2, got {order!r}")
    x = np.asarray(x, dtype=float)
    if x.size and not np.all(x > 0.0):
        raise DomainError("hankel1 requires strictly positive argument")
    if order == 2:
        h0 = _sp.hankel1(0, x)
        h1 = _sp.hankel1(1, x)
        out = (2.0 / x) * h1 - h0
    else:
        out = _sp.hankel1(order, x)
    out = np.asarray(out, dtype=complex)
    if not np.all(np.isfinite(out)):
        raise DomainError("hankel1 evaluation produced non-finite values")
    return out if out.ndim else complex(out)


def fresnel_fr(mu):
    """Fresnel integral Fr(mu) = (e^{-i pi/4}/sqrt(pi)) int_mu^inf e^{iz^2} dz.

    Evaluated through the scaled complementary-error-function identity
    Fr(mu) = (1/2) erfc(e^{-i pi/4} mu), which rotates the integration
    contour onto the ray of steepest descent. The argument e^{-i pi/4} mu
    keeps |e^{-w^2}| = 1, so the evaluation is overflow-free and accurate
    for all real mu, including the asymptotic tails.
    """
    mu = np.asarray(mu, dtype=float)
    if mu.size and not np.all(np.isfinite(mu)):
        raise DomainError("fresnel_fr requires finite argument")
    out = 0.5 * _sp.erfc(_EXP_MI_PI4 * mu.astype(complex))
    return out if out.ndim else complex(out)


def fresnel_fr_derivative(mu):
    """Derivative Fr'(mu) = -(e^{-i pi/4}/sqrt(pi)) e^{i mu^2}."""
    mu = np.asarray(mu, dtype=float)
    out = -(_EXP_MI_PI4 / np.sqrt(np.pi)) * np.exp(1j * mu * mu)
    return out if out.ndim else complex(out)


def half_plane_E(r, psi, k: float):
    """Half-plane diffraction term E(r, psi) for wavenumber k.

    E(r, psi) = e^{-i k r cos(psi)} Fr(-sqrt(2 k r) cos(psi/2)).
    4*pi-periodic in psi. Requires r > 0 and k > 0.
    """
    r = np.asarray(r, dtype=float)
    if k <= 0.0:
        raise DomainError("half_plane_E requires k > 0")
    if r.size and not np.all(r > 0.0):
        raise DomainError("half_plane_E requires r > 0")
    psi = np.asarray(psi, dtype=float)
    mu = -np.sqrt(2.0 * k * r) * np.cos(0.5 * psi)
    out = np.exp(-1j * k * r * np.cos(psi)) * fresnel_fr(mu)
    return out if out.ndim else complex(out)


def half_plane_E_partials(r, psi, k: float):
    """Partial derivatives (dE/dr, dE/dpsi) of half_plane_E.

    Closed form via Fr'(mu) = -(e^{-i pi/4}/sqrt(pi)) e^{i mu^2} and
    mu^2 = k r (1 + cos psi), so that e^{-ikr cos psi} Fr'(mu) collapses to
    -(e^{-i pi/4}/sqrt(pi)) e^{ikr}:

        dE/dr   = -i k cos(psi) E - (e^{-i pi/4}/sqrt(pi)) e^{ikr} mu/(2r)
        dE/dpsi =  i k r sin(psi) E
                  - (e^{-i pi/4}/sqrt(pi)) e^{ikr} sqrt(2kr) sin(psi/2)/2
    """
    r = np.asarray(r, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if k <= 0.0:
        raise DomainError("half_plane_E_partials requires k > 0")
    if r.size and not np.all(r > 0.0):
        raise DomainError("half_plane_E_partials requires r > 0")
    e_val = half_plane_E(r, psi, k)
    root = np.sqrt(2.0 * k * r)
    mu = -root * np.cos(0.5 * psi)
    wave = (_EXP_MI_PI4 / np.sqrt(np.pi)) * np.exp(1j * k * r)
    dE_dr = -1j * k * np.cos(psi) * e_val - wave * mu / (2.0 * r)
    dE_dpsi = 1j * k * r * np.sin(psi) * e_val - wave * root * np.sin(0.5 * psi) / 2.0
    return dE_dr, dE_dpsi


def quarter_plane_green(x, y, k: float, depth: float):
    """Dirichlet Green's function of the quarter plane by the method of images.

    The quarter plane is Q = {(x1, x2) : x1 < 0, x2 > -depth}, bounded by the
    vertical face x1 = 0 and the horizontal face x2 = -depth. With Phi_k the
    free-space fundamental solution,

        G_k(x, y) = Phi_k(x,y) - Phi_k(x,y*) - Phi_k(x,y') + Phi_k(x,y*'),

    where * reflects in the horizontal face and ' reflects in the vertical
    face. G_k vanishes when either argument lies on a face of Q.
    """
    if k <= 0.0:
        raise DomainError("quarter_plane_green requires k > 0")
    if depth <= 0.0:
        raise DomainError("quarter_plane_green requires depth > 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    for pt in (x, y):
        if pt[0] > 1e-12 or pt[1] < -depth - 1e-12:
            raise DomainError("quarter_plane_green points must lie in the closed quarter plane")
    images = [
        (y, 1.0),
        (np.array([y[0], -2.0 * depth - y[1]]), -1.0),
        (np.array([-y[0], y[1]]), -1.0),
        (np.array([-y[0], -2.0 * depth - y[1]]), 1.0),
    ]
    total = 0.0 + 0.0j
    for img, sign in images:
        d = float(np.hypot(x[0] - img[0], x[1] - img[1]))
        if d == 0.0:
            raise SingularityError("quarter_plane_green: target coincides with source or an image")
        total += sign * 0.25j * hankel1(0, k * d)
    return total
