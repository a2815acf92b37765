"""Choquard-Pekar minimizer on a uniform radial grid.

The functional is ``E(phi) = ||grad phi||^2 - D(|phi|^2, |phi|^2)`` with
``D(f, g) = int int f(x) g(y) / |x - y|`` (no 1/2 prefactor), minimized over
``||phi|| = 1``.  Its first variation in the direction ``v`` is

    dE = 2 < -Lap phi - 2 W[phi^2] phi , v >,     W[rho] = rho * 1/|x| ,

so the constrained minimizer solves ``-Lap phi - 2 W phi = mu phi``.  The
factor 2 in front of W comes from D being quadratic in rho = phi^2.

Everything is discretized in ``u = r phi`` on the nodes ``r_i = i h``,
i = 1..N-1, with u = 0 at r = 0 and at r = r_max:

    T = 4 pi sum_{i=0}^{N-1} (u_{i+1} - u_i)^2 / h
    W_i = 4 pi [ (1/r_i) sum_{j<=i} h u_j^2 + sum_{j>i} h u_j^2 / r_j ]
    V = 4 pi h sum_i u_i^2 W_i

The discrete V is the quadratic form of the symmetric kernel 1/max(r_i, r_j),
so the gradient of the discrete energy is exactly the discrete EL operator,
and rescaling the grid together with the profile scales T and V exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .errors import InvalidParameter, NoConvergence, SignFlip, UnnormalizedInput

__all__ = [
    "RadialProfile",
    "PekarResult",
    "radial_profile",
    "gaussian_profile",
    "hartree_potential",
    "pekar_energy",
    "pekar_gradient",
    "el_residual",
    "minimize_pekar",
    "save_profile",
    "load_profile",
]

FOUR_PI = 4.0 * np.pi


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """Values of a radial function on ``r_i = i * step`` (i = 1..N-1)."""

    radii: np.ndarray
    values: np.ndarray
    step: float
    r_max: float

    @property
    def weights(self):
        """Quadrature weights for ``int 4 pi r^2 f(r) dr``."""
        return FOUR_PI * self.radii**2 * self.step

    @property
    def u(self):
        return self.radii * self.values

    def norm2(self):
        return float(FOUR_PI * self.step * np.sum(self.u**2))

    def with_values(self, values):
        return RadialProfile(self.radii, np.asarray(values, dtype=float), self.step, self.r_max)

    def _spline(self):
        sp = self.__dict__.get("_sp")
        if sp is None:
            # even extension through r = 0: phi is smooth and even in r
            r = np.concatenate([-self.radii[::-1], self.radii, [self.r_max]])
            v = np.concatenate([self.values[::-1], self.values, [0.0]])
            sp = CubicSpline(r, v, bc_type="not-a-knot")
            object.__setattr__(self, "_sp", sp)
        return sp

    def __call__(self, r):
        """Interpolated profile, zero beyond ``r_max``."""
        r = np.abs(np.asarray(r, dtype=float))
        out = self._spline()(np.minimum(r, self.r_max))
        return np.where(r >= self.r_max, 0.0, out)


def radial_profile(r_max=40.0, nodes=4000, func=None):
    """Uniform radial grid with ``nodes`` intervals on (0, r_max]."""
    if nodes < 4 or not r_max > 0:
        raise InvalidParameter("need nodes >= 4 and r_max > 0")
    h = r_max / nodes
    r = h * np.arange(1, nodes)
    vals = np.zeros_like(r) if func is None else np.asarray(func(r), dtype=float)
    return RadialProfile(r, vals, h, float(r_max))


def gaussian_profile(width, r_max=40.0, nodes=4000):
    """Normalized Gaussian ``(pi s^2)^{-3/4} exp(-r^2/(2 s^2))`` sampled on the grid."""
    s = float(width)
    return radial_profile(r_max, nodes, lambda r: (np.pi * s * s) ** -0.75 * np.exp(-(r * r) / (2 * s * s)))


def hartree_potential(radii, rho, weights=None):
    """Potential ``W = rho * 1/|x|`` of a radial density given at ``radii``.

    ``weights`` are quadrature weights for ``int dr`` (trapezoid by default).
    Charge outside the last node is taken to be zero, so W falls off as the
    exact monopole ``Q/r`` beyond the support.
    """
    r = np.asarray(radii, dtype=float)
    rho = np.asarray(rho, dtype=float)
    if weights is None:
        h = np.diff(r)
        weights = np.zeros_like(r)
        weights[:-1] += 0.5 * h
        weights[1:] += 0.5 * h
    inner = np.cumsum(weights * r * r * rho)
    outer = np.cumsum((weights * r * rho)[::-1])[::-1]
    outer = np.concatenate([outer[1:], [0.0]])
    return FOUR_PI * (inner / r + outer)


def _terms(u, h, r):
    ext = np.concatenate([[0.0], u, [0.0]])
    T = FOUR_PI * np.sum(np.diff(ext) ** 2) / h
    W = hartree_potential(r, u * u / (r * r), np.full_like(r, h))
    V = FOUR_PI * h * np.sum(u * u * W)
    return T, V, W


def pekar_energy(profile):
    """Kinetic ``T``, Coulomb self-energy ``V`` and ``E = T - V`` of a normalized profile."""
    n2 = profile.norm2()
    if abs(n2 - 1.0) > 1e-8:
        raise UnnormalizedInput(f"profile norm^2 = {n2:.12g}, expected 1")
    T, V, _ = _terms(profile.u, profile.step, profile.radii)
    return {"T": float(T), "V": float(V), "E": float(T - V)}


def pekar_gradient(profile):
    """Gradient of the unconstrained discrete ``T - V`` with respect to the nodal ``u``."""
    u, h, r = profile.u, profile.step, profile.radii
    _, _, W = _terms(u, h, r)
    return FOUR_PI * 2.0 * h * (_neg_lap(u, h) - 2.0 * W * u)


def pekar_functional(profile):
    """Unconstrained discrete ``T - V`` (no normalization check)."""
    T, V, _ = _terms(profile.u, profile.step, profile.radii)
    return float(T - V)


def _neg_lap(u, h):
    ext = np.concatenate([[0.0], u, [0.0]])
    return (2 * ext[1:-1] - ext[:-2] - ext[2:]) / (h * h)


def el_residual(profile):
    """``(mu, sup|-Lap phi - 2 W phi - mu phi|)`` for a normalized profile."""
    u, h, r = profile.u, profile.step, profile.radii
    _, _, W = _terms(u, h, r)
    Hu = _neg_lap(u, h) - 2.0 * W * u
    mu = float(np.dot(u, Hu) / np.dot(u, u))
    return mu, float(np.max(np.abs((Hu - mu * u) / r)))


@dataclass(frozen=True, eq=False)
class PekarResult:
    profile: RadialProfile
    kinetic: float
    potential: float
    energy: float
    mu: float
    residual: float
    iterations: int = 0
    energy_history: tuple = field(default=(), repr=False)

    @property
    def virial_defect(self):
        return abs(self.potential - 2 * self.kinetic) / self.kinetic


def _normalize(u, h):
    return u / np.sqrt(FOUR_PI * h * np.dot(u, u))


def minimize_pekar(r_max=40.0, nodes=4000, init_width=3.0, tol=1e-8, max_iterations=20000, step=2.0):
    """Normalized gradient flow with the frozen-potential operator treated implicitly.

    Each step solves ``(1 + tau (-Lap - 2 W[u_n])) u* = u_n`` and renormalizes,
    so a fixed point is an exact discrete EL solution.  ``tau`` is halved
    whenever the energy would increase and grows slowly otherwise.
    """
    if not init_width > 0:
        raise InvalidParameter("init_width must be > 0")
    prof = gaussian_profile(init_width, r_max, nodes)
    h, r = prof.step, prof.radii
    n = len(r)
    u = _normalize(prof.u, h)
    T, V, W = _terms(u, h, r)
    energy = T - V
    history = [energy]
    tau = float(step)
    off = np.full(n, -1.0 / (h * h))
    ab = np.zeros((3, n))
    for it in range(1, max_iterations + 1):
        Hu = _neg_lap(u, h) - 2.0 * W * u
        mu = np.dot(u, Hu) / np.dot(u, u)
        res = np.max(np.abs((Hu - mu * u) / r))
        if res <= tol:
            break
        while True:
            ab[0, 1:] = tau * off[1:]
            ab[2, :-1] = tau * off[:-1]
            ab[1] = 1.0 + tau * (2.0 / (h * h) - 2.0 * W)
            cand = solve_banded((1, 1), ab, u)
            if np.any(cand < 0) and tau > 1e-3:
                tau *= 0.5
                continue
            cand = _normalize(cand, h)
            Tc, Vc, Wc = _terms(cand, h, r)
            if Tc - Vc <= energy + 1e-15 * abs(energy) or tau < 1e-6:
                break
            tau *= 0.5
        if np.any(cand < 0):
            raise SignFlip(f"iterate lost positivity at step {it}")
        u, T, V, W = cand, Tc, Vc, Wc
        energy = T - V
        history.append(energy)
        tau_max = 0.9 / -mu if mu < 0 else np.inf
        tau = min(tau * 1.25, tau_max)
    else:
        raise NoConvergence(f"Pekar flow: EL residual {res:.3e} > {tol:.1e}", history)
    phi = u / r
    profile = prof.with_values(phi)
    return PekarResult(profile, float(T), float(V), float(T - V), float(mu), float(res), it - 1, tuple(history))


def save_profile(result, path):
    path = Path(path)
    lines = [
        f"# E={result.energy!r} T={result.kinetic!r} V={result.potential!r} "
        f"mu={result.mu!r} residual={result.residual!r}"
    ]
    lines += [f"{a:.17g},{b:.17g}" for a, b in zip(result.profile.radii, result.profile.values)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def load_profile(path):
    """Read a profile CSV back into ``(RadialProfile, header dict)``."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    head = dict(item.split("=", 1) for item in text[0].lstrip("#").split())
    data = np.loadtxt(text[1:], delimiter=",", ndmin=2)
    r, v = data[:, 0], data[:, 1]
    h = float(r[0])
    prof = RadialProfile(r, v, h, h * (len(r) + 1))
    return prof, {k: float(v) for k, v in head.items()}
