"""Energies of charge-conjugation symmetric rank-2 trial states.

The state is ``P = P0_- + |psi+><psi+| - |psi-><psi-|`` with ``psi- = C psi+``.
Its density vanishes pointwise, so only the kinetic and exchange terms survive:

    E = 2 <|D0| psi+, psi+>  -  (alpha/2) int int |Q(x, y)|^2 / |x - y|

and for a conjugate pair the exchange integral collapses to two Coulomb forms,

    int int |Q|^2 / |x - y| = 2 ( D(|psi+|^2, |psi-|^2) - Re D(n, n) ),   n = psi+^* psi- .

``exchange_oracle`` evaluates the left side by brute force on small grids.
The Coulomb forms use the free-space (aperiodic) lattice kernel of
``spinors.coulomb_energy(kernel='free')``: the trial densities are charged, and
the periodic k = 0-free form would carry a box-size dependent offset.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import spinors as sp
from .errors import GridMismatch, InvalidParameter, ResolutionInsufficient, TooLargeGrid
from .momentum import dispersion_diagnostics

__all__ = [
    "TrialState",
    "EnergyBreakdown",
    "ScanResult",
    "SweepRow",
    "lambda_star",
    "auto_box",
    "build_trial_state",
    "random_trial_state",
    "rank2_energy",
    "exchange_oracle",
    "state_density",
    "kato_floor",
    "default_lambdas",
    "lambda_scan",
    "alpha_sweep",
    "scan_records",
    "sweep_csv",
]

KERNEL = "free"
# Pekar-unit radius kept inside the box: the minimizer has dropped by ~1e-4
# relative to its centre value there.
DEFAULT_BOX_FACTOR = 40.0


@dataclass(frozen=True, eq=False)
class TrialState:
    psi_plus: sp.SpinorField
    psi_minus: sp.SpinorField
    lam: float
    norms_log: dict = field(default_factory=dict)

    @property
    def grid(self):
        return self.psi_plus.grid


@dataclass(frozen=True)
class EnergyBreakdown:
    kinetic: float
    exchange_hartree: float
    exchange_overlap: float
    total: float
    alpha: float
    lam: float

    @classmethod
    def from_terms(cls, kinetic, hartree, overlap, alpha, lam):
        return cls(kinetic, hartree, overlap, kinetic - alpha * (hartree - overlap), alpha, lam)

    def record(self):
        return {
            "alpha": self.alpha,
            "lambda": self.lam,
            "kinetic": self.kinetic,
            "exchange_hartree": self.exchange_hartree,
            "exchange_overlap": self.exchange_overlap,
            "total": self.total,
        }


@dataclass(frozen=True, eq=False)
class ScanResult:
    lambdas: tuple
    energies: tuple
    lambda_star: float
    two_m: float

    @property
    def best(self):
        return min(self.energies, key=lambda e: e.total)

    @property
    def totals(self):
        return np.array([e.total for e in self.energies])


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    E_min: float
    two_m: float
    slope: float | None
    reference_slope: float | None
    lambda_min: float | None = None
    lambda_star: float | None = None


def lambda_star(alpha, table):
    """Positronium length scale ``g1'(0)^2 / (alpha m)``."""
    if alpha <= 0:
        raise InvalidParameter("lambda_star needs alpha > 0")
    d = dispersion_diagnostics(table)
    return d["g1_slope_at_0"] ** 2 / (alpha * d["m"])


def auto_box(lam, factor=DEFAULT_BOX_FACTOR):
    return float(factor * lam)


def build_trial_state(profile, lam, table, points=64, box=None, box_factor=DEFAULT_BOX_FACTOR):
    """Sample ``phi_lam = lam^{-3/2} phi(|x|/lam)`` in spinor component 1 and project.

    ``psi+ = P0_+ Pi phi_lam / ||P0_+ Pi phi_lam||`` and ``psi- = C psi+``.  The box
    defaults to ``box_factor * lam`` so that the discrete problem is self-similar
    in ``x / lam``.  Momenta beyond the table cutoff are removed; if the grid
    band lies inside the cutoff this is the identity.
    """
    if not lam > 0:
        raise InvalidParameter("lambda must be > 0")
    grid = sp.CartesianGrid(points, auto_box(lam, box_factor) if box is None else float(box))
    x, y, z = grid.positions()
    r = np.sqrt(x * x + y * y + z * z)
    phi = lam**-1.5 * profile(r / lam)
    field0 = sp.from_components(grid, [phi])
    cut = sp.apply_cutoff(field0.momentum(), table.cutoff, strict=False)
    n_cut = sp.norm(cut)
    if n_cut**2 < 0.99:
        raise ResolutionInsufficient(
            f"||Pi phi_lambda||^2 = {n_cut**2:.4f} < 0.99; enlarge the box or refine the grid"
        )
    plus = sp.apply_free_projector(cut, table, "+")
    n_plus = sp.norm(plus)
    psi_plus = (1.0 / n_plus) * plus.position()
    psi_minus = sp.charge_conjugate(psi_plus)
    return TrialState(psi_plus, psi_minus, float(lam), {"cutoff_norm": n_cut, "plus_norm": n_plus / n_cut})


def random_trial_state(grid, table, rng):
    """Random normalized ``psi+`` in the positive band of ``table`` and its conjugate."""
    n = grid.points
    data = rng.standard_normal((4, n, n, n)) + 1j * rng.standard_normal((4, n, n, n))
    psi = sp.SpinorField(grid, sp.POSITION, data)
    plus = sp.apply_free_projector(sp.apply_cutoff(psi, table.cutoff, strict=False), table, "+")
    psi_plus = (1.0 / sp.norm(plus)) * plus.position()
    return TrialState(psi_plus, sp.charge_conjugate(psi_plus), float("nan"))


def state_density(state):
    """``|psi+(x)|^2 - |psi-(x)|^2``."""
    a = sp.density(state.psi_plus).data
    b = sp.density(state.psi_minus).data
    return sp.DensityField(state.grid, a - b)


def rank2_energy(state, table, alpha):
    """Kinetic and exchange terms of the trial state through the pair identity."""
    if state.psi_plus.grid != state.psi_minus.grid:
        raise GridMismatch("psi+ and psi- live on different grids")
    plus = state.psi_plus.position()
    minus = state.psi_minus.position()
    kinetic = 2.0 * sp.inner(plus.momentum(), sp.apply_abs_D0(plus.momentum(), table)).real
    rho_p = sp.density(plus)
    rho_m = sp.density(minus)
    hartree = sp.coulomb_energy(rho_p, rho_m, kernel=KERNEL).real
    n = sp.pair_density(plus, minus)
    overlap = sp.coulomb_energy(n, n, kernel=KERNEL).real
    return EnergyBreakdown.from_terms(float(kinetic), float(hartree), float(overlap), float(alpha), state.lam)


def exchange_oracle(state, max_points=12, with_minus=True):
    """Direct ``sum_{x,y} h^6 Tr|Q(x, y)|^2 K(x - y)``, O(N^6).

    ``K`` is the same lattice kernel as the FFT route (``1/|x - y|`` off the
    diagonal, a corrected self term on it).  ``with_minus=False`` drops psi-
    (rank-one Q), for tests.
    """
    grid = state.grid
    n = grid.points
    if n > max_points:
        raise TooLargeGrid(f"oracle limited to N <= {max_points}, got {n}")
    a = state.psi_plus.position().data.reshape(4, -1)
    b = state.psi_minus.position().data.reshape(4, -1)
    idx = np.indices((n, n, n)).reshape(3, -1)
    d = idx[:, :, None] - idx[:, None, :]
    K = sp.free_kernel(grid)(d[0], d[1], d[2])
    acc = np.zeros(K.shape)
    for i in range(4):
        for j in range(4):
            q = np.outer(a[i], np.conj(a[j]))
            if with_minus:
                q -= np.outer(b[i], np.conj(b[j]))
            acc += np.abs(q) ** 2
    return float(np.sum(acc * K) * grid.cell_volume**2)


def kato_floor(state, table, alpha):
    """Crude lower bound ``2m - alpha pi <|grad| psi+, psi+>``."""
    m = table.mass
    pk = state.psi_plus.momentum()
    k = pk.grid.kmag()
    grad = float(np.sum(k * np.sum(np.abs(pk.data) ** 2, axis=0)) * pk.measure)
    return 2.0 * m - alpha * (np.pi / 2.0) * grad * 2.0


def default_lambdas(lam_star, points=21, span=(0.3, 3.0)):
    return tuple(float(v) for v in np.geomspace(span[0] * lam_star, span[1] * lam_star, points))


def _energy_at(profile, lam, table, alpha, points, box, box_factor):
    state = build_trial_state(profile, lam, table, points, box, box_factor)
    return rank2_energy(state, table, alpha)


def lambda_scan(profile, table, alpha, lambdas=None, points=64, box=None, box_factor=DEFAULT_BOX_FACTOR, refine=True):
    """Energies along ``lambdas`` (default: 21 geometric points over [0.3, 3] lambda*).

    With ``refine`` the bracket around the coarse argmin is re-sampled with
    three times the density (a 7-point geometric grid between the neighbours).
    """
    lam_s = lambda_star(alpha, table) if alpha > 0 else float("inf")
    if lambdas is None:
        if alpha <= 0:
            raise InvalidParameter("alpha = 0 needs an explicit lambda list")
        lambdas = default_lambdas(lam_s)
    lams = sorted(float(v) for v in lambdas)
    if not lams or lams[0] <= 0:
        raise InvalidParameter("lambdas must be positive")
    results = {lam: _energy_at(profile, lam, table, alpha, points, box, box_factor) for lam in lams}
    if refine and len(lams) >= 3:
        totals = [results[lam].total for lam in lams]
        i = int(np.argmin(totals))
        lo, hi = lams[max(i - 1, 0)], lams[min(i + 1, len(lams) - 1)]
        if hi > lo:
            for lam in np.geomspace(lo, hi, 7)[1:-1]:
                lam = float(lam)
                if lam not in results:
                    results[lam] = _energy_at(profile, lam, table, alpha, points, box, box_factor)
    order = sorted(results)
    return ScanResult(tuple(order), tuple(results[lam] for lam in order), lam_s, 2.0 * table.mass)


def alpha_sweep(
    alphas, table_for, pekar, points=64, box=None, box_factor=DEFAULT_BOX_FACTOR, span=(0.3, 3.0), scan_points=21
):
    """Scan each alpha and report ``slope = (E_min - 2m)/alpha^2``.

    ``table_for(alpha)`` supplies the dressed dispersion; ``pekar`` is a
    converged :class:`PekarResult`.  The reference slope is ``m E_CP / g1'(0)^2``.
    """
    rows = []
    for a in sorted(float(v) for v in alphas):
        table = table_for(a)
        d = dispersion_diagnostics(table)
        two_m = 2.0 * d["m"]
        ref = d["m"] * pekar.energy / d["g1_slope_at_0"] ** 2
        if a == 0:
            rows.append(SweepRow(a, two_m, two_m, None, ref))
            continue
        lams = default_lambdas(lambda_star(a, table), scan_points, span)
        scan = lambda_scan(pekar.profile, table, a, lams, points, box, box_factor)
        best = scan.best
        rows.append(SweepRow(a, best.total, two_m, (best.total - two_m) / a**2, ref, best.lam, scan.lambda_star))
    return rows


def scan_records(scan):
    return [e.record() for e in scan.energies]


def sweep_csv(rows):
    def fmt(v):
        return "" if v is None else repr(float(v))

    lines = ["alpha,E_min,two_m,slope,reference_slope"]
    for r in rows:
        lines.append(",".join(fmt(v) for v in (r.alpha, r.E_min, r.two_m, r.slope, r.reference_slope)))
    return "\n".join(lines) + "\n"
