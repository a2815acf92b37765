"""Radial momentum grids and the free / dressed Dirac dispersion.

The dressed vacuum operator is the Fourier multiplier

    D0(p) = g0(|p|) beta + g1(|p|) alpha . p/|p|,    e(p) = sqrt(g0^2 + g1^2),

fixed by the self-consistency ``D0 = D_free + (alpha/2) R[sign D0]`` where
``R[Q]`` has kernel ``Q(x, y) / |x - y|``.  For a translation-invariant Q with
multiplier Qhat(q) (convention ``fhat(p) = (2 pi)^{-3/2} int f e^{-ipx}``)
the exchange operator is the multiplier

    R[Q](p) = 1/(2 pi^2) int Qhat(q) / |p - q|^2 dq .

The constant 1/(2 pi^2) = (2 pi)^{-3} * 4 pi is checked numerically in the
test-suite against direct position-space quadrature of a rank-one kernel
(``tests/test_momentum.py::test_exchange_kernel_constant``).  Doing the angular
integrals with ``L(p, q) = log|(p + q)/(p - q)|`` gives two 1D equations

    g0(p) = 1 + alpha/(2 pi) int_0^cutoff K0(p, q) g0(q)/e(q) dq
    g1(p) = p + alpha/(2 pi) int_0^cutoff K1(p, q) g1(q)/e(q) dq

    K0 = (q/p) L,    K1 = (q/p) [ (p^2 + q^2)/(2 p q) L - 1 ],

with K0(0, q) = 2 and K1(0, q) = 0.  Both kernels have an integrable
logarithmic singularity at q = p.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import CacheMismatch, DegenerateGrid, InvalidParameter, NoConvergence

__all__ = [
    "FixedPointOptions",
    "ModelParams",
    "RadialGrid",
    "DispersionTable",
    "build_radial_grid",
    "free_dispersion",
    "dispersion_map",
    "solve_dressed_dispersion",
    "dispersion_diagnostics",
    "save_table",
    "load_table",
    "cached_dispersion",
    "exchange_multiplier_constant",
]

# (2 pi)^-3 * 4 pi: Fourier transform of 1/|x| under the unitary convention.
EXCHANGE_CONSTANT = 1.0 / (2.0 * np.pi**2)


def exchange_multiplier_constant():
    """Prefactor of ``int Qhat(q)/|p-q|^2 dq`` in the multiplier of R[Q]."""
    return EXCHANGE_CONSTANT


@dataclass(frozen=True)
class FixedPointOptions:
    tolerance: float = 1e-12
    max_iterations: int = 500
    damping: float = 1.0

    def __post_init__(self):
        if not self.tolerance > 0:
            raise InvalidParameter("tolerance must be > 0")
        if self.max_iterations < 1:
            raise InvalidParameter("max_iterations must be >= 1")
        if not 0 < self.damping <= 1:
            raise InvalidParameter("damping must lie in (0, 1]")


@dataclass(frozen=True)
class ModelParams:
    """Coupling, momentum cutoff (units of the bare mass) and radial resolution."""

    alpha: float
    cutoff: float
    radial_points: int = 1024
    fixed_point: FixedPointOptions = field(default_factory=FixedPointOptions)

    def __post_init__(self):
        if not self.alpha >= 0:
            raise InvalidParameter(f"alpha must be >= 0, got {self.alpha}")
        if not self.cutoff > 0:
            raise InvalidParameter(f"cutoff must be > 0, got {self.cutoff}")
        if self.radial_points < 2:
            raise InvalidParameter("radial_points must be >= 2")


@dataclass(frozen=True, eq=False)
class RadialGrid:
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def cutoff(self):
        return float(self.nodes[-1])

    def __len__(self):
        return len(self.nodes)


def build_radial_grid(n, cutoff, grading=2.0):
    """Nodes ``cutoff * (i/(n-1))**grading``, graded toward p = 0.

    Weights are the trapezoid weights for ``int_0^cutoff dp``.
    """
    if n < 2:
        raise InvalidParameter(f"need at least 2 nodes, got {n}")
    if not cutoff > 0:
        raise InvalidParameter(f"cutoff must be > 0, got {cutoff}")
    if not grading >= 1:
        raise InvalidParameter("grading must be >= 1")
    s = np.arange(n, dtype=float) / (n - 1)
    nodes = cutoff * s**grading
    nodes[-1] = cutoff
    h = np.diff(nodes)
    weights = np.zeros(n)
    weights[:-1] += 0.5 * h
    weights[1:] += 0.5 * h
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return RadialGrid(nodes, weights)


@dataclass(frozen=True, eq=False)
class DispersionTable:
    grid: RadialGrid
    g0: np.ndarray
    g1: np.ndarray
    residual: float
    alpha: float
    cutoff: float
    iterations: int = 0
    history: tuple = ()

    @property
    def p(self):
        return self.grid.nodes

    @property
    def e(self):
        return np.hypot(self.g0, self.g1)

    @property
    def mass(self):
        return float(self.g0[0])

    def interpolator(self):
        """Monotone cubic interpolants ``(g0, g1)`` in |p| on [0, cutoff]."""
        cached = self.__dict__.get("_interp")
        if cached is None:
            cached = (PchipInterpolator(self.p, self.g0), PchipInterpolator(self.p, self.g1))
            object.__setattr__(self, "_interp", cached)
        return cached

    def evaluate(self, k):
        """Return ``g0, g1, e`` at momenta ``|k|`` (any shape) inside the table."""
        from .errors import TableRange

        k = np.asarray(k, dtype=float)
        if k.size and k.max() > self.cutoff * (1 + 1e-12):
            raise TableRange(f"momentum {k.max():.6g} outside table range [0, {self.cutoff}]")
        f0, f1 = self.interpolator()
        g0 = f0(k)
        g1 = f1(k)
        return g0, g1, np.hypot(g0, g1)


def free_dispersion(grid):
    g0 = np.ones(len(grid))
    g1 = np.array(grid.nodes, dtype=float)
    return DispersionTable(grid, g0, g1, 0.0, 0.0, grid.cutoff, 0)


# -- kernel assembly ---------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W
_SERIES_K = np.arange(1, 10)
_SERIES_C = 1.0 / (2 * _SERIES_K - 1) + 1.0 / (2 * _SERIES_K + 1)


def _bracket(x):
    """(1 + x^2) atanh(x)/x - 1 for 0 <= x < 1, series below x = 0.05."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 0.05
    xs = x[small] ** 2
    out[small] = np.polyval(np.r_[_SERIES_C[::-1], 0.0], xs)
    xl = x[~small]
    out[~small] = (1 + xl * xl) * np.arctanh(xl) / xl - 1.0
    return out


def _kernels(p, q):
    """K0, K1 for p > 0 and q != p (broadcasting)."""
    lo = np.minimum(p, q)
    hi = np.maximum(p, q)
    x = lo / hi
    ratio = q / p
    return ratio * 2.0 * np.arctanh(x), ratio * _bracket(x)


def _log_moments(h, kmax=4):
    """int_0^h t^k log t dt for k = 0..kmax-1."""
    k = np.arange(kmax)[:, None]
    return h ** (k + 1) / (k + 1) * (np.log(h) - 1.0 / (k + 1))


def _singular_cell(p, h, side):
    """Product-integration weights of the two nodes of a cell touching q = p.

    ``side = +1``: cell [p, p + h] (p is its left node), ``-1``: [p - h, p].
    Returns arrays (2, 2): [kernel, node] with node 0 = left, 1 = right.
    """
    s = float(side)
    # hat functions as polynomials in t = |q - p|
    if side > 0:
        hats = (np.array([1.0, -1.0 / h]), np.array([0.0, 1.0 / h]))
    else:
        hats = (np.array([0.0, 1.0 / h]), np.array([1.0, -1.0 / h]))
    a_coef = (np.array([-1.0, -s / p]), np.array([-1.0, -s / p, -0.5 / p**2]))
    mom = _log_moments(h)[:, 0]
    out = np.zeros((2, 2))
    t = h * _GL_X
    q = p + s * t
    lq = np.log(q + p)
    b_vals = ((q / p) * lq, (p * p + q * q) / (2 * p * p) * lq - q / p)
    for kk in range(2):
        for node in range(2):
            poly = np.convolve(a_coef[kk], hats[node])
            log_part = float(np.dot(poly, mom[: len(poly)]))
            hat_vals = np.polyval(hats[node][::-1], t)
            smooth_part = h * float(np.dot(_GL_W, b_vals[kk] * hat_vals))
            out[kk, node] = log_part + smooth_part
    return out


def kernel_matrices(grid, chunk=64):
    """Product-integration matrices ``W0, W1`` on ``grid``.

    ``(W @ s)[i]`` approximates ``int K(p_i, q) s(q) dq`` for the piecewise
    linear interpolant of the nodal values ``s``.
    """
    p = np.asarray(grid.nodes, dtype=float)
    n = len(p)
    h = np.diff(p)
    W0 = np.zeros((n, n))
    W1 = np.zeros((n, n))
    # p = 0: K0 = 2, K1 = 0
    W0[0] = 2.0 * np.asarray(grid.weights)
    qg = p[:-1, None] + h[:, None] * _GL_X[None, :]
    wl = h[:, None] * _GL_W[None, :] * (1.0 - _GL_X)[None, :]
    wr = h[:, None] * _GL_W[None, :] * _GL_X[None, :]
    cells = np.arange(n - 1)
    for start in range(1, n, chunk):
        rows = np.arange(start, min(start + chunk, n))
        pi = p[rows][:, None, None]
        k0, k1 = _kernels(pi, qg[None])
        # drop the singular cells; they are handled separately below
        sing = (cells[None, :] == rows[:, None]) | (cells[None, :] == rows[:, None] - 1)
        k0[sing] = 0.0
        k1[sing] = 0.0
        for W, k in ((W0, k0), (W1, k1)):
            left = np.einsum("rcg,cg->rc", k, wl)
            right = np.einsum("rcg,cg->rc", k, wr)
            W[rows, :-1] += left
            W[rows, 1:] += right
    for i in range(1, n):
        for c, side in ((i - 1, -1), (i, +1)):
            if c < 0 or c >= n - 1:
                continue
            w = _singular_cell(p[i], h[c], side)
            W0[i, c : c + 2] += w[0]
            W1[i, c : c + 2] += w[1]
    return W0, W1


_KERNEL_CACHE = {}


def _cached_kernels(grid):
    key = (len(grid), float(grid.nodes[-1]), grid.nodes.tobytes())
    mats = _KERNEL_CACHE.get(key)
    if mats is None:
        if len(_KERNEL_CACHE) > 4:
            _KERNEL_CACHE.clear()
        mats = kernel_matrices(grid)
        _KERNEL_CACHE[key] = mats
    return mats


def dispersion_map(alpha, grid, g0, g1):
    """One application of the self-consistency map to nodal ``(g0, g1)``."""
    W0, W1 = _cached_kernels(grid)
    p = np.asarray(grid.nodes, dtype=float)
    e = np.hypot(g0, g1)
    c = alpha / (2.0 * np.pi)
    return 1.0 + c * (W0 @ (g0 / e)), p + c * (W1 @ (g1 / e))


def solve_dressed_dispersion(params, grid=None):
    """Damped Picard iteration for the dressed dispersion, started from the free one.

    The returned table ``g`` satisfies ``sup|map(g) - g| <= tolerance``.
    """
    if grid is None:
        grid = build_radial_grid(params.radial_points, params.cutoff)
    if params.alpha < 0:
        raise InvalidParameter("alpha must be >= 0")
    opts = params.fixed_point
    g0 = np.ones(len(grid))
    g1 = np.array(grid.nodes, dtype=float)
    history = []
    for it in range(1, opts.max_iterations + 1):
        if params.alpha == 0:
            n0, n1 = g0.copy(), g1.copy()
        else:
            n0, n1 = dispersion_map(params.alpha, grid, g0, g1)
        res = max(np.max(np.abs(n0 - g0)), np.max(np.abs(n1 - g1)))
        history.append(float(res))
        if res <= opts.tolerance:
            for a in (g0, g1):
                a.setflags(write=False)
            return DispersionTable(
                grid, g0, g1, float(res), float(params.alpha), float(params.cutoff), it, tuple(history)
            )
        d = opts.damping
        g0 = (1 - d) * g0 + d * n0
        g1 = (1 - d) * g1 + d * n1
    raise NoConvergence(
        f"dispersion fixed point: residual {history[-1]:.3e} > {opts.tolerance:.1e} "
        f"after {opts.max_iterations} iterations",
        history,
    )


def _one_sided_slope(x, f):
    # second-order forward difference on three non-uniform nodes
    h1 = x[1] - x[0]
    h2 = x[2] - x[0]
    return (h2 * h2 * (f[1] - f[0]) - h1 * h1 * (f[2] - f[0])) / (h1 * h2 * (h2 - h1))


def dispersion_diagnostics(table):
    """Mass gap and the slopes of ``g0``, ``g1`` used by the expansion."""
    p = table.p
    if len(p) < 3:
        raise DegenerateGrid("need at least 3 nodes for slope estimates")
    e = table.e
    d1 = np.gradient(table.g1, p, edge_order=2)
    return {
        "m": float(table.g0[0]),
        "m_min_e": float(e.min()),
        "argmin_e": int(np.argmin(e)),
        "g0_at_0": float(table.g0[0]),
        "g1_slope_at_0": float(_one_sided_slope(p, table.g1)),
        "g0_slope_at_0": float(_one_sided_slope(p, table.g0)),
        "sup_g1_slope_minus_1": float(np.max(np.abs(d1 - 1.0))),
    }


# -- cache -------------------------------------------------------------------


def _header(alpha, cutoff, n, tol, residual):
    return f"# alpha={alpha!r} cutoff={cutoff!r} n={n} tol={tol!r} residual={residual!r}"


def save_table(table, path, tolerance):
    """Write the CSV cache file atomically (temp file + rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [_header(table.alpha, table.cutoff, len(table.p), float(tolerance), table.residual)]
    for p, a, b in zip(table.p, table.g0, table.g1):
        lines.append(f"{p:.17g},{a:.17g},{b:.17g}")
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)
    return path


def _parse_header(line):
    if not line.startswith("#"):
        raise CacheMismatch("missing header line")
    out = {}
    for item in line[1:].split():
        key, _, val = item.partition("=")
        out[key] = val
    return out


def load_table(path, alpha=None, cutoff=None, n=None):
    """Read a cache file; reject it if ``alpha``, ``cutoff`` or ``n`` differ."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    head = _parse_header(text[0])
    a, lam, nn = float(head["alpha"]), float(head["cutoff"]), int(head["n"])
    for name, want, got in (("alpha", alpha, a), ("cutoff", cutoff, lam), ("n", n, nn)):
        if want is not None and want != got:
            raise CacheMismatch(f"cache {name}={got!r} does not match requested {want!r}")
    data = np.loadtxt(text[1:], delimiter=",", ndmin=2)
    if data.shape != (nn, 3):
        raise CacheMismatch(f"cache body has shape {data.shape}, expected ({nn}, 3)")
    p = data[:, 0]
    h = np.diff(p)
    weights = np.zeros(nn)
    weights[:-1] += 0.5 * h
    weights[1:] += 0.5 * h
    for arr in (p, weights):
        arr.setflags(write=False)
    g0, g1 = data[:, 1].copy(), data[:, 2].copy()
    return DispersionTable(RadialGrid(p, weights), g0, g1, float(head["residual"]), a, lam)


def cache_path(cache_dir, params):
    tol = params.fixed_point.tolerance
    return Path(cache_dir) / (
        f"dispersion_alpha{params.alpha!r}_cutoff{params.cutoff!r}_n{params.radial_points}_tol{tol!r}.csv"
    )


def cached_dispersion(params, cache_dir):
    """Load the table for ``params`` from ``cache_dir`` or solve and store it.

    Returns ``(table, path, reused)``.
    """
    path = cache_path(cache_dir, params)
    if path.exists():
        try:
            return load_table(path, params.alpha, params.cutoff, params.radial_points), path, True
        except CacheMismatch:
            pass
    table = solve_dressed_dispersion(params)
    save_table(table, path, params.fixed_point.tolerance)
    return table, path, False
