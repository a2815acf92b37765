"""Finite-dimensional projector geometry.

Matrices stand in for operators on a Hilbert space split by a reference
projector ``P0`` (the "sea").  Blocks are taken relative to ``P0``:
``Q^{++} = (1 - P0) Q (1 - P0)`` and ``Q^{--} = P0 Q P0``.

An antiunitary map is stored as a unitary ``K`` with action ``v -> K conj(v)``;
conjugating a matrix gives ``C A C = K conj(A) conj(K)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import unitary_group

from .errors import ClusterAmbiguous, InvalidParameter, NotAProjector, NotCSymmetric, NotInTangentSpace, ParseError

__all__ = [
    "ProjectorMatrix",
    "AntiunitaryMap",
    "Plane",
    "StructureDecomposition",
    "TangentVector",
    "as_projector",
    "decompose_difference",
    "reconstruct",
    "canonical_log",
    "expm_antihermitian",
    "exp_chart",
    "p0_trace",
    "gradient_projection",
    "standard_conjugation",
    "standard_vacuum",
    "is_c_symmetric",
    "component_classify",
    "c_symmetric_spectrum_check",
    "random_projector",
    "random_pair",
    "forced_pair",
    "c_symmetric_instance",
    "c_symmetric_tangent",
    "save_matrix",
    "load_matrix",
]

PROJ_TOL = 1e-12
CLUSTER_TOL = 1e-8


def _h(a):
    return a.conj().T


def _hermitize(a):
    return 0.5 * (a + _h(a))


@dataclass(frozen=True, eq=False)
class ProjectorMatrix:
    entries: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.entries)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise NotAProjector("projector must be a square matrix")
        scale = max(1.0, np.linalg.norm(P, 2)) if P.size else 1.0
        tol = PROJ_TOL * P.shape[0] * scale
        if np.abs(P - _h(P)).max(initial=0) > tol or np.abs(P @ P - P).max(initial=0) > tol:
            raise NotAProjector("matrix is not a Hermitian idempotent")

    @property
    def dim(self):
        return self.entries.shape[0]

    @property
    def rank(self):
        return int(round(np.trace(self.entries).real))

    def complement(self):
        return np.eye(self.dim) - self.entries


def as_projector(P):
    return P.entries if isinstance(P, ProjectorMatrix) else ProjectorMatrix(np.asarray(P, dtype=complex)).entries


@dataclass(frozen=True, eq=False)
class AntiunitaryMap:
    matrix: np.ndarray

    def __post_init__(self):
        K = self.matrix
        n = K.shape[0]
        if np.abs(_h(K) @ K - np.eye(n)).max() > 1e-12:
            raise InvalidParameter("K must be unitary")
        if np.abs(K @ K.conj() - np.eye(n)).max() > 1e-12:
            raise InvalidParameter("C must be an involution: K conj(K) = 1")

    @property
    def dim(self):
        return self.matrix.shape[0]

    def __call__(self, v):
        return self.matrix @ np.conj(v)

    def conjugate(self, A):
        """Matrix of ``C A C``."""
        return self.matrix @ np.conj(A) @ np.conj(self.matrix)


@dataclass(frozen=True)
class Plane:
    e_plus: np.ndarray
    e_minus: np.ndarray
    theta: float

    def eigvectors(self):
        s = np.sin(self.theta)
        f_plus = np.sqrt((1 - s) / 2) * self.e_minus + np.sqrt((1 + s) / 2) * self.e_plus
        f_minus = np.sqrt((1 + s) / 2) * self.e_minus - np.sqrt((1 - s) / 2) * self.e_plus
        return f_plus, f_minus


@dataclass(frozen=True, eq=False)
class StructureDecomposition:
    dim: int
    plus_vectors: np.ndarray  # columns
    minus_vectors: np.ndarray
    planes: tuple = field(default=())

    @property
    def thetas(self):
        return np.array([p.theta for p in self.planes])

    def vectors(self):
        cols = [self.plus_vectors, self.minus_vectors]
        cols += [np.stack([p.e_plus, p.e_minus], axis=1) for p in self.planes]
        return np.concatenate(cols, axis=1) if cols else np.zeros((self.dim, 0))


@dataclass(frozen=True, eq=False)
class TangentVector:
    base: np.ndarray
    matrix: np.ndarray

    def off_diagonality(self):
        P = self.base
        R = np.eye(P.shape[0]) - P
        return max(np.abs(P @ self.matrix @ P).max(), np.abs(R @ self.matrix @ R).max())


# -- structure of P1 - P0 ----------------------------------------------------


def _clusters(w, tol):
    groups, start = [], 0
    for i in range(1, len(w) + 1):
        if i == len(w) or w[i] - w[i - 1] > tol:
            groups.append((start, i))
            start = i
    return groups


def decompose_difference(P1, P0, tol=CLUSTER_TOL):
    """Spectral structure of ``Q = P1 - P0``.

    ``plus_vectors`` span ker(Q - 1) (inside Ran P1 and ker P0), ``minus_vectors``
    span ker(Q + 1).  Every pair of eigenvalues ``+-sin(theta)`` lives in a plane
    ``span(e_plus, e_minus)`` with ``e_plus`` in ker P0 and ``e_minus`` in Ran P0.
    """
    A, B = as_projector(P1), as_projector(P0)
    if A.shape != B.shape:
        raise InvalidParameter("projectors have different dimensions")
    n = A.shape[0]
    Q = _hermitize(A - B)
    w, V = np.linalg.eigh(Q)
    t = tol * max(1.0, np.abs(w).max(initial=0))
    plus = V[:, w > 1 - t]
    minus = V[:, w < -1 + t]
    R = np.eye(n) - B
    planes = []
    mid = (w > t) & (w < 1 - t)
    idx = np.nonzero(mid)[0]
    for f, lam in zip(V[:, idx].T, w[idx]):
        ep = R @ f
        em = B @ f
        planes.append(Plane(ep / np.linalg.norm(ep), em / np.linalg.norm(em), float(np.arcsin(min(lam, 1.0)))))
    planes.sort(key=lambda p: -p.theta)
    return StructureDecomposition(n, plus, minus, tuple(planes))


def reconstruct(dec):
    n = dec.dim
    Q = np.zeros((n, n), dtype=complex)
    Q += dec.plus_vectors @ _h(dec.plus_vectors)
    Q -= dec.minus_vectors @ _h(dec.minus_vectors)
    for p in dec.planes:
        fp, fm = p.eigvectors()
        s = np.sin(p.theta)
        Q += s * (np.outer(fp, fp.conj()) - np.outer(fm, fm.conj()))
    return Q


# -- exponential chart -------------------------------------------------------


def canonical_log(P1, P2, tol=CLUSTER_TOL):
    """Anti-Hermitian ``A`` off-diagonal at ``P1`` with ``e^A P1 e^{-A} = P2``.

    Each principal plane is rotated by its angle; +-1 eigenvectors of
    ``P2 - P1`` are paired and rotated by pi/2.
    """
    dec = decompose_difference(P2, P1, tol)
    n = dec.dim
    if dec.plus_vectors.shape[1] != dec.minus_vectors.shape[1]:
        raise InvalidParameter("P1 and P2 have different ranks; no unitary conjugation exists")
    A = np.zeros((n, n), dtype=complex)
    for p in dec.planes:
        A += p.theta * (np.outer(p.e_plus, p.e_minus.conj()) - np.outer(p.e_minus, p.e_plus.conj()))
    for a, b in zip(dec.plus_vectors.T, dec.minus_vectors.T):
        A += (np.pi / 2) * (np.outer(a, b.conj()) - np.outer(b, a.conj()))
    return A


def expm_antihermitian(A):
    """``exp(A)`` for anti-Hermitian ``A`` via the eigendecomposition of ``-iA``."""
    w, V = np.linalg.eigh(_hermitize(-1j * A))
    return (V * np.exp(1j * w)) @ _h(V)


def _check_m_p(P, a, tol):
    n = P.shape[0]
    R = np.eye(n) - P
    scale = max(1.0, np.linalg.norm(a, 2))
    if np.abs(a + _h(a)).max(initial=0) > tol * scale:
        raise NotInTangentSpace("generator is not anti-Hermitian")
    if max(np.abs(P @ a @ P).max(initial=0), np.abs(R @ a @ R).max(initial=0)) > tol * scale:
        raise NotInTangentSpace("generator is not block off-diagonal at P")


def exp_chart(P, a, tol=1e-10):
    """``e^a P e^{-a}`` for ``a`` anti-Hermitian and off-diagonal at ``P``."""
    P = as_projector(P)
    a = np.asarray(a, dtype=complex)
    _check_m_p(P, a, tol)
    U = expm_antihermitian(a)
    return _hermitize(U @ P @ _h(U))


# -- traces, gradients -------------------------------------------------------


def p0_trace(Q, P0):
    """``Tr Q^{++} + Tr Q^{--}`` relative to ``P0``."""
    B = as_projector(P0)
    R = np.eye(B.shape[0]) - B
    return float(np.trace(R @ Q @ R).real + np.trace(B @ Q @ B).real)


def gradient_projection(H, P):
    """``P H (1 - P) + (1 - P) H P`` = ``[[H, P], P]``."""
    P = as_projector(P)
    R = np.eye(P.shape[0]) - P
    return TangentVector(P, P @ H @ R + R @ H @ P)


# -- charge conjugation ------------------------------------------------------


def standard_conjugation(n_half):
    """Block swap ``K = [[0, 1], [1, 0]]`` with complex conjugation."""
    z = np.zeros((n_half, n_half))
    one = np.eye(n_half)
    return AntiunitaryMap(np.block([[z, one], [one, z]]).astype(complex))


def standard_vacuum(n_half):
    """Projector on the last block (the sea for :func:`standard_conjugation`)."""
    return np.diag(np.r_[np.zeros(n_half), np.ones(n_half)]).astype(complex)


def is_c_symmetric(Q, C, tol=1e-10):
    """True iff ``-C Q C = Q``."""
    return bool(np.abs(Q + C.conjugate(Q)).max(initial=0) <= tol)


def _range_basis(P):
    w, V = np.linalg.eigh(_hermitize(P))
    return V[:, w > 0.5]


def _intersection_dim(V, W, rel=1e-8):
    if V.shape[1] == 0 or W.shape[1] == 0:
        return 0
    s = np.linalg.svd(np.concatenate([V, W], axis=1), compute_uv=False)
    rank = int(np.sum(s > rel * s[0]))
    return V.shape[1] + W.shape[1] - rank


def component_classify(P, P0, C, tol=1e-10):
    """Parity of ``dim(Ran P  cap  ker P0)``: even -> 'E1', odd -> 'E_minus_1'."""
    A, B = as_projector(P), as_projector(P0)
    if not is_c_symmetric(A - B, C, tol):
        raise NotCSymmetric("P - P0 is not C-symmetric")
    d = _intersection_dim(_range_basis(A), _range_basis(np.eye(B.shape[0]) - B))
    return {"component": "E1" if d % 2 == 0 else "E_minus_1", "intersection_dim": d}


def _subspace_distance(U, V):
    if U.shape[1] != V.shape[1]:
        return np.inf
    return float(np.linalg.norm(U @ _h(U) - V @ _h(V), 2)) if U.size else 0.0


def c_symmetric_spectrum_check(gamma, C, tol=CLUSTER_TOL, gap=1e-6):
    """Check ``C E_mu = E_{-mu}`` and ``dim E^{gamma^2}_{mu^2} = 0 mod 4`` for mu in (0, 1)."""
    G = _hermitize(np.asarray(gamma, dtype=complex))
    if not is_c_symmetric(G, C):
        raise NotCSymmetric("gamma is not C-symmetric")
    w, V = np.linalg.eigh(G)
    t = tol * max(1.0, np.abs(w).max(initial=0))
    groups = _clusters(w, t)
    for (a, b), (c, _) in zip(groups, groups[1:]):
        if w[c] - w[b - 1] <= gap:
            raise ClusterAmbiguous(f"eigenvalues {w[b - 1]:.3e} and {w[c]:.3e} are too close to separate")
    clusters = []
    ok = True
    for a, b in groups:
        mu = float(np.mean(w[a:b]))
        if not (t < mu < 1 - t):
            continue
        E = V[:, a:b]
        neg = [(c, d) for c, d in groups if abs(np.mean(w[c:d]) + mu) <= max(t, gap)]
        if neg:
            c, d = neg[0]
            F = V[:, c:d]
            CE, _ = np.linalg.qr(C(E))
            dist = _subspace_distance(CE, F)
        else:
            F = np.zeros((G.shape[0], 0))
            dist = np.inf
        dim = E.shape[1] + F.shape[1]
        good = dist <= 1e-9 and dim % 4 == 0
        ok &= good
        clusters.append({"mu": mu, "dim_mu": E.shape[1], "dim_mu2": dim, "conjugation_distance": dist, "ok": good})
    return {"ok": bool(ok), "clusters": clusters}


# -- generators --------------------------------------------------------------


def _haar(n, rng):
    return unitary_group.rvs(n, random_state=rng) if n > 1 else np.exp(2j * np.pi * rng.random()) * np.ones((1, 1))


def random_projector(n, rank, rng):
    U = _haar(n, rng)[:, :rank]
    return _hermitize(U @ _h(U))


def random_pair(n, rng, rank=None):
    rank = int(rng.integers(1, n)) if rank is None else rank
    return random_projector(n, rank, rng), random_projector(n, rank, rng)


def forced_pair(n, rng, rank=None):
    """Equal-rank pair with ``||P2 - P1|| = 1``: one direction leaves P1, one enters P2."""
    rank = int(rng.integers(1, n - 1)) if rank is None else rank
    if not 1 <= rank <= n - 2:
        raise InvalidParameter("forced_pair needs 1 <= rank <= n - 2")
    U = _haar(n, rng)
    P1 = U[:, :rank] @ _h(U[:, :rank])
    in_vec = U[:, rank]
    rest = np.delete(U, [0, rank], axis=1)
    if rank > 1:
        M = rest @ _haar(n - 2, rng)[:, : rank - 1]
        P2 = M @ _h(M) + np.outer(in_vec, in_vec.conj())
    else:
        P2 = np.outer(in_vec, in_vec.conj())
    return _hermitize(P1), _hermitize(P2)


def c_symmetric_instance(n_half, thetas=(), excitations=0, rng=None):
    """``(P, P0, C)`` with ``P - P0`` C-symmetric for the standard conjugation.

    Each angle produces a principal plane together with its conjugate plane
    (eigenvalues ``+-sin(theta)`` twice); each excitation adds
    ``|psi><psi| - |C psi><C psi|`` with psi in ker P0.  Returns None if the
    dimension is too small to host the requested structure.
    """
    rng = np.random.default_rng(rng)
    k, e = len(thetas), int(excitations)
    need = 2 * k + e
    if need > n_half or (k == 0 and e == 0 and n_half < 1):
        return None
    C = standard_conjugation(n_half)
    P0 = standard_vacuum(n_half)
    X = _haar(n_half, rng)[:, :need] if need else np.zeros((n_half, 0))
    z = np.zeros(n_half)

    def up(v):
        return np.r_[v, z]

    def down(v):
        return np.r_[z, v]

    P = P0.copy()
    for j, th in enumerate(thetas):
        u = up(X[:, 2 * j])
        w = down(np.conj(X[:, 2 * j + 1]))
        c, s = np.cos(th), np.sin(th)
        v = c * w + s * u
        cu, cw = C(u), C(w)
        v2 = c * cu - s * cw
        for old in (w, cu):
            P -= np.outer(old, old.conj())
        for new in (v, v2):
            P += np.outer(new, new.conj())
    for j in range(e):
        psi = up(X[:, 2 * k + j])
        cpsi = C(psi)
        P += np.outer(psi, psi.conj()) - np.outer(cpsi, cpsi.conj())
    return _hermitize(P), P0, C


def c_symmetric_tangent(P, C, rng, scale=1.0):
    """Random ``a`` in m_P with ``C a C = a``; the path ``e^{ta} P e^{-ta}`` stays C-symmetric."""
    P = as_projector(P)
    n = P.shape[0]
    R = np.eye(n) - P
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    X = P @ Z @ R
    X = X - _h(X)
    a = 0.5 * (X + C.conjugate(X))
    return scale * a / max(np.linalg.norm(a, 2), 1e-300)


# -- CSV fixtures ------------------------------------------------------------


def save_matrix(path, M):
    """Row-major CSV with each entry written as ``re,im``."""
    M = np.asarray(M, dtype=complex)
    lines = [",".join(f"{z.real:.17g},{z.imag:.17g}" for z in row) for row in M]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return Path(path)


def load_matrix(path):
    rows = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            vals = [float(v) for v in line.split(",")]
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
        if len(vals) % 2:
            raise ParseError(f"{path}:{lineno}: odd number of fields")
        rows.append(np.array(vals[0::2]) + 1j * np.array(vals[1::2]))
    if len({len(r) for r in rows}) > 1:
        raise ParseError(f"{path}: ragged rows")
    return np.array(rows)
