"""Nonnegative sparse coding and nonnegative dictionary learning.

Both problems share the objective

    0.5 * ||X - D A||_F^2 + lam * sum(A),    D >= 0, A >= 0,

with every dictionary column constrained to the unit ball.  Codes are found
by cyclic coordinate descent started from zero; columns that have not met
the KKT tolerance when the sweep budget runs out are finished with an exact
active-set solve, so every returned code carries a KKT certificate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .errors import DimensionMismatchError, InsufficientDataError

__all__ = [
    "SolverConfig",
    "Dictionary",
    "SparseCodes",
    "sparse_code",
    "learn_dictionary",
    "representation_error",
    "objective",
    "kkt_violation",
]


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 0.15
    max_outer_iter: int = 60
    max_inner_iter: int = 200
    tol: float = 1e-5
    kkt_tol: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        from .errors import ConfigurationError

        for name in ("lam", "max_outer_iter", "max_inner_iter", "tol", "kkt_tol"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"SolverConfig.{name} must be positive")
        if self.seed < 0:
            raise ConfigurationError("SolverConfig.seed must be nonnegative")


@dataclass
class Dictionary:
    """Nonnegative m x k basis learned for one person in one interval."""

    atoms: np.ndarray
    person_id: Optional[int] = None
    interval: Optional[int] = None

    @property
    def m(self) -> int:
        return self.atoms.shape[0]

    @property
    def k(self) -> int:
        return self.atoms.shape[1]


@dataclass
class SparseCodes:
    """Nonnegative k x n coefficient matrix.

    ``block_index`` is a list of ``(source_id, start, stop)`` row ranges when
    the codes were computed against a concatenation of dictionaries.
    """

    coeffs: np.ndarray
    block_index: Optional[list] = None
    objective: Optional[float] = None

    def block(self, source_id) -> np.ndarray:
        for sid, start, stop in self.block_index or ():
            if sid == source_id:
                return self.coeffs[start:stop]
        raise KeyError(source_id)

    def block_energy(self, source_id) -> float:
        return float(self.block(source_id).sum())

    @property
    def energy(self) -> float:
        return float(self.coeffs.sum())


def _matrix(X) -> np.ndarray:
    data = getattr(X, "data", X)
    return np.asarray(data, dtype=np.float64)


def _atoms(D) -> np.ndarray:
    atoms = getattr(D, "atoms", D)
    return np.asarray(atoms, dtype=np.float64)


def _check_inputs(X: np.ndarray, D: np.ndarray) -> None:
    if X.ndim != 2 or D.ndim != 2:
        raise DimensionMismatchError("patches and dictionary must be 2-D")
    if X.shape[0] != D.shape[0]:
        raise DimensionMismatchError(
            f"patch dimension {X.shape[0]} does not match dictionary rows {D.shape[0]}"
        )
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(D))):
        raise ValueError("non-finite values in patches or dictionary")


def objective(X, D, A, lam: float) -> float:
    """Value of 0.5*||X - DA||_F^2 + lam*||A||_{1,1}."""
    X, D = _matrix(X), _atoms(D)
    A = getattr(A, "coeffs", A)
    R = X - D @ A
    return 0.5 * float(np.sum(R * R)) + lam * float(np.sum(A))


def _gradient(G, DtX, lam, A):
    return G @ A - DtX + lam


def kkt_violation(X, D, A, lam: float) -> np.ndarray:
    """Per-column worst violation of the nonnegative-lasso KKT conditions.

    Active entries need a vanishing gradient, inactive ones a nonnegative
    gradient.
    """
    X, D = _matrix(X), _atoms(D)
    A = np.asarray(getattr(A, "coeffs", A), dtype=np.float64)
    return _kkt_columns(D.T @ D, D.T @ X, lam, A)


def _kkt_columns(G, DtX, lam, A):
    g = _gradient(G, DtX, lam, A)
    viol = np.where(A > 0, np.abs(g), np.maximum(-g, 0.0))
    if viol.size == 0:
        return np.zeros(A.shape[1])
    return viol.max(axis=0)


@njit(cache=True, nogil=True)
def _cd_kernel(G, DtX, lam, A, cols, max_sweeps, kkt_tol, settle):
    """Cyclic coordinate descent on the listed columns of ``A``, in place.

    The gradient of each column is carried along and only touched when a
    coordinate actually moves, which is cheap for sparse codes.  A column
    whose support has not changed for ``settle`` sweeps is left to the exact
    active-set finish (``settle = 0`` disables this).  Returns a flag per
    listed column telling whether it met the KKT tolerance.
    """
    k = A.shape[0]
    diag = np.empty(k)
    for i in range(k):
        diag[i] = G[i, i]
    a = np.empty(k)
    g = np.empty(k)
    done = np.zeros(cols.size, dtype=np.bool_)
    for c in range(cols.size):
        j = cols[c]
        for i in range(k):
            a[i] = A[i, j]
        for i in range(k):
            s = lam - DtX[i, j]
            for l in range(k):
                s += G[i, l] * a[l]
            g[i] = s
        steady = 0
        for _ in range(max_sweeps):
            flips = 0
            for i in range(k):
                if diag[i] <= 0.0:
                    continue
                old = a[i]
                new = old - g[i] / diag[i]
                if new < 0.0:
                    new = 0.0
                step = new - old
                if (old > 0.0) != (new > 0.0):
                    flips += 1
                if step != 0.0:
                    a[i] = new
                    # G is symmetric: walk row i, which is contiguous
                    for l in range(k):
                        g[l] += G[i, l] * step
            viol = 0.0
            for i in range(k):
                v = abs(g[i]) if a[i] > 0.0 else -g[i]
                if v > viol:
                    viol = v
            if viol <= kkt_tol:
                done[c] = True
                break
            steady = steady + 1 if flips == 0 else 0
            if settle > 0 and steady >= settle:
                break
        for i in range(k):
            A[i, j] = a[i]
    return done


def _coordinate_descent(G, DtX, lam, A, max_sweeps, kkt_tol, settle=0):
    """Coordinate descent on the columns of ``A`` that violate the KKT
    tolerance; returns the indices of those still violating it afterwards.

    Each coordinate update is an exact minimization, so no column's
    objective ever increases from its starting point.
    """
    G = np.ascontiguousarray(G)
    start = np.flatnonzero(_kkt_columns(G, DtX, lam, A) > kkt_tol)
    if start.size == 0:
        return start
    _cd_kernel(G, np.ascontiguousarray(DtX), float(lam), A, start, int(max_sweeps),
               float(kkt_tol), int(settle))
    # recheck with a fresh gradient; the carried one accumulates rounding
    return start[_kkt_columns(G, DtX[:, start], lam, A[:, start]) > kkt_tol]


@njit(cache=True, nogil=True)
def _column_kkt(G, q, a):
    worst = 0.0
    for i in range(a.size):
        g = -q[i]
        for l in range(a.size):
            g += G[i, l] * a[l]
        v = abs(g) if a[i] > 0.0 else -g
        if v > worst:
            worst = v
    return worst


@njit(cache=True, nogil=True)
def _block_solve(Gp, qp, scale):
    """Solve ``Gp x = qp`` by Cholesky; lstsq when a pivot is too small."""
    p = qp.size
    L = np.zeros((p, p))
    for i in range(p):
        for j in range(i + 1):
            s = Gp[i, j]
            for l in range(j):
                s -= L[i, l] * L[j, l]
            if i == j:
                if s <= 1e-10 * scale:
                    return np.linalg.lstsq(Gp, qp, rcond=-1.0)[0]
                L[i, i] = np.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    y = np.empty(p)
    for i in range(p):
        s = qp[i]
        for l in range(i):
            s -= L[i, l] * y[l]
        y[i] = s / L[i, i]
    x = np.empty(p)
    for i in range(p - 1, -1, -1):
        s = y[i]
        for l in range(i + 1, p):
            s -= L[l, i] * x[l]
        x[i] = s / L[i, i]
    return x


@njit(cache=True, nogil=True)
def _lawson_hanson(G, q, a, tol):
    """Active-set solve of min 0.5 a'Ga - q'a over a >= 0, from ``a``."""
    k = q.size
    a = a.copy()
    scale = 1.0
    for i in range(k):
        scale = max(scale, abs(q[i]))
        for l in range(k):
            scale = max(scale, abs(G[i, l]))
    passive = a > 0.0
    for _ in range(5 * k + 10):
        # restore feasibility on the passive set
        for _ in range(4 * k + 4):
            idx = np.nonzero(passive)[0]
            p = idx.size
            if p == 0:
                a[:] = 0.0
                break
            Gp = np.empty((p, p))
            qp = np.empty(p)
            for r in range(p):
                qp[r] = q[idx[r]]
                for c in range(p):
                    Gp[r, c] = G[idx[r], idx[c]]
            sp = _block_solve(Gp, qp, scale)
            resid = Gp @ sp - qp
            if np.sqrt(np.sum(resid * resid)) > 1e-10 * scale:
                # singular block with q outside its range: the objective
                # falls along -resid (a null direction); walk to a bound
                best, hit = np.inf, -1
                for r in range(p):
                    z = -resid[r]
                    if z < 0.0 and a[idx[r]] / -z < best:
                        best, hit = a[idx[r]] / -z, r
                if hit < 0:
                    break
                for r in range(p):
                    a[idx[r]] -= best * resid[r]
                a[idx[hit]] = 0.0
            elif np.all(sp > 0.0):
                a[:] = 0.0
                for r in range(p):
                    a[idx[r]] = sp[r]
                break
            else:
                best, hit = np.inf, -1
                for r in range(p):
                    if sp[r] <= 0.0:
                        ratio = a[idx[r]] / (a[idx[r]] - sp[r])
                        if ratio < best:
                            best, hit = ratio, r
                for r in range(p):
                    a[idx[r]] += best * (sp[r] - a[idx[r]])
                a[idx[hit]] = 0.0
            top = max(1.0, a.max())
            for i in range(k):
                if a[i] < 1e-15 * top:
                    a[i] = 0.0
            passive = a > 0.0
        w = q - G @ a
        t, wt = -1, 0.1 * tol
        for i in range(k):
            if not passive[i] and w[i] > wt:
                t, wt = i, w[i]
        if t < 0:
            break
        passive[t] = True
    return a


@njit(cache=True, nogil=True)
def _finish_columns(G, DtX, lam, A, cols, tol):
    """Exact active-set finish for the listed columns.

    Tries a warm start from the current support first; a rank-deficient
    warm support can stall, in which case the column restarts from zero.
    """
    k = A.shape[0]
    for c in range(cols.size):
        j = cols[c]
        q = DtX[:, j] - lam
        warm = _lawson_hanson(G, q, A[:, j].copy(), tol)
        wv = _column_kkt(G, q, warm)
        if wv > tol:
            cold = _lawson_hanson(G, q, np.zeros(k), tol)
            if _column_kkt(G, q, cold) <= wv:
                warm = cold
        A[:, j] = warm


# sweeps with an unchanged support after which CD hands a column to the
# exact finish; CD has found the support by then and only polishes values
SETTLE_SWEEPS = 5


def _solve_codes(G, DtX, lam, A, max_sweeps, kkt_tol, settle=SETTLE_SWEEPS):
    left = _coordinate_descent(G, DtX, lam, A, max_sweeps, kkt_tol, settle)
    if left.size:
        _finish_columns(np.ascontiguousarray(G), np.ascontiguousarray(DtX), float(lam),
                        A, left, float(kkt_tol))
    return A


def sparse_code(X, D, cfg: Optional[SolverConfig] = None) -> SparseCodes:
    """Nonnegative sparse codes of the columns of ``X`` over dictionary ``D``.

    Parameters
    ----------
    X : PatchSet or ndarray, shape (m, n)
    D : Dictionary or ndarray, shape (m, k)
    cfg : SolverConfig
        ``lam`` weights the l1 term; ``max_inner_iter`` bounds the number of
        coordinate-descent sweeps before the exact active-set finish.

    Returns
    -------
    SparseCodes
        ``coeffs`` satisfies the KKT conditions to ``cfg.kkt_tol`` and
        ``objective`` holds the minimized value.
    """
    cfg = cfg or SolverConfig()
    Xm, Dm = _matrix(X), _atoms(D)
    _check_inputs(Xm, Dm)
    A = np.zeros((Dm.shape[1], Xm.shape[1]))
    if Xm.shape[1] and Dm.shape[1]:
        # aim below the tolerance so a recomputed gradient (other summation
        # order) still certifies
        _solve_codes(Dm.T @ Dm, Dm.T @ Xm, cfg.lam, A, cfg.max_inner_iter, 0.5 * cfg.kkt_tol)
    return SparseCodes(A, objective=objective(Xm, Dm, A, cfg.lam))


def representation_error(X, D, cfg: Optional[SolverConfig] = None) -> float:
    """Minimized coding objective of ``X`` under the fixed dictionary ``D``."""
    return sparse_code(X, D, cfg).objective


def _initial_atoms(X, k, rng):
    m, n = X.shape
    norms = np.linalg.norm(X, axis=0)
    nonzero = np.flatnonzero(norms > 0)
    D = np.empty((m, k))
    take = min(k, nonzero.size)
    cols = np.sort(rng.choice(nonzero, size=take, replace=False)) if take else []
    for j, c in enumerate(cols):
        D[:, j] = X[:, c] / norms[c]
    for j in range(take, k):
        v = rng.random(m)
        D[:, j] = v / np.linalg.norm(v)
    return D


def _update_atoms(X, D, A, rng):
    """One projected block-coordinate pass over the atoms.

    Each column is set to the exact minimizer of the objective over the
    nonnegative unit ball with the others held fixed.  Unused atoms are
    re-seeded from the worst represented data columns; that leaves the
    objective unchanged because their code rows are zero.
    """
    B = X @ A.T
    GA = A @ A.T
    k = D.shape[1]
    dead = []
    for j in range(k):
        if GA[j, j] <= 0.0:
            dead.append(j)
            continue
        u = D[:, j] + (B[:, j] - D @ GA[:, j]) / GA[j, j]
        np.maximum(u, 0.0, out=u)
        nrm = np.linalg.norm(u)
        if nrm == 0.0:
            # drop its codes first so the re-seed cannot raise the objective
            A[j] = 0.0
            GA[j, :] = 0.0
            GA[:, j] = 0.0
            B[:, j] = 0.0
            D[:, j] = 0.0
            dead.append(j)
            continue
        D[:, j] = u / max(nrm, 1.0)
    if dead:
        resid = np.linalg.norm(X - D @ A, axis=0)
        order = np.argsort(-resid, kind="stable")
        used = 0
        for j in dead:
            while used < order.size and resid[order[used]] <= 0:
                used += 1
            if used < order.size:
                x = np.maximum(X[:, order[used]], 0.0)
                used += 1
            else:
                x = rng.random(X.shape[0])
            nrm = np.linalg.norm(x)
            D[:, j] = x / nrm if nrm > 0 else 1.0 / np.sqrt(X.shape[0])
    return D, A


def learn_dictionary(X, k: int = 32, cfg: Optional[SolverConfig] = None):
    """Learn a nonnegative dictionary by alternating minimization.

    Parameters
    ----------
    X : PatchSet or ndarray, shape (m, n)
        Nonnegative training patches, one per column.
    k : int
        Number of atoms.
    cfg : SolverConfig
        The seed drives the choice of the ``k`` data columns used to
        initialize the atoms.

    Returns
    -------
    (Dictionary, SparseCodes, list of float)
        The learned dictionary, its exactly solved codes (KKT to
        ``cfg.kkt_tol``) and the objective after every outer iteration
        (non-increasing).
    """
    cfg = cfg or SolverConfig()
    Xm = _matrix(X)
    if Xm.ndim != 2:
        raise DimensionMismatchError("patches must be 2-D")
    if not np.all(np.isfinite(Xm)):
        raise ValueError("non-finite values in patches")
    if np.any(Xm < 0):
        raise ValueError("patches must be nonnegative")
    m, n = Xm.shape
    if n < k:
        raise InsufficientDataError(f"{n} patches cannot train {k} atoms")

    rng = np.random.default_rng(cfg.seed)
    D = _initial_atoms(Xm, k, rng)
    A = np.zeros((k, n))
    # code steps inside the loop need not be exact; they only have to descend
    inner_tol = max(cfg.kkt_tol, 0.01 * cfg.lam)
    trace: list = []
    for _ in range(cfg.max_outer_iter):
        _coordinate_descent(D.T @ D, D.T @ Xm, cfg.lam, A, cfg.max_inner_iter, inner_tol)
        D, A = _update_atoms(Xm, D, A, rng)
        trace.append(objective(Xm, D, A, cfg.lam))
        if len(trace) > 1 and trace[-2] - trace[-1] <= cfg.tol * abs(trace[-2]):
            break

    person = getattr(X, "person_id", None)
    interval = getattr(X, "interval", None)
    # exact codes for the final atoms (never worse than the last trace value)
    codes = sparse_code(Xm, D, cfg)
    return Dictionary(D, person, interval), codes, trace
