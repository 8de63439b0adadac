"""Dense primal-dual interior-point solver for block-diagonal SDPs.

Standard form::

    min  <C, X> + c_lp . x + c_free . u
    s.t. A(X) + A_lp x + A_free u = b
         X = diag(X_1, ..., X_k),  X_j psd,  x >= 0,  u free

Constraint data for a psd block is a list of ``(row, i, j, v)`` with
``i <= j``: the term ``v * X[i, j]`` enters row ``row``.  An off-diagonal
entry therefore stands for the pair ``X[i, j] = X[j, i]``.

Feasibility problems (``feasibility=True``) are solved as::

    max lam  s.t.  A(X) + A_lp x = b,  X - lam I psd,  x - lam >= 0

which always has strictly feasible points on both sides; the optimal
``lam`` is the margin used by the membership logic and the dual vector is a
pseudo-moment witness when ``lam < 0``.

The iteration is the infeasible path-following method with Nesterov-Todd
scaling and Mehrotra's predictor-corrector.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

log = logging.getLogger(__name__)

_KRON_MAX_DIM = 30
DUAL_RAY_THRESHOLD = 1e6
_TOL_FACTORS = (1.0, 0.1, 0.01)
# dual infeasibility allowed on a diverging dual; y / b.y then violates A^T w <= 0 by at most this / 1e6
DUAL_RAY_DINF = 1e-6


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    PRIMAL_INFEASIBLE = "primal_infeasible_witness"
    NUMERICAL_TROUBLE = "numerical_trouble"


class SdpError(ValueError):
    pass


@dataclass
class SolverOptions:
    tol: float = 1e-9
    max_iters: int = 200
    rank_tol: float = 1e-11
    step_fraction: float = 0.98


@dataclass
class SdpProblem:
    block_dims: list[int]
    b: np.ndarray
    entries: list[list[tuple[int, int, int, float]]]
    n_lp: int = 0
    lp_entries: list[tuple[int, int, float]] = field(default_factory=list)
    n_free: int = 0
    free_entries: list[tuple[int, int, float]] = field(default_factory=list)
    c_blocks: list[np.ndarray] | None = None
    c_lp: np.ndarray | None = None
    c_free: np.ndarray | None = None
    feasibility: bool = False

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.block_dims = [int(d) for d in self.block_dims]
        if len(self.entries) != len(self.block_dims):
            raise SdpError("need one entry list per psd block")
        if any(d < 1 for d in self.block_dims):
            raise SdpError("block dimensions must be positive")
        m = self.m
        for k, (d, ent) in enumerate(zip(self.block_dims, self.entries)):
            for row, i, j, _ in ent:
                if not (0 <= row < m and 0 <= i <= j < d):
                    raise SdpError(f"bad entry ({row}, {i}, {j}) in block {k}")
        for row, col, _ in self.lp_entries:
            if not (0 <= row < m and 0 <= col < self.n_lp):
                raise SdpError(f"bad lp entry ({row}, {col})")
        for row, col, _ in self.free_entries:
            if not (0 <= row < m and 0 <= col < self.n_free):
                raise SdpError(f"bad free entry ({row}, {col})")
        if self.c_blocks is not None:
            self.c_blocks = [np.asarray(c, dtype=float) for c in self.c_blocks]
            for c, d in zip(self.c_blocks, self.block_dims):
                if c.shape != (d, d) or not np.allclose(c, c.T):
                    raise SdpError("objective blocks must be symmetric and match block sizes")

    @property
    def m(self) -> int:
        return self.b.shape[0]

    def dense_operator(self) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
        """Constraint matrices as dense arrays: per-block ``(m, d, d)``, lp ``(m, n_lp)``, free ``(m, n_free)``."""
        mats = []
        for d, ent in zip(self.block_dims, self.entries):
            a = np.zeros((self.m, d, d))
            for row, i, j, v in ent:
                if i == j:
                    a[row, i, i] += v
                else:
                    a[row, i, j] += v / 2
                    a[row, j, i] += v / 2
            mats.append(a)
        a_lp = np.zeros((self.m, self.n_lp))
        for row, col, v in self.lp_entries:
            a_lp[row, col] += v
        a_free = np.zeros((self.m, self.n_free))
        for row, col, v in self.free_entries:
            a_free[row, col] += v
        return mats, a_lp, a_free

    def adjoint(self, y) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
        """Evaluate A^T y as (psd blocks, lp part, free part)."""
        y = np.asarray(y, dtype=float)
        blocks = []
        for d, ent in zip(self.block_dims, self.entries):
            z = np.zeros((d, d))
            for row, i, j, v in ent:
                if i == j:
                    z[i, i] += v * y[row]
                else:
                    z[i, j] += v * y[row] / 2
                    z[j, i] += v * y[row] / 2
            blocks.append(z)
        lp = np.zeros(self.n_lp)
        for row, col, v in self.lp_entries:
            lp[col] += v * y[row]
        free = np.zeros(self.n_free)
        for row, col, v in self.free_entries:
            free[col] += v * y[row]
        return blocks, lp, free

    def apply(self, blocks, x_lp=None, u=None) -> np.ndarray:
        """Evaluate A(X) + A_lp x + A_free u."""
        out = np.zeros(self.m)
        for ent, xb in zip(self.entries, blocks):
            for row, i, j, v in ent:
                out[row] += v * xb[i, j]
        if x_lp is not None:
            for row, col, v in self.lp_entries:
                out[row] += v * x_lp[col]
        if u is not None:
            for row, col, v in self.free_entries:
                out[row] += v * u[col]
        return out


@dataclass
class SdpSolution:
    status: Status
    X: list[np.ndarray]
    x_lp: np.ndarray
    u: np.ndarray
    y: np.ndarray
    S: list[np.ndarray]
    s_lp: np.ndarray
    primal_objective: float
    dual_objective: float
    primal_residual: float
    dual_residual: float
    gap: float
    mu_final: float
    iterations: int
    lam: float | None = None
    message: str = ""
    farkas: np.ndarray | None = None

    # ``farkas``, when set, is a vector w with A^T w psd (and >= 0 on the lp
    # part, 0 on free columns) and b.w = -1, proving A(X) + ... = b has no
    # solution with X psd.

    @property
    def witness(self) -> np.ndarray | None:
        """Feasibility mode: pseudo-moment vector w with A^T w psd, <A^T w, I> = 1, b.w = lam."""
        if self.lam is None:
            return None
        return -self.y


# ---------------------------------------------------------------------------
# internal operator representation


class _Block:
    """One psd block's constraints as a sparse (m, d*d) matrix over row-major vec."""

    def __init__(self, d: int, m: int, entries):
        self.d = d
        rows, cols, vals = [], [], []
        for row, i, j, v in entries:
            if i == j:
                rows.append(row)
                cols.append(i * d + i)
                vals.append(v)
            else:
                rows += [row, row]
                cols += [i * d + j, j * d + i]
                vals += [v / 2, v / 2]
        self.mat = sp.csr_matrix((vals, (rows, cols)), shape=(m, d * d))
        self.mat.sum_duplicates()
        self._row_index = None

    def scale_rows(self, s: np.ndarray):
        self.mat = sp.diags(s) @ self.mat
        self.mat = self.mat.tocsr()
        self._row_index = None

    def keep_rows(self, keep: np.ndarray):
        self.mat = self.mat[keep].tocsr()
        self._row_index = None

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.mat @ x.ravel()

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        z = (self.mat.T @ y).reshape(self.d, self.d)
        return (z + z.T) / 2

    def _rows(self):
        if self._row_index is None:
            d = self.d
            idx = []
            for r in range(self.mat.shape[0]):
                lo, hi = self.mat.indptr[r], self.mat.indptr[r + 1]
                cols = self.mat.indices[lo:hi]
                idx.append((cols // d, cols % d, self.mat.data[lo:hi]))
            self._row_index = idx
        return self._row_index

    def factor_rows(self, g: np.ndarray) -> np.ndarray:
        """Rows vec(G^T A_i G), so that the Schur block equals F F^T."""
        d = self.d
        if d <= _KRON_MAX_DIM:
            return np.asarray(self.mat @ np.kron(g, g))
        out = np.zeros((self.mat.shape[0], d * d))
        for r, (ii, jj, vv) in enumerate(self._rows()):
            if len(vv):
                out[r] = (g[ii, :].T @ (vv[:, None] * g[jj, :])).ravel()
        return out

    def schur(self, w: np.ndarray) -> np.ndarray:
        """A (W kron W) A^T."""
        d = self.d
        if d <= _KRON_MAX_DIM:
            kw = np.kron(w, w)
            t = self.mat @ kw
            return np.asarray(self.mat @ t.T)
        m = self.mat.shape[0]
        out = np.empty((m, m))
        for r, (ii, jj, vv) in enumerate(self._rows()):
            if len(vv) == 0:
                out[:, r] = 0.0
                continue
            waw = w[:, ii] @ (vv[:, None] * w[jj, :])
            out[:, r] = self.mat @ waw.ravel()
        return (out + out.T) / 2


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    try:
        chol = np.linalg.cholesky(x)
    except np.linalg.LinAlgError:
        return 0.0
    z = sla.solve_triangular(chol, dx, lower=True)
    z = sla.solve_triangular(chol, z.T, lower=True)
    lmin = np.linalg.eigvalsh((z + z.T) / 2)[0]
    return math.inf if lmin >= 0 else -1.0 / lmin


def _max_step_lp(x: np.ndarray, dx: np.ndarray) -> float:
    neg = dx < 0
    if not np.any(neg):
        return math.inf
    return float(np.min(-x[neg] / dx[neg]))


def _nt_scaling(x: np.ndarray, s: np.ndarray):
    """Return (G, G^{-1}, v) with G^{-1} X G^{-T} = G^T S G = diag(v)."""
    lx = np.linalg.cholesky(x)
    ls = np.linalg.cholesky(s)
    u, dvals, vt = np.linalg.svd(ls.T @ lx)
    g = lx @ vt.T / np.sqrt(dvals)
    ginv = (np.sqrt(dvals)[:, None] * vt) @ sla.solve_triangular(lx, np.eye(len(dvals)), lower=True)
    return g, ginv, dvals


class _Schur:
    """Solver for the bordered system [M F; F^T 0] [dy; du] = [h; rf].

    ``M`` is given either explicitly (Cholesky) or as ``B B^T`` through its
    factor ``B`` (QR of ``B^T``), the latter being accurate to cond(B) rather
    than cond(B)^2.
    """

    def __init__(self, a_free: np.ndarray, *, m: np.ndarray | None = None, factor: np.ndarray | None = None):
        self.a_free = a_free
        self.ridge = 0.0
        if factor is not None:
            n = factor.shape[0]
            r = sla.qr(factor.T, mode="r", check_finite=False)[0][:n]
            d = np.abs(np.diag(r)) if r.size else np.zeros(0)
            if r.shape[0] < n or (d.size and d.min() <= 1e-14 * d.max()):
                self.ridge = (1e-12 * (d.max() if d.size else 1.0)) ** 2
                aug = np.hstack([factor, math.sqrt(self.ridge) * np.eye(n)])
                r = sla.qr(aug.T, mode="r", check_finite=False)[0][:n]
            self._r = r
            self._factor = factor
            self._solve_m = self._solve_qr
            self._apply_m = lambda v: factor @ (factor.T @ v) + self.ridge * v
        else:
            n = m.shape[0]
            scale = max(1.0, float(np.max(np.abs(np.diag(m))))) if n else 1.0
            for _ in range(8):
                try:
                    self._chol = sla.cho_factor(m + self.ridge * np.eye(n), lower=True, check_finite=False)
                    break
                except (np.linalg.LinAlgError, ValueError):
                    self.ridge = scale * 1e-12 if self.ridge == 0 else self.ridge * 100
            else:
                raise np.linalg.LinAlgError("schur complement not positive definite")
            self._solve_m = lambda h: sla.cho_solve(self._chol, h, check_finite=False)
            self._apply_m = lambda v: m @ v
        if a_free.shape[1]:
            self.minv_af = self._solve_m(a_free)
            self.border = a_free.T @ self.minv_af
            self.border = (self.border + self.border.T) / 2

    def _solve_qr(self, h):
        z = sla.solve_triangular(self._r, h, trans="T", check_finite=False)
        return sla.solve_triangular(self._r, z, check_finite=False)

    def solve(self, h: np.ndarray, rf: np.ndarray, refine: int = 2):
        dy, du = self._solve_once(h, rf)
        for _ in range(refine):
            eh = h - self._apply_m(dy) - self.a_free @ du
            ef = rf - self.a_free.T @ dy
            cy, cu = self._solve_once(eh, ef)
            dy = dy + cy
            du = du + cu
        return dy, du

    def _solve_once(self, h: np.ndarray, rf: np.ndarray):
        minv_h = self._solve_m(h)
        if not self.a_free.shape[1]:
            return minv_h, np.zeros(0)
        du = np.linalg.solve(self.border, self.a_free.T @ minv_h - rf)
        dy = minv_h - self.minv_af @ du
        return dy, du


# ---------------------------------------------------------------------------


def _preprocess(p: SdpProblem, rank_tol: float):
    """Row scaling and removal of dependent rows via pivoted QR.

    Returns (keep, row_scale, consistent, ls_residual_vector).
    """
    rows, cols, vals = [], [], []
    offset = 0
    ident = np.zeros(p.m)
    for d, ent in zip(p.block_dims, p.entries):
        for row, i, j, v in ent:
            rows.append(row)
            # position of (i, j) in the row-wise upper triangle
            cols.append(offset + i * d - i * (i - 1) // 2 + (j - i))
            vals.append(v if i == j else v / math.sqrt(2.0))
            if i == j:
                ident[row] += v
        offset += d * (d + 1) // 2
    for row, col, v in p.lp_entries:
        rows.append(row)
        cols.append(offset + col)
        vals.append(v)
        ident[row] += v
    offset += p.n_lp
    for row, col, v in p.free_entries:
        rows.append(row)
        cols.append(offset + col)
        vals.append(v)
    offset += p.n_free
    full = sp.csr_matrix((vals, (rows, cols)), shape=(p.m, offset)).toarray()
    if p.feasibility:
        full = np.hstack([full, ident[:, None]])
    norms = np.linalg.norm(full, axis=1)
    zero_rows = norms == 0
    row_scale = np.where(zero_rows, 1.0, 1.0 / np.where(zero_rows, 1.0, norms))
    scaled = full * row_scale[:, None]
    if p.m == 0:
        return np.zeros(0, dtype=bool), row_scale, True, None
    _, r, piv = sla.qr(scaled.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r)) if r.size else np.zeros(0)
    rank = int(np.sum(diag > rank_tol * (diag[0] if diag.size else 1.0)))
    keep = np.zeros(p.m, dtype=bool)
    keep[piv[:rank]] = True
    keep &= ~zero_rows
    bs = p.b * row_scale
    kept = scaled[keep]
    # b must lie in the row space spanned by the kept rows
    if keep.all():
        return keep, row_scale, True, None
    coef, *_ = np.linalg.lstsq(kept.T, scaled.T, rcond=None)
    # rows dropped are (numerically) combinations of kept rows: row_i = sum coef[:, i] * kept
    predicted = coef.T @ bs[keep]
    resid = bs - predicted
    resid[keep] = 0.0
    bnorm = max(1.0, float(np.max(np.abs(bs))))
    consistent = bool(np.max(np.abs(resid)) <= 1e-9 * bnorm)
    if consistent:
        return keep, row_scale, True, None
    # Farkas vector: y with A^T y = 0 and b.y > 0
    wit = np.zeros(p.m)
    wit[~keep] = resid[~keep]
    wit[keep] = -coef[:, ~keep] @ resid[~keep]
    return keep, row_scale, False, wit * row_scale


def solve(p: SdpProblem, opts: SolverOptions | None = None) -> SdpSolution:
    """Solve ``p``; see the module docstring for the problem forms."""
    opts = opts or SolverOptions()
    m0 = p.m
    keep, row_scale, consistent, farkas = _preprocess(p, opts.rank_tol)
    if not consistent:
        return _inconsistent_solution(p, farkas)

    blocks = [_Block(d, m0, ent) for d, ent in zip(p.block_dims, p.entries)]
    a_lp = np.zeros((m0, p.n_lp))
    for row, col, v in p.lp_entries:
        a_lp[row, col] += v
    a_free = np.zeros((m0, p.n_free))
    for row, col, v in p.free_entries:
        a_free[row, col] += v
    c_blocks = p.c_blocks if p.c_blocks is not None else [np.zeros((d, d)) for d in p.block_dims]
    c_lp = np.zeros(p.n_lp) if p.c_lp is None else np.asarray(p.c_lp, dtype=float)
    c_free = np.zeros(p.n_free) if p.c_free is None else np.asarray(p.c_free, dtype=float)
    b = p.b.copy()

    if p.feasibility:
        # X = Y + lam I; lam is an extra free variable with objective -lam
        ident = np.zeros(m0)
        for blk in blocks:
            ident += blk.apply(np.eye(blk.d))
        ident += a_lp.sum(axis=1)
        a_free = np.hstack([a_free, ident[:, None]])
        c_blocks = [np.zeros((d, d)) for d in p.block_dims]
        c_lp = np.zeros(p.n_lp)
        c_free = np.concatenate([np.zeros(p.n_free), [-1.0]])

    # row scaling and dependent-row removal
    for blk in blocks:
        blk.scale_rows(row_scale)
        blk.keep_rows(keep)
    a_lp = (a_lp * row_scale[:, None])[keep]
    a_free = (a_free * row_scale[:, None])[keep]
    b = (b * row_scale)[keep]

    # objective and right-hand side normalisation
    b_scale = max(1.0, float(np.max(np.abs(b)))) if b.size else 1.0
    c_norm = max(
        [float(np.max(np.abs(c))) for c in c_blocks if c.size]
        + [float(np.max(np.abs(c_lp))) if c_lp.size else 0.0, float(np.max(np.abs(c_free))) if c_free.size else 0.0]
        + [0.0]
    )
    c_scale = max(1.0, c_norm)
    b = b / b_scale
    c_blocks = [c / c_scale for c in c_blocks]
    c_lp = c_lp / c_scale
    c_free = c_free / c_scale

    # the stopping test runs on scaled data; tighten it until the residuals
    # reported on the original data meet the requested tolerance too
    sol = None
    for factor in _TOL_FACTORS:
        run_opts = dataclasses.replace(opts, tol=opts.tol * factor)
        state = _iterate(blocks, a_lp, a_free, b, c_blocks, c_lp, c_free, run_opts)
        cand = _finish(p, opts, state, keep, row_scale, b_scale, c_scale)
        if cand.status != Status.OPTIMAL and sol is not None:
            break
        sol = cand
        if cand.status != Status.OPTIMAL or _meets(cand, opts.tol):
            return cand
    if sol.status == Status.OPTIMAL and not _meets(sol, opts.tol):
        sol.status = Status.NUMERICAL_TROUBLE
        sol.message = "tolerance not reached on the original data"
    return sol


def _meets(sol: "SdpSolution", tol: float) -> bool:
    return sol.primal_residual <= tol and sol.dual_residual <= tol and sol.gap <= tol


def _finish(p: SdpProblem, opts: SolverOptions, state, keep, row_scale, b_scale, c_scale) -> "SdpSolution":
    m0 = p.m
    X, x, u, y, S, s, status, iters, mu, msg = state

    # undo scalings
    X = [xb * b_scale for xb in X]
    x = x * b_scale
    u = u * b_scale
    S = [sb * c_scale for sb in S]
    s = s * c_scale
    y_full = np.zeros(m0)
    y_full[keep] = y * c_scale
    y_full = y_full * row_scale

    lam = None
    if p.feasibility:
        lam = float(u[-1])
        u = u[:-1]
        X = [xb + lam * np.eye(xb.shape[0]) for xb in X]
        x = x + lam

    # report residuals on the original data
    rp = p.b - p.apply(X, x, u)
    b_inf = float(np.max(np.abs(p.b))) if m0 else 0.0
    primal_residual = float(np.max(np.abs(rp))) / (1.0 + b_inf) if m0 else 0.0
    orig_c_blocks = p.c_blocks if p.c_blocks is not None else [np.zeros((d, d)) for d in p.block_dims]
    orig_c_lp = np.zeros(p.n_lp) if p.c_lp is None else np.asarray(p.c_lp, dtype=float)
    orig_c_free = np.zeros(p.n_free) if p.c_free is None else np.asarray(p.c_free, dtype=float)
    mats_free = np.zeros((m0, p.n_free))
    for row, col, v in p.free_entries:
        mats_free[row, col] += v
    lp_full = np.zeros((m0, p.n_lp))
    for row, col, v in p.lp_entries:
        lp_full[row, col] += v
    if p.feasibility:
        pobj = lam
        dobj = float(p.b @ (-y_full))
        dres = []
        for blk0, sb in zip(_orig_blocks(p), S):
            dres.append(np.max(np.abs(-blk0.adjoint(y_full) - sb)) if sb.size else 0.0)
        if p.n_lp:
            dres.append(float(np.max(np.abs(-lp_full.T @ y_full - s))))
        c_inf = 1.0
    else:
        pobj = sum(float(np.sum(c * xb)) for c, xb in zip(orig_c_blocks, X))
        pobj += float(orig_c_lp @ x) + float(orig_c_free @ u)
        dobj = float(p.b @ y_full)
        dres = []
        for blk0, c, sb in zip(_orig_blocks(p), orig_c_blocks, S):
            dres.append(float(np.max(np.abs(c - blk0.adjoint(y_full) - sb))))
        if p.n_lp:
            dres.append(float(np.max(np.abs(orig_c_lp - lp_full.T @ y_full - s))))
        if p.n_free:
            dres.append(float(np.max(np.abs(orig_c_free - mats_free.T @ y_full))))
        c_inf = max([float(np.max(np.abs(c))) for c in orig_c_blocks if c.size] + [0.0])
        c_inf = max(c_inf, float(np.max(np.abs(orig_c_lp))) if p.n_lp else 0.0)
    dual_residual = max(dres + [0.0]) / (1.0 + c_inf)
    gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))

    farkas = None
    if status == Status.OPTIMAL and p.feasibility and lam is not None:
        if lam < -10 * opts.tol * (1.0 + b_inf):
            status = Status.PRIMAL_INFEASIBLE
            farkas = -y_full / abs(float(p.b @ y_full))
    elif status == Status.PRIMAL_INFEASIBLE:
        farkas = -y_full / float(p.b @ y_full)
    return SdpSolution(
        status=status,
        X=X,
        x_lp=x,
        u=u,
        y=y_full,
        S=S,
        s_lp=s,
        primal_objective=pobj,
        dual_objective=dobj,
        primal_residual=primal_residual,
        dual_residual=dual_residual,
        gap=gap,
        mu_final=mu,
        iterations=iters,
        lam=lam,
        message=msg,
        farkas=farkas,
    )


def _orig_blocks(p: SdpProblem) -> list[_Block]:
    return [_Block(d, p.m, ent) for d, ent in zip(p.block_dims, p.entries)]


def _inconsistent_solution(p: SdpProblem, farkas: np.ndarray) -> SdpSolution:
    # normalise so that b . w = -1 for a witness w with A^T w = 0
    w = farkas / float(p.b @ farkas)
    w = -w
    return SdpSolution(
        status=Status.PRIMAL_INFEASIBLE,
        X=[np.zeros((d, d)) for d in p.block_dims],
        x_lp=np.zeros(p.n_lp),
        u=np.zeros(p.n_free),
        y=-w,
        S=[np.zeros((d, d)) for d in p.block_dims],
        s_lp=np.zeros(p.n_lp),
        primal_objective=math.nan,
        dual_objective=math.nan,
        primal_residual=math.inf,
        dual_residual=0.0,
        gap=math.inf,
        mu_final=0.0,
        iterations=0,
        lam=-math.inf if p.feasibility else None,
        message="equality constraints are inconsistent",
        farkas=w,
    )


def _iterate(blocks, a_lp, a_free, b, c_blocks, c_lp, c_free, opts: SolverOptions):
    m = b.shape[0]
    n_lp = a_lp.shape[1]
    n_free = a_free.shape[1]
    nu = sum(blk.d for blk in blocks) + n_lp
    nu = max(nu, 1)

    xi = max(10.0, math.sqrt(nu))
    eta = max(10.0, math.sqrt(nu))
    X = [xi * np.eye(blk.d) for blk in blocks]
    S = [eta * np.eye(blk.d) for blk in blocks]
    x = xi * np.ones(n_lp)
    s = eta * np.ones(n_lp)
    y = np.zeros(m)
    u = np.zeros(n_free)

    c_inf = max([float(np.max(np.abs(c))) for c in c_blocks if c.size] + [float(np.max(np.abs(c_lp))) if n_lp else 0.0] + [float(np.max(np.abs(c_free))) if n_free else 0.0])
    b_inf = float(np.max(np.abs(b))) if m else 0.0

    status = Status.NUMERICAL_TROUBLE
    msg = "iteration limit reached"
    mu = 0.0
    it = 0
    precise = False
    for it in range(opts.max_iters + 1):
        rp = b - sum((blk.apply(xb) for blk, xb in zip(blocks, X)), np.zeros(m)) - a_lp @ x - a_free @ u
        rd = [c - blk.adjoint(y) - sb for blk, c, sb in zip(blocks, c_blocks, S)]
        rd_lp = c_lp - a_lp.T @ y - s
        rf = c_free - a_free.T @ y
        mu = (sum(float(np.sum(xb * sb)) for xb, sb in zip(X, S)) + float(x @ s)) / nu
        pobj = sum(float(np.sum(c * xb)) for c, xb in zip(c_blocks, X)) + float(c_lp @ x) + float(c_free @ u)
        dobj = float(b @ y)
        pinf = (float(np.max(np.abs(rp))) if m else 0.0) / (1.0 + b_inf)
        dinf = max(
            [float(np.max(np.abs(r))) for r in rd if r.size]
            + [float(np.max(np.abs(rd_lp))) if n_lp else 0.0, float(np.max(np.abs(rf))) if n_free else 0.0]
        ) / (1.0 + c_inf)
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        cgap = mu * nu / (1.0 + abs(pobj) + abs(dobj))
        log.debug("it %3d pobj %+.10e dobj %+.10e pinf %.1e dinf %.1e gap %.1e mu %.1e", it, pobj, dobj, pinf, dinf, gap, mu)
        if pinf <= opts.tol and dinf <= opts.tol and gap <= opts.tol and cgap <= opts.tol:
            status = Status.OPTIMAL
            msg = "converged"
            break
        if dobj > DUAL_RAY_THRESHOLD * (1.0 + c_inf) and dinf <= max(opts.tol, DUAL_RAY_DINF):
            # the dual objective diverges along a ray: y / b.y is a Farkas vector
            status = Status.PRIMAL_INFEASIBLE
            msg = "dual objective unbounded"
            break
        if it == opts.max_iters:
            break
        try:
            scal = [_nt_scaling(xb, sb) for xb, sb in zip(X, S)]
        except np.linalg.LinAlgError:
            msg = "lost positive definiteness"
            break
        W = [g @ g.T for g, _, _ in scal]
        wlp = x / s if n_lp else np.zeros(0)

        def build_schur(use_factor: bool) -> _Schur:
            if use_factor:
                parts = [blk.factor_rows(g) for blk, (g, _, _) in zip(blocks, scal)]
                if n_lp:
                    parts.append(a_lp * np.sqrt(wlp))
                f = np.hstack(parts) if parts else np.zeros((m, 0))
                return _Schur(a_free, factor=f)
            mm = np.zeros((m, m))
            for blk, w in zip(blocks, W):
                mm += blk.schur(w)
            if n_lp:
                mm += (a_lp * wlp) @ a_lp.T
            return _Schur(a_free, m=(mm + mm.T) / 2)

        stalled = [False]

        def direction(rc_blocks, rc_lp):
            h = rp.copy()
            for blk, rc, w, r in zip(blocks, rc_blocks, W, rd):
                h -= blk.apply(rc - w @ r @ w)
            if n_lp:
                h -= a_lp @ (rc_lp - wlp * rd_lp)
            dy, du = schur.solve(h, rf)
            dS = [r - blk.adjoint(dy) for blk, r in zip(blocks, rd)]
            dX = [rc - w @ ds @ w for rc, w, ds in zip(rc_blocks, W, dS)]
            dX = [(d + d.T) / 2 for d in dX]
            ds_lp = rd_lp - a_lp.T @ dy
            dx_lp = rc_lp - wlp * ds_lp
            # refine against the exact operator; the Schur matrix loses accuracy as mu -> 0
            err = math.inf
            for _ in range(3):
                ep = rp - sum((blk.apply(d) for blk, d in zip(blocks, dX)), np.zeros(m)) - a_lp @ dx_lp - a_free @ du
                ef = rf - a_free.T @ dy
                err = max(np.max(np.abs(ep), initial=0.0), np.max(np.abs(ef), initial=0.0))
                if err <= 1e-15 * (1.0 + b_inf):
                    break
                cy, cu = schur.solve(ep, ef)
                for k, (blk, w) in enumerate(zip(blocks, W)):
                    z = blk.adjoint(cy)
                    dS[k] = dS[k] - z
                    dX[k] = dX[k] + w @ z @ w
                    dX[k] = (dX[k] + dX[k].T) / 2
                if n_lp:
                    z = a_lp.T @ cy
                    ds_lp = ds_lp - z
                    dx_lp = dx_lp + wlp * z
                dy = dy + cy
                du = du + cu
            if err > 0.01 * opts.tol * (1.0 + b_inf):
                stalled[0] = True
            return dX, dx_lp, du, dy, dS, ds_lp

        for _attempt in range(2):
            stalled[0] = False
            try:
                schur = build_schur(precise)
            except np.linalg.LinAlgError:
                schur = None
                break

            # predictor
            rc_pred = [-xb for xb in X]
            dXa, dxa, dua, dya, dSa, dsa = direction(rc_pred, -x)
            ap = min(1.0, min([_max_step(xb, d) for xb, d in zip(X, dXa)] + [_max_step_lp(x, dxa)]))
            ad = min(1.0, min([_max_step(sb, d) for sb, d in zip(S, dSa)] + [_max_step_lp(s, dsa)]))
            mu_aff = (
                sum(float(np.sum((xb + ap * dx) * (sb + ad * ds))) for xb, dx, sb, ds in zip(X, dXa, S, dSa))
                + float((x + ap * dxa) @ (s + ad * dsa))
            ) / nu
            sigma = min(1.0, max(0.0, (mu_aff / mu) ** 3)) if mu > 0 else 0.0

            # corrector
            rc_corr = []
            for (g, ginv, v), dx, ds in zip(scal, dXa, dSa):
                dxt = ginv @ dx @ ginv.T
                dst = g.T @ ds @ g
                prod = (dxt @ dst + dst @ dxt) / 2
                rhat = sigma * mu * np.eye(len(v)) - np.diag(v * v) - prod
                z = 2.0 * rhat / (v[:, None] + v[None, :])
                rc_corr.append(g @ z @ g.T)
            rc_lp = (sigma * mu - x * s - dxa * dsa) / s if n_lp else np.zeros(0)
            dX, dx_lp, du, dy, dS, ds_lp = direction(rc_corr, rc_lp)
            if not stalled[0] or precise:
                break
            log.debug("switching to the factored schur complement")
            precise = True
        if schur is None:
            msg = "singular schur complement"
            break

        gamma = max(opts.step_fraction, 0.9 + 0.09 * min(ap, ad))
        gamma = min(gamma, 0.995)
        sp_ = min([_max_step(xb, d) for xb, d in zip(X, dX)] + [_max_step_lp(x, dx_lp)])
        sd_ = min([_max_step(sb, d) for sb, d in zip(S, dS)] + [_max_step_lp(s, ds_lp)])
        alpha_p = min(1.0, gamma * sp_)
        alpha_d = min(1.0, gamma * sd_)
        if alpha_p < 1e-12 and alpha_d < 1e-12:
            msg = "step length collapsed"
            break
        X = [xb + alpha_p * d for xb, d in zip(X, dX)]
        X = [(xb + xb.T) / 2 for xb in X]
        x = x + alpha_p * dx_lp
        u = u + alpha_p * du
        y = y + alpha_d * dy
        S = [sb + alpha_d * d for sb, d in zip(S, dS)]
        S = [(sb + sb.T) / 2 for sb in S]
        s = s + alpha_d * ds_lp
    return X, x, u, y, S, s, status, it, mu, msg


# ---------------------------------------------------------------------------
# plain-text interchange (SDPA sparse format), see docs/sdpa_format.md


def _aggregate(entries):
    acc: dict[tuple, float] = {}
    for key, v in entries:
        acc[key] = acc.get(key, 0.0) + v
    return [(k, v) for k, v in sorted(acc.items()) if v != 0.0]


def write_sdpa(p: SdpProblem, stream) -> None:
    """Write ``p`` in SDPA sparse format; free variables become pairs of lp columns."""
    n_diag = p.n_lp + 2 * p.n_free
    dims = list(p.block_dims) + ([-n_diag] if n_diag else [])
    diag_block = len(p.block_dims) + 1
    terms = []
    for k, ent in enumerate(p.entries):
        for row, i, j, v in ent:
            terms.append(((row + 1, k + 1, i + 1, j + 1), v if i == j else v / 2))
    for row, col, v in p.lp_entries:
        terms.append(((row + 1, diag_block, col + 1, col + 1), v))
    for row, col, v in p.free_entries:
        plus = p.n_lp + 2 * col + 1
        terms.append(((row + 1, diag_block, plus, plus), v))
        terms.append(((row + 1, diag_block, plus + 1, plus + 1), -v))
    # SDPA maximises <F0, Y>; our objective is minimised, so F0 = -C
    if p.c_blocks is not None:
        for k, c in enumerate(p.c_blocks):
            for i, j in zip(*np.triu_indices(c.shape[0])):
                if c[i, j] != 0:
                    terms.append(((0, k + 1, int(i) + 1, int(j) + 1), -float(c[i, j])))
    if p.c_lp is not None:
        for col, v in enumerate(np.asarray(p.c_lp, dtype=float)):
            terms.append(((0, diag_block, col + 1, col + 1), -float(v)))
    if p.c_free is not None:
        for col, v in enumerate(np.asarray(p.c_free, dtype=float)):
            plus = p.n_lp + 2 * col + 1
            terms.append(((0, diag_block, plus, plus), -float(v)))
            terms.append(((0, diag_block, plus + 1, plus + 1), float(v)))
    stream.write("* coposhier block-diagonal sdp\n")
    stream.write(f"* coposhier: n_lp={p.n_lp} n_free={p.n_free} feasibility={int(p.feasibility)}\n")
    stream.write(f"{p.m}\n{len(dims)}\n")
    stream.write(" ".join(str(d) for d in dims) + "\n")
    stream.write(" ".join(repr(float(v)) for v in p.b) + "\n")
    for (mat, blk, i, j), v in _aggregate(terms):
        stream.write(f"{mat} {blk} {i} {j} {float(v)!r}\n")


def read_sdpa(stream) -> SdpProblem:
    """Read a problem written by :func:`write_sdpa` (or any SDPA sparse file)."""
    meta = {"n_lp": None, "n_free": 0, "feasibility": 0}
    tokens: list[str] = []
    for line in stream:
        s = line.strip()
        if s.startswith("* coposhier:"):
            for part in s.split(":", 1)[1].split():
                key, _, val = part.partition("=")
                meta[key] = int(val)
            continue
        if not s or s[0] in "*\"":
            continue
        tokens.extend(s.replace(",", " ").replace("{", " ").replace("}", " ").replace("(", " ").replace(")", " ").split())
    try:
        m = int(tokens[0])
        nblocks = int(tokens[1])
        dims = [int(float(t)) for t in tokens[2 : 2 + nblocks]]
        pos = 2 + nblocks
        b = np.array([float(t) for t in tokens[pos : pos + m]])
        if b.shape[0] != m:
            raise SdpError("right-hand side is shorter than the constraint count")
        pos += m
        rest = tokens[pos:]
        if len(rest) % 5:
            raise SdpError("entry lines must have five fields")
        quads = [rest[k : k + 5] for k in range(0, len(rest), 5)]
    except (IndexError, ValueError) as exc:
        raise SdpError(f"malformed SDPA data: {exc}") from exc
    psd_index = {}
    psd_dims = []
    diag_block = None
    n_diag = 0
    for k, d in enumerate(dims):
        if d > 0:
            psd_index[k + 1] = len(psd_dims)
            psd_dims.append(d)
        else:
            if diag_block is not None:
                raise SdpError("only one diagonal block is supported")
            diag_block, n_diag = k + 1, -d
    n_free = meta["n_free"]
    n_lp = meta["n_lp"] if meta["n_lp"] is not None else n_diag - 2 * n_free
    if n_lp + 2 * n_free != n_diag:
        raise SdpError("diagonal block size disagrees with the free-variable header")
    entries = [[] for _ in psd_dims]
    c_blocks = [np.zeros((d, d)) for d in psd_dims]
    lp_entries, free_entries = [], []
    c_lp, c_free = np.zeros(n_lp), np.zeros(n_free)
    for q in quads:
        mat, blk, i, j = (int(t) for t in q[:4])
        v = float(q[4])
        i, j = min(i, j) - 1, max(i, j) - 1
        if blk in psd_index:
            k = psd_index[blk]
            if mat == 0:
                c_blocks[k][i, j] = c_blocks[k][j, i] = -v
            else:
                entries[k].append((mat - 1, i, j, v if i == j else 2 * v))
        elif blk == diag_block:
            if i != j:
                raise SdpError("diagonal block entries must be on the diagonal")
            if i < n_lp:
                if mat == 0:
                    c_lp[i] = -v
                else:
                    lp_entries.append((mat - 1, i, v))
            elif (i - n_lp) % 2 == 0:
                col = (i - n_lp) // 2
                if mat == 0:
                    c_free[col] = -v
                else:
                    free_entries.append((mat - 1, col, v))
        else:
            raise SdpError(f"entry refers to unknown block {blk}")
    return SdpProblem(
        block_dims=psd_dims,
        b=b,
        entries=entries,
        n_lp=n_lp,
        lp_entries=lp_entries,
        n_free=n_free,
        free_entries=free_entries,
        c_blocks=c_blocks,
        c_lp=c_lp,
        c_free=c_free,
        feasibility=bool(meta["feasibility"]),
    )
