"""Membership verdicts, Lasserre bounds and minimal-level search."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from ..matrices import SymMatrix
from ..poly import Polynomial, divide_by_simplex_generator, quad_form
from ..sdp import SdpProblem, SolverOptions, Status, solve
from .certificate import Certificate, verify_certificate
from .cones import ConeError, ConeId, levels
from .formulate import SosProblem, formulate, formulate_bound, target_scale
from .rational import rationalize

log = logging.getLogger(__name__)


class LevelTooLarge(ConeError):
    """The requested level produces an SDP beyond the configured size cap."""


class BoundError(RuntimeError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


class Verdict(str, enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    UNKNOWN = "unknown"


@dataclass
class MembershipOptions:
    res_tol: float = 1e-7
    eig_tol: float = 1e-8
    sep_tol: float = 1e-6
    witness_tol: float = 1e-8
    rational: bool = False
    max_denominator: int = 10**4
    max_block_dim: int = 200
    max_constraints: int = 2000
    solver: SolverOptions = field(default_factory=SolverOptions)

    def to_dict(self) -> dict:
        return {
            "res_tol": self.res_tol,
            "eig_tol": self.eig_tol,
            "sep_tol": self.sep_tol,
            "witness_tol": self.witness_tol,
            "rational": self.rational,
            "max_denominator": self.max_denominator,
            "max_block_dim": self.max_block_dim,
            "max_constraints": self.max_constraints,
            "solver_tol": self.solver.tol,
            "max_iters": self.solver.max_iters,
        }


@dataclass
class MembershipResult:
    verdict: Verdict
    cone: ConeId
    certificate: Certificate | None = None
    margin: float | None = None
    witness: dict | None = None  # monomial text -> pseudo-moment value
    diagnostics: dict = field(default_factory=dict)

    @property
    def exactly_verified(self) -> bool:
        return self.certificate is not None and self.certificate.exact

    def to_dict(self) -> dict:
        out = {"verdict": self.verdict.value, "cone": str(self.cone)}
        if self.verdict == Verdict.FEASIBLE and self.certificate is not None:
            out["residual"] = self.certificate.residual
            out["min_eig"] = self.certificate.min_eig
            out["exact"] = self.certificate.exact
        if self.margin is not None:
            out["margin"] = self.margin
        out["diagnostics"] = self.diagnostics
        return out


def _check_size(prob: SosProblem, opts: MembershipOptions):
    big = max((b.dim for b in prob.blocks), default=0)
    if big > opts.max_block_dim or prob.n_constraints > opts.max_constraints:
        raise LevelTooLarge(
            f"level exceeds configured cap: {prob.cone} has a Gram block of size {big} and "
            f"{prob.n_constraints} constraints (caps {opts.max_block_dim} / {opts.max_constraints})"
        )


def _estimated_size(m: SymMatrix, cone: ConeId) -> tuple[int, int]:
    """Largest Gram size and constraint count without building the problem."""
    from math import comb

    n, r = m.n, cone.r
    fam = cone.family
    if fam in ("K", "LASS"):
        k = r if fam == "K" else r // 2 - 2
        return comb(n + k + 1, n - 1), comb(n + 2 * k + 3, n - 1)
    if fam in ("LASD", "LASP"):
        return comb(n + r // 2 - 1, n - 1), comb(n + r - 1, n - 1)
    if fam == "Q":
        return n, comb(n + r + 1, n - 1)
    return 0, 0


def precheck_size(m: SymMatrix, cone: ConeId, opts: MembershipOptions):
    big, rows = _estimated_size(m, cone)
    if big > opts.max_block_dim or rows > opts.max_constraints:
        raise LevelTooLarge(
            f"level exceeds configured cap: {cone} needs a Gram block of size {big} and "
            f"{rows} constraints (caps {opts.max_block_dim} / {opts.max_constraints})"
        )


def _split_solution(prob: SosProblem, sol, scale: float) -> list[list[list[float]]]:
    """Map SDP variables back to one Gram matrix per block of ``prob``."""
    grams = []
    k_psd = 0
    k_lp = 0
    for blk in prob.blocks:
        if blk.is_scalar:
            grams.append([[float(sol.x_lp[k_lp]) * scale]])
            k_lp += 1
        else:
            grams.append((sol.X[k_psd] * scale).tolist())
            k_psd += 1
    return grams


def _witness_check(sdp: SdpProblem, w: np.ndarray) -> tuple[float, float]:
    """Return (objective b.w, dual violation) for a normalised pseudo-moment vector."""
    blocks, lp, _ = sdp.adjoint(w)
    trace = sum(float(np.trace(z)) for z in blocks) + float(lp.sum())
    if trace <= 0:
        # only possible for a Farkas vector of inconsistent equalities
        viol = max([float(np.max(np.abs(z))) for z in blocks if z.size] + [float(np.max(np.abs(lp))) if lp.size else 0.0] + [0.0])
        return float(sdp.b @ w), viol
    w = w / trace
    eigs = [float(np.linalg.eigvalsh(z)[0]) for z in blocks if z.size]
    eigs += [float(lp.min())] if lp.size else []
    viol = max(0.0, -min(eigs)) if eigs else 0.0
    return float(sdp.b @ w), viol


def check_membership(m: SymMatrix, cone: ConeId, opts: MembershipOptions | None = None) -> MembershipResult:
    """Decide membership of ``m`` in ``cone`` with a certificate or a separating witness."""
    opts = opts or MembershipOptions()
    precheck_size(m, cone, opts)
    prob = formulate(m, cone)
    _check_size(prob, opts)
    scale = target_scale(prob)
    sdp = prob.lower(scale)
    sol = solve(sdp, opts.solver)
    diag = {
        "solver_status": sol.status.value,
        "iterations": sol.iterations,
        "lambda": None if sol.lam is None or not np.isfinite(sol.lam) else sol.lam,
        "primal_residual": sol.primal_residual,
        "dual_residual": sol.dual_residual,
        "gap": sol.gap if np.isfinite(sol.gap) else None,
        "scale": scale,
        "gram_sizes": [b.dim for b in prob.blocks],
        "constraints": prob.n_constraints,
    }
    log.info("%s: status %s lambda %s after %d iterations", cone, sol.status.value, sol.lam, sol.iterations)
    if sol.status == Status.NUMERICAL_TROUBLE:
        diag["reason"] = f"solver: {sol.message}"
        return MembershipResult(Verdict.UNKNOWN, cone, diagnostics=diag)

    if sol.lam >= -opts.eig_tol:
        grams = _split_solution(prob, sol, scale)
        cert = Certificate(cone=cone, blocks=prob.blocks, grams=grams, matrix=m)
        cert.residual, cert.min_eig = verify_certificate(cert, m)
        if opts.rational:
            outcome = rationalize(prob, grams, opts.max_denominator)
            diag["rational"] = "exact" if outcome.exact else outcome.reason
            if outcome.exact:
                exact_cert = Certificate(cone=cone, blocks=prob.blocks, grams=outcome.grams, matrix=m, exact=True)
                exact_cert.residual, exact_cert.min_eig = verify_certificate(exact_cert, m)
                if exact_cert.residual == 0 and exact_cert.min_eig >= -opts.eig_tol * scale:
                    cert = exact_cert
                else:
                    diag["rational"] = "exact re-expansion failed"
        if cert.residual <= opts.res_tol * scale and cert.min_eig >= -opts.eig_tol * scale:
            return MembershipResult(Verdict.FEASIBLE, cone, certificate=cert, diagnostics=diag)
        diag["reason"] = f"certificate failed verification (residual {cert.residual:.3e}, min_eig {cert.min_eig:.3e})"
        return MembershipResult(Verdict.UNKNOWN, cone, diagnostics=diag)

    w = sol.witness
    dual_obj, viol = _witness_check(sdp, w)
    diag["witness_objective"] = dual_obj
    diag["witness_violation"] = viol
    if dual_obj <= -opts.sep_tol and viol <= opts.witness_tol:
        witness = {}
        for e, val in zip(prob.rows, w):
            witness[Polynomial.monomial(e).to_text()] = float(val)
        return MembershipResult(Verdict.INFEASIBLE, cone, margin=-dual_obj, witness=witness, diagnostics=diag)
    diag["reason"] = "margin inside the tolerance band"
    return MembershipResult(Verdict.UNKNOWN, cone, diagnostics=diag)


# ---------------------------------------------------------------------------


@dataclass
class BoundResult:
    value: float
    certificate: Certificate | None
    diagnostics: dict = field(default_factory=dict)


def lasserre_bound(m: SymMatrix, r: int, opts: MembershipOptions | None = None) -> BoundResult:
    """Order-``r`` Lasserre lower bound for min x^T M x over the standard simplex."""
    opts = opts or MembershipOptions()
    prob = formulate_bound(m, r)
    _check_size(prob, opts)
    scale = target_scale(prob)
    sdp = prob.lower(scale)
    sol = solve(sdp, opts.solver)
    diag = {
        "solver_status": sol.status.value,
        "iterations": sol.iterations,
        "primal_residual": sol.primal_residual,
        "dual_residual": sol.dual_residual,
        "gap": sol.gap,
        "gram_sizes": [b.dim for b in prob.blocks],
        "constraints": prob.n_constraints,
    }
    if sol.status == Status.PRIMAL_INFEASIBLE:
        # no identity of this order exists for any lambda: the bound is -infinity
        dual_obj, viol = _witness_check(sdp, sol.farkas)
        diag["reason"] = sol.message
        diag["witness_objective"] = dual_obj
        diag["witness_violation"] = viol
        if dual_obj < 0 and viol <= opts.witness_tol:
            return BoundResult(float("-inf"), None, diag)
    if sol.status != Status.OPTIMAL:
        # an early ray or a stalled solve: settle it with the max-margin form,
        # whose separating witness proves that no lambda admits an identity
        if _bound_is_minus_infinity(prob, scale, opts, diag):
            return BoundResult(float("-inf"), None, diag)
        raise BoundError(f"bound solve ended with {sol.status.value}: {sol.message}", diag)
    t = float(sol.x_lp[-1]) * scale
    value = float(prob.anchor) - t
    grams = _split_solution(prob, sol, scale)
    n = m.n
    lhs = quad_form(m) - Polynomial.constant(n, value)
    rest = lhs
    for blk, g in zip(prob.blocks, grams):
        rest = rest - blk.polynomial(g)
    q, _ = divide_by_simplex_generator(rest)
    cert = Certificate(cone=prob.cone, blocks=prob.blocks, grams=grams, value=value, multiplier_q=q, matrix=m)
    cert.residual, cert.min_eig = verify_certificate(cert, m)
    diag["dual_value"] = float(prob.anchor) - float(sol.dual_objective) * scale
    return BoundResult(value, cert, diag)


def _bound_is_minus_infinity(prob: SosProblem, scale: float, opts: MembershipOptions, diag: dict) -> bool:
    sdp = prob.lower(scale, feasibility=True)
    sol = solve(sdp, opts.solver)
    diag["margin_status"] = sol.status.value
    if sol.status == Status.NUMERICAL_TROUBLE or sol.lam >= -opts.eig_tol:
        return False
    dual_obj, viol = _witness_check(sdp, sol.witness)
    diag["witness_objective"] = dual_obj
    diag["witness_violation"] = viol
    return dual_obj <= -opts.sep_tol and viol <= opts.witness_tol


# ---------------------------------------------------------------------------


@dataclass
class MinLevelResult:
    family: str
    level: int | None
    per_level: list[tuple[int, MembershipResult]]

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "level": self.level,
            "per_level": [{"r": r, **res.to_dict()} for r, res in self.per_level],
        }


def find_min_level(m: SymMatrix, family: str, r_max: int = 6, opts: MembershipOptions | None = None) -> MinLevelResult:
    """Smallest admissible level up to ``r_max`` at which ``m`` is certified."""
    opts = opts or MembershipOptions()
    per_level = []
    for r in levels(family, r_max):
        res = check_membership(m, ConeId(family, r), opts)
        per_level.append((r, res))
        if res.verdict == Verdict.FEASIBLE:
            return MinLevelResult(family, r, per_level)
    return MinLevelResult(family, None, per_level)
