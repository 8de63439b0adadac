"""Command-line front end: ``coposhier <subcommand> [options]``.

Every run prints one JSON document (``sweep`` prints JSON lines) whose
``header`` records the subcommand and the full option set.  Exit status is
0 for a definitive answer, 2 for Unknown and 1 for errors, which are
reported as ``{"error": {"type": ..., "message": ...}}``.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__
from .matrices import Graph, MatrixError, PsiParams, SymMatrix, graph_matrix, horn, identity, scale, t_psi
from .sdp import SolverOptions
from .sos.certificate import Certificate, CertificateError, verify_certificate
from .sos.cones import BOUND, ConeError, ConeId, family_from_name
from .sos.membership import (
    BoundError,
    MembershipOptions,
    Verdict,
    check_membership,
    find_min_level,
    lasserre_bound,
)
from .zeros import NonCopositive, ZeroError, enumerate_zeros, opt_dmd_report

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNKNOWN = 2

DEFAULT_PSI = ",".join([repr(math.pi / 10)] * 5)

log = logging.getLogger("coposhier")


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(message)


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise CliError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise CliError(f"expected comma-separated integers, got {text!r}") from exc


def parse_graph(text: str) -> Graph:
    """Edge list ``1-2,2-3,...`` with 1-based vertices; an optional ``n=<k>`` item fixes the order."""
    edges, n = [], 0
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if item.startswith("n="):
            n = max(n, int(item[2:]))
            continue
        try:
            u, v = (int(t) for t in item.split("-"))
        except ValueError as exc:
            raise CliError(f"bad edge {item!r}; use u-v with 1-based vertices") from exc
        if u < 1 or v < 1:
            raise CliError("vertices are numbered from 1")
        edges.append((u - 1, v - 1))
        n = max(n, u, v)
    if n == 0:
        raise CliError("graph needs at least one edge or n=<k>")
    return Graph.from_edges(n, edges)


def builtin_matrix(name: str, psi: tuple[float, ...]) -> SymMatrix:
    """Resolve ``horn``, ``tpsi``, ``graph:<edges>`` or ``identity:<n>``."""
    if name == "horn":
        return horn()
    if name == "tpsi":
        return t_psi(PsiParams(psi))
    if name.startswith("graph:"):
        return graph_matrix(parse_graph(name[len("graph:"):]))
    if name.startswith("identity:"):
        try:
            n = int(name[len("identity:"):])
        except ValueError as exc:
            raise CliError(f"bad identity size in {name!r}") from exc
        return identity(n)
    raise CliError(f"unknown built-in matrix {name!r} (horn, tpsi, graph:<edges>, identity:<n>)")


def load_matrix_file(path: str) -> SymMatrix:
    """Read a matrix JSON object, a bare list of rows, or the output of ``construct``."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise MatrixError(f"{path}: invalid JSON: {exc}") from exc
    if isinstance(data, dict) and "matrix" in data and "entries" not in data:
        data = data["matrix"]
    if isinstance(data, list):
        data = {"n": len(data), "entries": data}
    if not isinstance(data, dict):
        raise MatrixError(f"{path}: expected a matrix object")
    return SymMatrix.from_dict(data)


def resolve_matrix(args) -> SymMatrix:
    if args.matrix and args.matrix_file:
        raise CliError("give only one of --matrix and --matrix-file")
    if args.matrix_file:
        m = load_matrix_file(args.matrix_file)
    elif args.matrix:
        m = builtin_matrix(args.matrix, _floats(args.psi))
    else:
        raise CliError("a matrix is required (--matrix or --matrix-file)")
    if args.scale:
        m = scale(m, _floats(args.scale))
    return m


def membership_options(args) -> MembershipOptions:
    return MembershipOptions(
        res_tol=args.tol_res,
        eig_tol=args.tol_eig,
        sep_tol=args.tol_sep,
        witness_tol=args.tol_witness,
        rational=args.rational,
        max_denominator=args.max_denominator,
        max_block_dim=args.max_block,
        max_constraints=args.max_constraints,
        solver=SolverOptions(tol=args.solver_tol, max_iters=args.max_iters),
    )


def _json_float(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "-inf" if v < 0 else ("inf" if v > 0 else "nan")
    return v


def _clean(obj):
    """Make a result JSON-safe: non-finite floats become strings, numpy scalars become floats."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float):
        return _json_float(obj)
    return obj


# ---------------------------------------------------------------------------
# subcommands; each returns (result dict, exit code)


def cmd_construct(args):
    m = resolve_matrix(args)
    out = {"matrix": m.to_dict()}
    if args.out:
        _write(args.out, json.dumps(out["matrix"]))
        out["matrix_file"] = args.out
    return out, EXIT_OK


def _verdict_exit(v: Verdict) -> int:
    return EXIT_UNKNOWN if v == Verdict.UNKNOWN else EXIT_OK


def _cone_family(args) -> str:
    if args.cone is None:
        raise CliError("--cone is required")
    fam = family_from_name(args.cone)
    if fam == BOUND:
        raise CliError("use the bound subcommand for Lasserre bounds")
    return fam


def cmd_membership(args):
    m = resolve_matrix(args)
    if args.r is None:
        raise CliError("--r is required")
    cone = ConeId(_cone_family(args), args.r)
    res = check_membership(m, cone, membership_options(args))
    out = res.to_dict()
    out["exactly_verified"] = res.exactly_verified
    if res.certificate is not None and args.out:
        _write(args.out, res.certificate.to_json())
        out["certificate_file"] = args.out
    return out, _verdict_exit(res.verdict)


def cmd_bound(args):
    m = resolve_matrix(args)
    if args.r is None:
        raise CliError("--r is required")
    res = lasserre_bound(m, args.r, membership_options(args))
    out = {"r": args.r, "value": res.value, "diagnostics": res.diagnostics}
    if res.certificate is not None:
        out["residual"] = res.certificate.residual
        out["min_eig"] = res.certificate.min_eig
        if args.out:
            _write(args.out, res.certificate.to_json())
            out["certificate_file"] = args.out
    return out, EXIT_OK


def cmd_min_level(args):
    m = resolve_matrix(args)
    res = find_min_level(m, _cone_family(args), args.r_max, membership_options(args))
    unknown = any(r.verdict == Verdict.UNKNOWN for _, r in res.per_level)
    code = EXIT_OK if res.level is not None or not unknown else EXIT_UNKNOWN
    return res.to_dict(), code


def cmd_zeros(args):
    m = resolve_matrix(args)
    zs = enumerate_zeros(m)
    out = zs.to_dict()
    out["count"] = len(zs.zeros)
    return out, EXIT_OK


def cmd_optcheck(args):
    m = resolve_matrix(args)
    return opt_dmd_report(m).to_dict(), EXIT_OK


def cmd_verify(args):
    if not args.cert:
        raise CliError("--cert is required")
    try:
        with open(args.cert) as fh:
            cert = Certificate.from_json(fh.read())
    except OSError as exc:
        raise CliError(f"cannot read {args.cert}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CertificateError(f"invalid JSON: {exc}") from exc
    if args.matrix or args.matrix_file:
        m = resolve_matrix(args)
    elif cert.matrix is not None:
        m = cert.matrix
    else:
        raise CliError("certificate carries no matrix; pass --matrix or --matrix-file")
    residual, min_eig = verify_certificate(cert, m)
    lhs_scale = _target_scale(cert, m)
    valid = residual <= args.tol_res * lhs_scale and min_eig >= -args.tol_eig * lhs_scale
    out = {
        "cone": str(cert.cone),
        "residual": residual,
        "min_eig": min_eig,
        "scale": lhs_scale,
        "exact": cert.exact and residual == 0.0,
        "valid": bool(valid),
    }
    return out, EXIT_OK if valid else EXIT_UNKNOWN


def _target_scale(cert: Certificate, m: SymMatrix) -> float:
    from .sos.certificate import certificate_polynomials

    lhs, _ = certificate_polynomials(cert, m)
    return max(1e-300, lhs.max_abs_coeff()) if not lhs.is_zero() else 1.0


def random_suite_matrix(rng: np.random.Generator, n: int) -> SymMatrix:
    """Random symmetric matrix with unit diagonal and off-diagonal entries in [-1, 1]."""
    a = rng.uniform(-1.0, 1.0, size=(n, n))
    a = np.triu(a, 1)
    a = a + a.T + np.eye(n)
    return SymMatrix.from_array(a)


def _sweep_cell(task):
    label, mdict, cone_text, opts_dict = task
    m = SymMatrix.from_dict(mdict)
    cone = ConeId.parse(cone_text)
    opts = MembershipOptions(
        res_tol=opts_dict["res_tol"],
        eig_tol=opts_dict["eig_tol"],
        sep_tol=opts_dict["sep_tol"],
        witness_tol=opts_dict["witness_tol"],
        rational=opts_dict["rational"],
        max_denominator=opts_dict["max_denominator"],
        max_block_dim=opts_dict["max_block_dim"],
        max_constraints=opts_dict["max_constraints"],
        solver=SolverOptions(tol=opts_dict["solver_tol"], max_iters=opts_dict["max_iters"]),
    )
    rec = {"matrix": label, "cone": cone_text}
    try:
        res = check_membership(m, cone, opts)
    except (ConeError, MatrixError) as exc:
        rec.update({"verdict": None, "error": str(exc)})
        return rec
    d = res.to_dict()
    rec["verdict"] = d["verdict"]
    for key in ("residual", "min_eig", "margin", "exact"):
        if key in d:
            rec[key] = d[key]
    rec["iterations"] = res.diagnostics.get("iterations")
    if res.verdict == Verdict.UNKNOWN:
        rec["reason"] = res.diagnostics.get("reason")
    return rec


def sweep_cells(args) -> list[tuple]:
    matrices: list[tuple[str, SymMatrix]] = []
    if args.matrix or args.matrix_file:
        matrices.append((args.matrix or args.matrix_file, resolve_matrix(args)))
    if args.random:
        rng = np.random.default_rng(args.seed)
        for k in range(args.random):
            matrices.append((f"random{k}", random_suite_matrix(rng, args.n)))
    if not matrices:
        raise CliError("sweep needs --matrix/--matrix-file or --random <count>")
    families = [family_from_name(c) for c in (args.cones or args.cone or "K").split(",") if c.strip()]
    rs = _ints(args.levels) if args.levels else ([args.r] if args.r is not None else list(range(args.r_max + 1)))
    opts = membership_options(args).to_dict()
    cells = []
    for label, m in matrices:
        for fam in families:
            if fam == BOUND:
                raise CliError("sweep covers membership cones only")
            for r in rs:
                try:
                    cone = ConeId(fam, r)
                except ConeError:
                    continue
                cells.append((label, m.to_dict(), str(cone), opts))
    return cells


def run_sweep(args) -> tuple[list[dict], int]:
    cells = sweep_cells(args)
    if args.jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            records = list(pool.map(_sweep_cell, cells))
    else:
        records = [_sweep_cell(c) for c in cells]
    for k, rec in enumerate(records):
        rec["cell"] = k
    code = EXIT_UNKNOWN if any(r.get("verdict") == Verdict.UNKNOWN.value for r in records) else EXIT_OK
    return records, code


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    g = common.add_argument_group("input")
    g.add_argument("--matrix", help="built-in matrix: horn, tpsi, graph:<u-v,...>, identity:<n>")
    g.add_argument("--matrix-file", help="matrix JSON file: a matrix object, a list of rows, or construct output")
    g.add_argument("--psi", default=DEFAULT_PSI, help="five angles for tpsi, comma separated (default pi/10 each)")
    g.add_argument("--scale", help="positive diagonal d1,...,dn; the matrix becomes DMD")
    q = common.add_argument_group("query")
    q.add_argument("--cone", help="cone family: K, LASD, LASP, LASS or Q")
    q.add_argument("--r", type=int, help="hierarchy level")
    q.add_argument("--r-max", type=int, default=6, help="largest level for min-level and sweep (default 6)")
    q.add_argument("--rational", action="store_true", help="attempt an exact rational certificate")
    q.add_argument("--max-denominator", type=int, default=10**4)
    q.add_argument("--out", help="write the certificate (or, for construct, the matrix) JSON to this file")
    q.add_argument("--cert", help="certificate JSON file (verify)")
    t = common.add_argument_group("tolerances")
    t.add_argument("--tol-res", type=float, default=1e-7, help="certificate residual tolerance, relative")
    t.add_argument("--tol-eig", type=float, default=1e-8, help="gram eigenvalue tolerance, relative")
    t.add_argument("--tol-sep", type=float, default=1e-6, help="separation margin for infeasibility")
    t.add_argument("--tol-witness", type=float, default=1e-8, help="dual witness feasibility tolerance")
    t.add_argument("--solver-tol", type=float, default=1e-9)
    t.add_argument("--max-iters", type=int, default=200)
    t.add_argument("--max-block", type=int, default=200, help="largest admissible gram block")
    t.add_argument("--max-constraints", type=int, default=2000)
    o = common.add_argument_group("output")
    o.add_argument("--table", action="store_true", help="aligned text instead of JSON")
    s = common.add_argument_group("sweep")
    s.add_argument("--cones", help="comma-separated families for sweep")
    s.add_argument("--levels", help="comma-separated levels for sweep (default 0..r-max)")
    s.add_argument("--random", type=int, default=0, help="number of random matrices in sweep")
    s.add_argument("--n", type=int, default=4, help="size of random sweep matrices")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=1)

    parser = _Parser(prog="coposhier", description="Copositivity certificates in sum-of-squares hierarchies.")
    parser.add_argument("--version", action="version", version=f"coposhier {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="subcommand")
    helps = {
        "construct": "print a matrix as JSON",
        "membership": "decide membership in one cone",
        "bound": "Lasserre lower bound of the standard quadratic program",
        "min-level": "smallest certified level of a family",
        "zeros": "zeros of x^T M x on the simplex",
        "optcheck": "CQC, SCC and SOSC at every zero",
        "verify": "re-check a certificate file",
        "sweep": "grid of membership queries, one JSON line per cell",
    }
    for name, h in helps.items():
        sub.add_parser(name, parents=[common], help=h, description=h)
    return parser


COMMANDS = {
    "construct": cmd_construct,
    "membership": cmd_membership,
    "bound": cmd_bound,
    "min-level": cmd_min_level,
    "zeros": cmd_zeros,
    "optcheck": cmd_optcheck,
    "verify": cmd_verify,
}


def _header(args) -> dict:
    opts = {k: v for k, v in sorted(vars(args).items()) if k not in ("command", "table")}
    return {"tool": "coposhier", "version": __version__, "subcommand": args.command, "options": opts}


def _write(path: str, text: str):
    with open(path, "w") as fh:
        fh.write(text + "\n")


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield from _flatten(v, f"{prefix}{k}.")
    elif isinstance(obj, list) and obj and all(isinstance(v, (dict, list)) for v in obj):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}{i}.")
    else:
        yield prefix[:-1], obj


def render_table(result) -> str:
    if isinstance(result, list):
        cols = []
        for rec in result:
            cols += [k for k in rec if k not in cols]
        rows = [[str(rec.get(c, "")) for c in cols] for rec in result]
        widths = [max(len(c), *(len(r[i]) for r in rows)) for i, c in enumerate(cols)]
        lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
        lines += ["  ".join(v.ljust(w) for v, w in zip(r, widths)) for r in rows]
        return "\n".join(lines)
    items = list(_flatten(result))
    width = max((len(k) for k, _ in items), default=0)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in items)


def _setup_logging():
    level = os.environ.get("COPOSHIER_LOG", "quiet").lower()
    levels = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.WARNING), stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def _emit_error(exc: Exception, out) -> int:
    err = {"type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, NonCopositive):
        err["witness"] = [float(v) for v in exc.witness]
        err["value"] = exc.value
    if isinstance(exc, BoundError):
        err["diagnostics"] = exc.diagnostics
    out.write(json.dumps(_clean({"error": err})) + "\n")
    return EXIT_ERROR


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise CliError("a subcommand is required: " + ", ".join(["construct", *COMMANDS.keys() - {"construct"}, "sweep"]))
        if args.command == "sweep":
            records, code = run_sweep(args)
            if args.table:
                out.write(render_table(records) + "\n")
            else:
                out.write(json.dumps(_clean({"header": _header(args)}), sort_keys=True) + "\n")
                for rec in records:
                    out.write(json.dumps(_clean(rec), sort_keys=True) + "\n")
            return code
        result, code = COMMANDS[args.command](args)
        if args.table:
            out.write(render_table(_clean(result)) + "\n")
        else:
            out.write(json.dumps(_clean({"header": _header(args), **result}), indent=1) + "\n")
        return code
    except (CliError, MatrixError, ConeError, CertificateError, ZeroError, BoundError, ValueError) as exc:
        return _emit_error(exc, out)


if __name__ == "__main__":
    raise SystemExit(main())
