"""Command line front end: ``fdefamily {check,solve,family,oracle} --config FILE``.

Exit codes: 0 success, 1 usage or configuration error, 2 hypotheses
infeasible, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from fdefamily import __version__
from fdefamily.analysis import CONVENTIONS, build_family, family_mesh, reconstruct_x
from fdefamily.config import Config, load_config
from fdefamily.errors import (
    ConfigurationError,
    FdeFamilyError,
    InfeasibleExponentError,
    NumericalFailureError,
    RangeError,
)
from fdefamily.hypothesis import (
    HypothesisCertificate,
    SearchRanges,
    check_certificate,
    check_exponents,
    lipschitz_floor,
    search_feasible,
)
from fdefamily.nonlinearity import NonlinearityEnvelope, envelope_for
from fdefamily.quadrature import empirical_orders, write_columns_csv
from fdefamily.solver import LOWER_ENVELOPE, ZERO, closed_form_for, picard_solve
from fdefamily.svg import line_plot

log = logging.getLogger("fdefamily")

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_NONCONVERGED = 0, 1, 2, 3
OUT_ENV = "FDEFAMILY_OUT"


class Run:
    """A run directory ``<out>/<run-id>`` plus its manifest."""

    def __init__(self, command: str, cfg: Config, args: argparse.Namespace):
        if args.out is not None:
            base, source = Path(args.out), "flag"
        elif os.environ.get(OUT_ENV):
            base, source = Path(os.environ[OUT_ENV]), f"env:{OUT_ENV}"
        else:
            base, source = Path("runs"), "default"

        stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%S%fZ")
        run_id = f"{command}-{stamp}-seed{args.seed}"
        path = base / run_id
        suffix = 1
        while path.exists():
            suffix += 1
            path = base / f"{run_id}-{suffix}"
        path.mkdir(parents=True)

        self.path = path
        self.quiet = args.quiet
        self.manifest = {
            "run_id": path.name,
            "command": command,
            "tool_version": __version__,
            "seed": args.seed,
            "jobs": args.jobs,
            "out_dir": str(base),
            "out_dir_source": source,
            "config_path": str(cfg.path),
            "config_snapshot": cfg.text,
            "outputs": [],
            "verdicts": {},
        }

    def file(self, name: str) -> Path:
        self.manifest["outputs"].append(name)
        return self.path / name

    def write_text(self, name: str, text: str) -> None:
        self.file(name).write_text(text, encoding="utf-8")

    def say(self, msg: str) -> None:
        if not self.quiet:
            print(msg)

    def finish(self, code: int) -> int:
        self.manifest["exit_code"] = code
        (self.path / "manifest.json").write_text(
            json.dumps(self.manifest, indent=2, sort_keys=False) + "\n", encoding="utf-8"
        )
        self.say(f"run directory: {self.path}")
        return code


def _convention(cfg: Config) -> str:
    conv = cfg.raw("problem", "convention")
    if conv is None:
        raise ConfigurationError(
            f"{cfg.path}: missing [problem] convention (one of {', '.join(CONVENTIONS)})"
        )
    if conv not in CONVENTIONS:
        raise cfg.error("problem", "convention", f"expected one of {CONVENTIONS}, got {conv!r}")
    return conv


def _mesh_params(cfg: Config, default_n: int = 512) -> tuple[int, float]:
    n = cfg.get_int("mesh", "n", default_n)
    grading = cfg.get_float("mesh", "grading", 2.0)
    if n < 2:
        raise cfg.error("mesh", "n", f"must be >= 2: {n}")
    if grading < 1.0:
        raise cfg.error("mesh", "grading", f"must be >= 1: {grading}")
    return n, grading


def _solver_params(cfg: Config) -> tuple[float, int]:
    tol = cfg.get_float("solver", "tol", 1e-10)
    max_iter = cfg.get_int("solver", "max_iter", 500)
    if not tol > 0:
        raise cfg.error("solver", "tol", f"must be positive: {tol}")
    if max_iter < 1:
        raise cfg.error("solver", "max_iter", f"must be >= 1: {max_iter}")
    return tol, max_iter


def _T(cfg: Config) -> float:
    T = cfg.get_float("problem", "T", required=True)
    if not 0.0 < T < 1.0:
        raise cfg.error("problem", "T", f"must lie in (0, 1): {T}")
    return T


# {{{ check


def _envelope(cfg: Config, spec, beta) -> tuple[NonlinearityEnvelope, str]:
    keys = ("c1", "c2", "delta1", "delta2", "c_lip")
    given = {k: cfg.get_float("hypothesis", k) for k in keys}
    if all(v is not None for v in given.values()):
        return NonlinearityEnvelope(**given), "user"
    env, source = envelope_for(spec, given["delta1"], given["delta2"], c_lip=given["c_lip"])
    if given["c1"] is not None or given["c2"] is not None:
        env = NonlinearityEnvelope(given["c1"] or env.c1, given["c2"] or env.c2,
                                   env.delta1, env.delta2, env.c_lip)
    return env, source


def _ranges(cfg: Config) -> SearchRanges:
    kw = {}
    for key in ("Y1", "Y2", "T"):
        v = cfg.float_list("hypothesis", f"{key}_range")
        if v is not None:
            if len(v) != 2:
                raise cfg.error("hypothesis", f"{key}_range", "expected 'lo, hi'")
            kw[key] = tuple(v)
    grid = cfg.get_int("hypothesis", "grid")
    if grid is not None:
        kw["grid"] = grid
    try:
        return SearchRanges(**kw)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{cfg.path} [hypothesis]: {exc}") from None


def cmd_check(cfg: Config, args) -> int:
    beta = cfg.beta()
    spec = cfg.nonlinearity()
    env, source = _envelope(cfg, spec, beta)
    fixed = [cfg.get_float("hypothesis", k) for k in ("Y1", "Y2", "T")]
    if any(v is not None for v in fixed) and not all(v is not None for v in fixed):
        raise ConfigurationError(f"{cfg.path}: give all of [hypothesis] Y1, Y2, T or none")
    ranges = _ranges(cfg) if fixed[0] is None else None

    run = Run("check", cfg, args)
    cert = None
    if fixed[0] is not None:
        try:
            cert = HypothesisCertificate.build(beta, env, *fixed)
            report = check_certificate(cert)
        except InfeasibleExponentError:
            report = check_exponents(beta, env)
        mode = "given"
    else:
        result = search_feasible(spec, beta, ranges, args.seed, env=env)
        cert, report = result.certificate, result.report
        mode = "search"

    doc = report.as_dict()
    doc.update({
        "mode": mode,
        "evidence": "grid search, not a proof" if mode == "search" else "direct evaluation",
        "c_lip_source": source,
        "lipschitz_floor": lipschitz_floor(env),
        "envelope": {"c1": env.c1, "c2": env.c2, "delta1": env.delta1,
                     "delta2": env.delta2, "c_lip": env.c_lip},
        "beta": beta,
    })
    run.write_text("report.json", json.dumps(doc, indent=2) + "\n")
    if cert is not None:
        run.write_text("certificate.txt", cert.to_text())

    run.manifest["verdicts"] = {"pass": report.passed, "binding": report.binding.name}
    if report.passed:
        run.say(f"PASS: all hypotheses hold (tightest: {report.binding.expr})")
        return run.finish(EXIT_OK)
    run.say(f"INFEASIBLE: binding constraint {report.binding.expr} "
            f"(margin {report.binding.margin:.6g})")
    return run.finish(EXIT_INFEASIBLE)


# }}}


# {{{ solve


def cmd_solve(cfg: Config, args) -> int:
    beta = cfg.beta()
    g = cfg.nonlinearity()
    T = _T(cfg)
    n, grading = _mesh_params(cfg)
    tol, max_iter = _solver_params(cfg)
    convention = _convention(cfg)
    init = cfg.raw("solver", "init", LOWER_ENVELOPE)
    if init not in (LOWER_ENVELOPE, ZERO):
        raise cfg.error("solver", "init", f"expected {LOWER_ENVELOPE!r} or {ZERO!r}, got {init!r}")

    mesh = family_mesh(T, n, grading)
    run = Run("solve", cfg, args)
    try:
        y, trace = picard_solve(g, beta, T, mesh, init=init, tol=tol, max_iter=max_iter)
    except (NumericalFailureError, RangeError) as exc:
        run.manifest["verdicts"] = {"converged": False, "error": str(exc)}
        run.say(f"numerical failure: {exc}")
        return run.finish(EXIT_NONCONVERGED)

    x = reconstruct_x(y, 1.0 - beta, convention)
    y.to_csv(run.file("y.csv"))
    x.to_csv(run.file("x.csv"))
    trace.to_csv(run.file("trace.csv"))
    run.write_text("solution.svg", line_plot(
        [("y", y.t, y.values), (f"x ({convention})", x.t, x.values)],
        title=f"T={T:g}, beta={beta:g}, g={g.describe()}", ylabel="value",
    ))

    run.manifest["verdicts"] = {
        "converged": trace.converged,
        "iterations": trace.iterations,
        "residual": trace.residual,
        "y_at_1": float(y.values[-1]),
        "x_at_1": float(x.values[-1]),
    }
    run.say(f"{'converged' if trace.converged else 'NOT converged'} after "
            f"{trace.iterations} iterations, residual {trace.residual:.3e}, "
            f"y(1) = {y.values[-1]:.12g}")
    return run.finish(EXIT_OK if trace.converged else EXIT_NONCONVERGED)


# }}}


# {{{ family


def cmd_family(cfg: Config, args) -> int:
    beta = cfg.beta()
    g = cfg.nonlinearity()
    Ts = cfg.float_list("family", "T_list", required=True)
    if not Ts:
        raise cfg.error("family", "T_list", "must not be empty")
    if any(b <= a for a, b in zip(Ts, Ts[1:])):
        raise cfg.error("family", "T_list", f"must be strictly increasing: {Ts}")
    if any(not 0.0 < T < 1.0 for T in Ts):
        raise cfg.error("family", "T_list", f"every T must lie in (0, 1): {Ts}")
    n, grading = _mesh_params(cfg)
    tol, max_iter = _solver_params(cfg)
    convention = _convention(cfg)
    caputo_tol = cfg.get_float("family", "caputo_tol", 5e-3)

    run = Run("family", cfg, args)
    try:
        fam = build_family(g, beta, Ts, n, tol, convention=convention, grading=grading,
                           max_iter=max_iter, caputo_tol=caputo_tol, jobs=args.jobs)
    except (NumericalFailureError, RangeError) as exc:
        run.manifest["verdicts"] = {"complete": False, "error": str(exc)}
        run.say(f"numerical failure: {exc}")
        return run.finish(EXIT_NONCONVERGED)

    members = []
    for i, m in enumerate(fam.entries):
        name = f"member_{i:02d}_T{m.T:.6g}.csv"
        write_columns_csv(run.file(name), ("t", "y", "x"), (m.y.t, m.y.values, m.x.values))
        members.append({
            "T": m.T, "file": name, "converged": m.converged, "iterations": m.iterations,
            "fixed_point_residual": m.fixed_point_residual, **m.residual.as_dict(),
        })
    run.write_text("family.svg", line_plot(
        [(f"T={m.T:g}", m.x.t, m.x.values) for m in fam.entries],
        title=f"x_T for beta={beta:g} ({convention})", ylabel="x",
    ))

    run.manifest["members"] = members
    run.manifest["pairwise_distances"] = [
        {"T_i": a, "T_j": b, "sup_distance": d} for (a, b), d in fam.distances.items()
    ]
    run.manifest["verdicts"] = {
        "complete": not fam.incomplete,
        "incomplete": fam.incomplete,
        "distinct": fam.distinct,
        "witness": fam.is_witness,
    }
    ok = not fam.incomplete and fam.distinct
    run.say(f"{len(fam.entries)} members, converged: {not fam.incomplete}, "
            f"distinct: {fam.distinct}, multiplicity witness: {fam.is_witness}")
    if fam.incomplete:
        run.say(f"non-converged members: T = {fam.incomplete}")
    return run.finish(EXIT_OK if ok else EXIT_NONCONVERGED)


# }}}


# {{{ oracle


def cmd_oracle(cfg: Config, args) -> int:
    beta = cfg.beta()
    g = cfg.nonlinearity()
    T = _T(cfg)
    exact = closed_form_for(g, beta, T)
    n, grading = _mesh_params(cfg, default_n=128)
    ladder = cfg.float_list("mesh", "ladder")
    ladder = [int(v) for v in ladder] if ladder else [n, 2 * n, 4 * n]
    tol, max_iter = _solver_params(cfg)

    run = Run("oracle", cfg, args)
    errors, converged = [], []
    for m in ladder:
        mesh = family_mesh(T, m, grading)
        y, trace = picard_solve(g, beta, T, mesh, tol=tol, max_iter=max_iter)
        errors.append(float(np.max(np.abs(y.values - exact(mesh.nodes)))))
        converged.append(trace.converged)
    orders = empirical_orders(errors)
    write_columns_csv(run.file("oracle.csv"), ("n", "sup_error", "order"),
                      (ladder, errors, [""] + ["%.17g" % o for o in orders]))

    decreasing = all(b < a for a, b in zip(errors, errors[1:]))
    report = {
        "A": exact.A, "gamma": exact.gamma, "T": T, "beta": beta,
        "ladder": ladder, "sup_errors": errors, "orders": orders,
        "converged": converged, "strictly_decreasing": decreasing,
    }
    run.write_text("oracle.json", json.dumps(report, indent=2) + "\n")
    run.manifest["verdicts"] = {"converged": all(converged), "strictly_decreasing": decreasing}
    for m, e in zip(ladder, errors):
        run.say(f"n={m:6d}  sup-error {e:.3e}")
    return run.finish(EXIT_OK if all(converged) else EXIT_NONCONVERGED)


# }}}


COMMANDS = {"check": cmd_check, "solve": cmd_solve, "family": cmd_family, "oracle": cmd_oracle}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdefamily",
        description="Construct and verify solution families of x^(alpha) = g(x), x(0) = 0.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__name__.replace("cmd_", "") + " workflow")
        p.add_argument("--config", required=True, help="configuration file")
        p.add_argument("--out", default=None,
                       help=f"output base directory (default: ${OUT_ENV} or ./runs)")
        p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
        p.add_argument("--jobs", type=int, default=1, help="concurrent member solves")
        p.add_argument("--quiet", action="store_true", help="suppress progress output")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK

    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.seed < 0 or args.jobs < 1:
        print("error: --seed must be >= 0 and --jobs >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FdeFamilyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
