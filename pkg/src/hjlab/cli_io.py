"""Config files, experiment drivers and report files.

A run is described by an INI file with the sections ``[domain]``,
``[grid]``, ``[problem]``, ``[sweep]`` and ``[output]``::

    [domain]
    extents = 0 1
    T = 1

    [grid]
    cells = 1024
    dt = auto

    [problem]
    hamiltonian = zero
    terminal = kink
    source = zero

    [sweep]
    kind = heat_baseline
    epsilons = 1e-2, 1e-3, 1e-4

    [output]
    dir = out
    formats = csv, json, dat

Catalog parameters are passed as ``terminal.<name>`` and ``source.<name>``
keys in ``[problem]``.  Exit codes: 0 when every check passes, 2 when the
resolution cannot support a verdict, 1 for failed checks and hard errors.
Hard errors leave no report files behind.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import math
import os
import re
import shutil
import sys
import tempfile
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, HJLabError, InconclusiveResolution
from .estimates import (
    delta_u_plus_bound,
    duality_residual,
    gradient_sq_field,
    lipschitz_certificate,
    missing_hypotheses,
    weighted_second_order,
    second_order_K,
)
from .fp_adjoint import MASS_RTOL, NEG_TOL, drift_from_solution, solve_adjoint
from .grid import ScalarField, boundary_normal_difference, build_grid, central_gradient
from .hamiltonian import KINDS as HAMILTONIANS
from .hamiltonian import HamiltonianSpec
from .hj_solver import ProblemSpec, solve_viscous
from .rate_lab import KINDS, RateReport, SweepPlan, run_sweep

log = logging.getLogger("hjlab")

VERIFY_SCHEMA = "hjlab.verify-report/1"
FORMATS = ("csv", "json", "dat")
CSV_COLUMNS = ("epsilon", "sup_error", "pos_error", "neg_error", "bound_upper", "bound_lower", "pass", "fit")

_KEYS = {
    "domain": {"extents", "T"},
    "grid": {"cells", "dt", "ref_factor", "snapshots"},
    "problem": {"hamiltonian", "gamma", "delta", "p_nodes", "h_values", "terminal", "source"},
    "sweep": {"kind", "epsilons", "tau", "x0", "eta", "beta", "alpha", "drop_factor",
              "resolution_ratio", "threads"},
    "output": {"dir", "formats", "stem"},
}
_PARAM_PREFIXES = ("terminal.", "source.")


@dataclass
class RunConfig:
    kind: str
    extents: tuple[tuple[float, float], ...]
    cells: tuple[int, ...]
    T: float
    epsilons: tuple[float, ...]
    hamiltonian: HamiltonianSpec
    terminal: str = "constant"
    source: str = "zero"
    terminal_params: dict = field(default_factory=dict)
    source_params: dict = field(default_factory=dict)
    dt: float | None = None
    ref_factor: int = 8
    snapshots: int = 16
    tau: float = 0.0
    x0: tuple[float, ...] | None = None
    eta: float | None = None
    beta: float = 0.75
    alpha: float = 1.5
    drop_factor: float = 3.0
    resolution_ratio: float = 0.1
    threads: int | None = None
    out_dir: str = "."
    formats: tuple[str, ...] = FORMATS
    stem: str = "report"
    path: str | None = None

    def problem(self) -> ProblemSpec:
        grid = build_grid(self.extents, self.cells)
        return ProblemSpec(grid, self.T, self.hamiltonian, self.terminal, self.source,
                           dict(self.terminal_params), dict(self.source_params))

    def plan(self, problem: ProblemSpec | None = None, kind: str | None = None) -> SweepPlan:
        return SweepPlan(
            problem or self.problem(), self.epsilons, kind=kind or self.kind,
            ref_factor=self.ref_factor, dt=self.dt, snapshots=self.snapshots, tau=self.tau,
            beta=self.beta, alpha=self.alpha, drop_factor=self.drop_factor,
            resolution_ratio=self.resolution_ratio, threads=self.threads,
        )

    def echo(self) -> dict:
        d = asdict(self)
        d["hamiltonian"] = self.hamiltonian.name
        d["dt"] = "auto" if self.dt is None else self.dt
        return _jsonable(d)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# parsing


def _key_lines(text: str) -> dict[tuple[str, str], int]:
    """Line number of every ``key = value`` pair, by section."""
    lines, section = {}, None
    for no, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
        elif section and s and s[0] not in "#;" and re.match(r"[^=:]+[=:]", s):
            key = re.split(r"[=:]", s, maxsplit=1)[0].strip()
            lines[(section, key)] = no
    return lines


class _Reader:
    """Typed access to a parsed config that reports errors with file and line."""

    def __init__(self, cp: configparser.ConfigParser, lines: dict, path: str):
        self.cp, self.lines, self.path = cp, lines, path

    def where(self, section, key=None) -> str:
        no = self.lines.get((section, key)) if key else None
        return f"{self.path}:{no}" if no else self.path

    def fail(self, section, key, msg):
        raise ConfigError(f"{self.where(section, key)}: [{section}] {key}: {msg}")

    def raw(self, section, key, default=None):
        if self.cp.has_option(section, key):
            return self.cp.get(section, key).strip()
        return default

    def number(self, section, key, default=None, kind=float):
        v = self.raw(section, key)
        if v is None:
            if default is None:
                self.fail(section, key, "required key is missing")
            return default
        try:
            x = kind(v)
        except ValueError:
            self.fail(section, key, f"expected a{'n integer' if kind is int else ' number'}, got {v!r}")
        if kind is float and not math.isfinite(x):
            self.fail(section, key, f"must be finite, got {v!r}")
        return x

    def numbers(self, section, key, kind=float):
        v = self.raw(section, key)
        if v is None:
            self.fail(section, key, "required key is missing")
        try:
            return [kind(t) for t in re.split(r"[,\s]+", v) if t]
        except ValueError:
            self.fail(section, key, f"expected a list of numbers, got {v!r}")


def _scalar(v: str):
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    return v


def parse_config(path) -> RunConfig:
    """Read and validate a run config; unknown sections and keys are errors."""
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=path)
    except configparser.Error as exc:
        no = getattr(exc, "lineno", None)
        loc = f"{path}:{no}" if no else path
        raise ConfigError(f"{loc}: {exc.message.splitlines()[0] if hasattr(exc, 'message') else exc}") from None
    lines = _key_lines(text)
    rd = _Reader(cp, lines, path)

    for section in cp.sections():
        if section not in _KEYS:
            raise ConfigError(f"{path}: unknown section [{section}]; expected one of {sorted(_KEYS)}")
        for key in cp.options(section):
            if key in _KEYS[section]:
                continue
            if section == "problem" and key.startswith(_PARAM_PREFIXES):
                continue
            rd.fail(section, key, f"unknown key; allowed: {', '.join(sorted(_KEYS[section]))}")

    # [domain]
    ext_raw = rd.raw("domain", "extents", "0 1")
    try:
        axes = [[float(t) for t in re.split(r"[\s]+", part.strip()) if t] for part in ext_raw.split(",")]
    except ValueError:
        rd.fail("domain", "extents", f"expected 'a b' or 'a b, c d', got {ext_raw!r}")
    if any(len(a) != 2 for a in axes):
        rd.fail("domain", "extents", f"each axis needs two bounds, got {ext_raw!r}")
    T = rd.number("domain", "T", 1.0)

    # [grid]
    cells = rd.numbers("grid", "cells", int)
    dt_raw = rd.raw("grid", "dt", "auto")
    dt = None if dt_raw.lower() == "auto" else rd.number("grid", "dt")
    ref_factor = rd.number("grid", "ref_factor", 8, int)
    snapshots = rd.number("grid", "snapshots", 16, int)

    # [problem]
    hname = rd.raw("problem", "hamiltonian", "quadratic")
    if hname not in HAMILTONIANS:
        rd.fail("problem", "hamiltonian", f"unknown Hamiltonian {hname!r}; available: {', '.join(HAMILTONIANS)}")
    try:
        if hname == "power":
            ham = HamiltonianSpec.power(rd.number("problem", "gamma", 2.0), rd.number("problem", "delta", 0.0))
        elif hname == "custom":
            ham = HamiltonianSpec.custom(rd.numbers("problem", "p_nodes"), rd.numbers("problem", "h_values"))
        else:
            ham = HamiltonianSpec(hname)
    except HJLabError as exc:
        rd.fail("problem", "hamiltonian", str(exc))
    params = {"terminal": {}, "source": {}}
    for key in cp.options("problem") if cp.has_section("problem") else []:
        if key.startswith(_PARAM_PREFIXES):
            role, name = key.split(".", 1)
            params[role][name] = _scalar(rd.raw("problem", key))

    # [sweep]
    kind = rd.raw("sweep", "kind", "two_sided")
    if kind not in KINDS:
        rd.fail("sweep", "kind", f"unknown experiment kind {kind!r}; available: {', '.join(KINDS)}")
    eps = rd.numbers("sweep", "epsilons")
    x0 = rd.numbers("sweep", "x0") if rd.raw("sweep", "x0") is not None else None
    threads = rd.number("sweep", "threads", 0, int) or None
    eta = rd.number("sweep", "eta", 0.0) or None

    # [output]
    formats = tuple(f.strip() for f in rd.raw("output", "formats", ",".join(FORMATS)).split(",") if f.strip())
    bad = [f for f in formats if f not in FORMATS]
    if bad or not formats:
        rd.fail("output", "formats", f"unknown format(s) {bad}; available: {', '.join(FORMATS)}")

    cfg = RunConfig(
        kind=kind, extents=tuple(tuple(a) for a in axes), cells=tuple(cells), T=T,
        epsilons=tuple(eps), hamiltonian=ham,
        terminal=rd.raw("problem", "terminal", "constant"), source=rd.raw("problem", "source", "zero"),
        terminal_params=params["terminal"], source_params=params["source"],
        dt=dt, ref_factor=ref_factor, snapshots=snapshots, tau=rd.number("sweep", "tau", 0.0),
        x0=tuple(x0) if x0 else None, eta=eta,
        beta=rd.number("sweep", "beta", 0.75), alpha=rd.number("sweep", "alpha", 1.5),
        drop_factor=rd.number("sweep", "drop_factor", 3.0),
        resolution_ratio=rd.number("sweep", "resolution_ratio", 0.1), threads=threads,
        out_dir=rd.raw("output", "dir", "."), formats=formats, stem=rd.raw("output", "stem", "report"),
        path=path,
    )
    validate(cfg, rd)
    return cfg


_PLAN_KEYS = {
    "epsilons": "epsilons", "ref_factor": "ref_factor", "snapshot": "snapshots", "beta": "beta",
    "alpha": "alpha", "tau": "tau", "dt": "dt",
}


def validate(cfg: RunConfig, rd: _Reader | None = None) -> ProblemSpec:
    """Build the problem and plan once so that bad values surface before any solve."""

    def fail(section, key, msg):
        if rd is not None:
            rd.fail(section, key, msg)
        raise ConfigError(f"[{section}] {key}: {msg}")

    try:
        build_grid(cfg.extents, cfg.cells)
    except HJLabError as exc:
        fail("grid", "cells", str(exc))
    try:
        problem = cfg.problem()
    except HJLabError as exc:
        msg = str(exc)
        fail("problem", "source" if "source" in msg else "terminal", msg)
    try:
        cfg.plan(problem)
    except HJLabError as exc:
        msg = str(exc)
        key = next((k for k, name in _PLAN_KEYS.items() if k in msg), "epsilons")
        section = "grid" if key in ("ref_factor", "snapshot", "dt") else "sweep"
        fail(section, _PLAN_KEYS[key], msg)
    if cfg.x0 is not None and len(cfg.x0) != len(cfg.cells):
        fail("sweep", "x0", f"needs {len(cfg.cells)} coordinates")
    return problem


# ---------------------------------------------------------------------------
# verification of one problem


@dataclass
class Check:
    name: str
    epsilon: float
    value: float
    threshold: float | None
    passed: bool


@dataclass
class VerifyReport:
    problem: dict
    checks: list[Check]
    status: str = "pass"
    notes: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    version: str = __version__
    schema: str = VERIFY_SCHEMA

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return _jsonable(asdict(self))

    @classmethod
    def from_dict(cls, d: dict) -> "VerifyReport":
        d = dict(d)
        d["checks"] = [Check(**c) for c in d["checks"]]
        return cls(**d)


def verify_problem(cfg: RunConfig) -> VerifyReport:
    """Invariant and certificate checks for one problem at every ε of the config.

    Checks: adjoint mass and positivity, the a priori Lipschitz bound, the
    boundary inequality for ``|Du|²``, the duality identity, and, when the
    catalog certifies the hypotheses, the one-sided Laplacian and weighted
    second-order bounds.
    """
    prob = validate(cfg)
    plan = cfg.plan(prob, kind="two_sided")
    probes = [cfg.x0] if cfg.x0 else plan.probe_points()
    lip = prob.lipschitz_bound()
    one_sided = not missing_hypotheses(prob, need_quadratic=False)
    quadratic = not missing_hypotheses(prob, need_quadratic=True)
    checks = []
    for eps in cfg.epsilons:
        u = solve_viscous(prob, eps, cfg.dt)
        drift = drift_from_solution(u)
        mass, neg = 0.0, 0.0
        rhos = []
        for x0 in probes:
            rho = solve_adjoint(drift, eps, x0, cfg.tau, u.dt, T=prob.T)
            mass = max(mass, rho.mass_drift())
            neg = min(neg, float(np.min(rho.min_ledger)))
            rhos.append(rho)
        checks.append(Check("fp_mass", eps, mass, MASS_RTOL, mass <= MASS_RTOL))
        checks.append(Check("fp_positivity", eps, neg, NEG_TOL, neg >= NEG_TOL))
        sup_grad = float(np.sqrt(np.max(gradient_sq_field(u).values)))
        checks.append(Check("lipschitz_a_priori", eps, sup_grad, lip, sup_grad <= 1.05 * lip))
        c_l = max(lipschitz_certificate(u, r, eps).C_L for r in rhos)
        checks.append(Check("C_L", eps, c_l, None, math.isfinite(c_l)))
        final = u.values[-1]
        w = np.sum(central_gradient(final, prob.grid.h) ** 2, axis=-1)
        dn = float(np.max(boundary_normal_difference(ScalarField(prob.grid, w, 0.0))))
        checks.append(Check("boundary_normal_grad_sq", eps, dn, 1e-6, dn <= 1e-6))
        eta = cfg.eta or eps / 4
        res = duality_residual(prob, eps, eta, probes[0], cfg.tau, cfg.dt)
        checks.append(Check("duality_residual", eps, res, 0.05, res <= 0.05))
        if one_sided:
            m, b, ok = delta_u_plus_bound(u, prob.M0, prob.c_f_integral())
            checks.append(Check("laplacian_plus", eps, m, b, ok))
        if quadratic:
            K = second_order_K(prob.grid.dim, cfg.alpha, prob.T, prob.M0, prob.c_f_sup())
            so = max(weighted_second_order(u, r, eps, cfg.alpha, cfg.tau, prob.M0, prob.c_f_sup()).measured
                     for r in rhos)
            checks.append(Check("second_order", eps, so, K, so <= 1.05 * K))
        mine = [c for c in checks if c.epsilon == eps]
        log.info("verify eps=%g: %d checks, %d failed", eps, len(mine), sum(not c.passed for c in mine))
    status = "pass" if all(c.passed for c in checks) else "fail"
    return VerifyReport(prob.describe(), checks, status, config=cfg.echo())


# ---------------------------------------------------------------------------
# report files


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def _fit_label(report: RateReport, row) -> str:
    name = "pos" if report.kind == "one_sided" else "sup"
    fit = report.fits.get(name, {})
    status = fit.get("status", "")
    if status in ("degenerate", "unresolved"):
        return status
    return "used" if row.in_fit else "dropped"


def _write_csv_rate(report: RateReport, path: Path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_COLUMNS)
        for r in report.rows:
            wr.writerow([_fmt(r.epsilon), _fmt(r.sup_error), _fmt(r.pos_error), _fmt(r.neg_error),
                         _fmt(r.bound_upper), _fmt(r.bound_lower), _fmt(r.passed), _fit_label(report, r)])


def _write_csv_verify(report: VerifyReport, path: Path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(("check", "epsilon", "value", "threshold", "pass"))
        for c in report.checks:
            wr.writerow([c.name, _fmt(c.epsilon), _fmt(c.value), _fmt(c.threshold), _fmt(c.passed)])


def _write_dat(eps, values, label: str, path: Path):
    """Two columns ``log10 ε, log10 value``; non-positive values are skipped."""
    with open(path, "w") as fh:
        fh.write(f"# log10(epsilon) log10({label})\n")
        for e, v in zip(eps, values):
            if v is not None and v > 0:
                fh.write(f"{_fmt(math.log10(e))} {_fmt(math.log10(v))}\n")


def _plot_series(report: RateReport) -> list[tuple[str, list]]:
    if report.kind == "one_sided":
        return [("pos_error", [r.pos_error for r in report.rows]),
                ("neg_error", [r.neg_error for r in report.rows])]
    return [("sup_error", [r.sup_error for r in report.rows]),
            ("bound_upper", [r.bound_upper for r in report.rows])]


def emit_report(report, formats, out_dir, stem: str = "report") -> list[Path]:
    """Write the report files and return their paths.

    Rate reports give ``<stem>.csv`` (one row per ε), ``<stem>.json`` and two
    ``<stem>_<series>.dat`` plot files; verify reports give CSV and JSON.
    Files are staged in a temporary directory and moved into place only
    after all of them were written.
    """
    out = Path(out_dir)
    if not out.is_dir():
        raise OSError(f"output directory {out} does not exist")
    formats = tuple(formats)
    bad = [f for f in formats if f not in FORMATS]
    if bad:
        raise ConfigError(f"unknown format(s) {bad}; available: {', '.join(FORMATS)}")
    stage = Path(tempfile.mkdtemp(prefix=".hjlab-", dir=out))
    try:
        names = []
        if "csv" in formats:
            names.append(f"{stem}.csv")
            if isinstance(report, RateReport):
                _write_csv_rate(report, stage / names[-1])
            else:
                _write_csv_verify(report, stage / names[-1])
        if "json" in formats:
            names.append(f"{stem}.json")
            with open(stage / names[-1], "w") as fh:
                json.dump(_jsonable(report.to_dict()), fh, indent=2, allow_nan=False)
                fh.write("\n")
        if "dat" in formats and isinstance(report, RateReport):
            for label, vals in _plot_series(report):
                names.append(f"{stem}_{label}.dat")
                _write_dat(report.epsilons, vals, label, stage / names[-1])
        paths = []
        for n in names:
            os.replace(stage / n, out / n)
            paths.append(out / n)
        return paths
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def load_report(path):
    """Read a JSON report written by :func:`emit_report`."""
    with open(path) as fh:
        d = json.load(fh)
    schema = d.get("schema")
    if schema == VERIFY_SCHEMA:
        return VerifyReport.from_dict(d)
    if schema == RateReport.schema:
        return RateReport.from_dict(d)
    raise ConfigError(f"{path}: unknown report schema {schema!r}")


# ---------------------------------------------------------------------------
# drivers


def execute(cfg: RunConfig, command: str = "sweep"):
    """Run one subcommand and return ``(report, exit_code)`` without writing files."""
    if command == "verify":
        rep = verify_problem(cfg)
        return rep, 0 if rep.passed else 1
    if command == "baseline":
        if cfg.kind not in ("heat_baseline", "two_sided"):
            raise ConfigError(f"baseline runs the heat baseline; config asks for kind {cfg.kind!r}")
        cfg = replace(cfg, kind="heat_baseline")
    elif command == "sweep" and cfg.kind == "heat_baseline":
        log.info("config kind is heat_baseline; running the heat baseline")
    plan = cfg.plan()
    try:
        rep = run_sweep(plan)
    except InconclusiveResolution as exc:
        rep = exc.report
        if rep is None:
            raise
        rep.config = cfg.echo()
        return rep, 2
    rep.config = cfg.echo()
    return rep, 0 if rep.passed else 1


def run(cfg: RunConfig, command: str = "sweep") -> int:
    """Run a subcommand, write its reports and return the exit code."""
    try:
        if not Path(cfg.out_dir).is_dir():
            raise OSError(f"output directory {cfg.out_dir} does not exist")
        rep, code = execute(cfg, command)
        paths = emit_report(rep, cfg.formats, cfg.out_dir, cfg.stem)
    except (HJLabError, OSError) as exc:
        log.error("error: %s", exc)
        return 1
    except Exception as exc:  # any other failure is a hard error too
        log.debug("unexpected failure", exc_info=True)
        log.error("error: %s: %s", type(exc).__name__, exc)
        return 1
    _summary(rep, code, paths)
    return code


def _summary(rep, code, paths):
    if isinstance(rep, RateReport):
        for name, fit in rep.fits.items():
            if fit.get("exponent") is not None:
                log.info("%s exponent %.4f over eps %s", name, fit["exponent"], fit["used"])
        for name, ok in rep.criteria.items():
            log.info("%-28s %s", name, "pass" if ok else "FAIL")
        for note in rep.notes:
            log.info("note: %s", note)
    else:
        for c in rep.checks:
            if not c.passed:
                log.info("FAIL %s eps=%g value=%.3e threshold=%s", c.name, c.epsilon, c.value, c.threshold)
    log.info("status %s (exit %d); wrote %s", rep.status, code, ", ".join(str(p) for p in paths))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="hjlab", description="Vanishing-viscosity rate experiments.")
    ap.add_argument("--version", action="version", version=f"hjlab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "sweep": "run the sweep named by [sweep] kind",
        "verify": "check invariants and certificates on one problem",
        "baseline": "run the heat baseline",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, metavar="PATH")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides [output] dir)")
        p.add_argument("--format", metavar="LIST", help="comma-separated subset of csv,json,dat")
        p.add_argument("--quiet", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr, force=True)
    try:
        cfg = parse_config(args.config)
        if args.out is not None:
            cfg = replace(cfg, out_dir=args.out)
        if args.format is not None:
            fmts = tuple(f.strip() for f in args.format.split(",") if f.strip())
            bad = [f for f in fmts if f not in FORMATS]
            if bad or not fmts:
                raise ConfigError(f"--format: unknown format(s) {bad}; available: {', '.join(FORMATS)}")
            cfg = replace(cfg, formats=fmts)
    except HJLabError as exc:
        log.error("error: %s", exc)
        return 1
    return run(cfg, args.command)
