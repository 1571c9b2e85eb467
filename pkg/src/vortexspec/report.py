"""
Aggregated a-posteriori verification of the vortex, index and inner-product
computations, plus full-precision CSV/JSON export.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import VortexSpecError
from .index import OperatorSpec, analyze, compute_index_function
from .innerprod import (InnerProductTable, compute_table, negativity_certificate, perturbation_sweep)
from .plots import PlotStyle, Series, export_plot
from .selfsim import SelfSimilarParams, solve_selfsim
from .vortex import DEFAULT_RMAX, DEFAULT_TOL, abc_residual, decay_fit, solve_vortex

logger = logging.getLogger(__name__)

CHECK_NAMES_M0 = ("vortex_decay_fit", "vortex_abc_residual")
CHECK_NAMES = CHECK_NAMES_M0 + (
    "index_L1_c0_plateau", "index_L1_tail_sign", "index_L2_c0_plateau", "index_L2_tail_sign",
    "linear_abc_K", "linear_abc_J", "innerprod_plateau_K", "innerprod_plateau_J",
)
TABLE_CSV_FIELDS = ("m", "family", "delta", "r_max", "scale", "v1", "v2", "v3", "v3a", "v3b",
                    "det", "trace")


def load_thresholds(path=None) -> dict:
    """Check thresholds; the packaged defaults unless ``path`` is given."""
    if path is None:
        text = resources.files("vortexspec").joinpath("data/thresholds.json").read_text()
    else:
        text = Path(path).read_text()
    return json.loads(text)


def report_schema() -> dict:
    return json.loads(resources.files("vortexspec").joinpath("data/report.schema.json").read_text())


def thread_count() -> int:
    """Worker cap from ``VORTEXSPEC_THREADS`` (default: CPU count)."""
    raw = os.environ.get("VORTEXSPEC_THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"VORTEXSPEC_THREADS must be an integer, got {raw!r}") from None


@dataclass
class RunConfig:
    ms: list = field(default_factory=lambda: [1])
    r_max: float = DEFAULT_RMAX
    tol: float = DEFAULT_TOL
    deltas: list = field(default_factory=list)
    bs: list = field(default_factory=list)
    eta: float = 0.1
    out: str = "vortexspec_out"
    plot: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ms"] = [int(m) for m in self.ms]
        d["deltas"] = [float(x) for x in self.deltas]
        d["bs"] = [float(x) for x in self.bs]
        return d


@dataclass
class Check:
    name: str
    value: float | None
    threshold: float | None
    passed: bool
    informational: bool = False
    note: str = ""


@dataclass
class RunResult:
    m: int
    checks: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)

    def add(self, name, value, threshold, passed, informational=False, note=""):
        value = None if value is None or not np.isfinite(value) else float(value)
        self.checks.append(Check(name, value, threshold, bool(passed), informational, note))


@dataclass
class VerificationReport:
    config: RunConfig
    thresholds: dict
    runs: list = field(default_factory=list)

    @property
    def checks(self) -> list:
        return [(r.m, c) for r in self.runs for c in r.checks]

    @property
    def artifacts(self) -> list:
        return [a for r in self.runs for a in r.artifacts]

    @property
    def passed(self) -> bool:
        return all(c.passed for _, c in self.checks if not c.informational)

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "thresholds": dict(self.thresholds),
            "passed": self.passed,
            "runs": [{"m": r.m, "checks": [asdict(c) for c in r.checks], "results": r.results,
                      "artifacts": list(r.artifacts)} for r in self.runs],
        }


def _fail_remaining(run: RunResult, names, note):
    done = {c.name for c in run.checks}
    for name in names:
        if name not in done:
            run.add(name, None, None, False, note=note)


def _table_curve_series(t: InnerProductTable):
    prefix = "k" if t.family == "K" else "j"
    ri = t.running_integrals
    return [Series(f"{prefix}1", ri["r"], ri["v1"]), Series(f"{prefix}2", ri["r"], ri["v2"]),
            Series(f"{prefix}3", ri["r"], 0.5 * (ri["v3a"] + ri["v3b"]))]


def _run_m(m: int, cfg: RunConfig, thr: dict, out: Path) -> RunResult:
    run = RunResult(m)
    names = CHECK_NAMES if m >= 1 else CHECK_NAMES_M0
    try:
        prof = solve_vortex(m, cfg.r_max, cfg.tol)
    except VortexSpecError as exc:
        _fail_remaining(run, names, f"vortex solve failed: {exc}")
        return run
    run.results["vortex"] = prof.metadata()
    run.artifacts.append(str(prof.to_csv(out / f"vortex_m{m}.csv").name))
    fit = decay_fit(prof)
    t = thr["vortex_decay_max_rel_deviation"]
    run.add("vortex_decay_fit", fit["max_rel_deviation"], t, fit["max_rel_deviation"] < t,
            note=f"C = {fit['C']!r}")
    defect = float(abc_residual(prof, 0.5 * cfg.r_max))
    t = thr["vortex_abc_defect_at_half_rmax"]
    run.add("vortex_abc_residual", abs(defect), t, abs(defect) < t)
    if cfg.plot:
        run.artifacts.append(export_plot([Series(f"m={m}", prof.r, prof.R())], out / f"vortex_m{m}.svg",
                                         PlotStyle(ylabel="R")).name)
    if m < 1:
        return run

    indices, consts, idx_series = {}, {}, []
    for kind in ("L1", "L2"):
        try:
            fn = compute_index_function(OperatorSpec(kind, m, prof), cfg.r_max, cfg.tol)
            rep = analyze(fn)
        except VortexSpecError as exc:
            _fail_remaining(run, [f"index_{kind}_c0_plateau", f"index_{kind}_tail_sign"], str(exc))
            continue
        run.artifacts.append(fn.to_csv(out / f"index_{kind}_m{m}.csv").name)
        run.artifacts.append(rep.to_json(out / f"index_{kind}_m{m}.json").name)
        idx_series.append(Series(kind, fn.r, fn.solution.values[0]))
        indices[kind] = rep.zero_count
        consts[kind] = {"c0": rep.c0, "c1": rep.c1, "zeros": rep.zero_locations}
        rel = rep.c0_fluctuation / abs(rep.c0)
        t = thr["index_c0_plateau_rel"]
        run.add(f"index_{kind}_c0_plateau", rel, t, rel < t)
        run.add(f"index_{kind}_tail_sign", rep.c0, thr["index_tail_margin"], rep.tail_sign_certified,
                note=f"zero_count = {rep.zero_count}")
    run.results["indices"] = indices
    run.results["index_constants"] = consts
    if cfg.plot and idx_series:
        run.artifacts.append(export_plot(idx_series, out / f"index_m{m}.svg",
                                         PlotStyle(ylabel="U tilde", hline=0.0)).name)

    tables = {}
    for fam in ("K", "J"):
        try:
            tab = compute_table(m, fam, profile=prof, r_max=cfg.r_max, tol=cfg.tol)
        except VortexSpecError as exc:
            _fail_remaining(run, [f"linear_abc_{fam}", f"innerprod_plateau_{fam}"], str(exc))
            continue
        tables[fam] = tab
        y = tab.solution.values[:, -1]
        L = cfg.r_max
        abc = max(abs(y[3] + 2 * m / L * y[2]), abs(y[5] + 2 * m / L * y[4]))
        t = thr["linear_abc_residual_tol_multiple"] * cfg.tol
        run.add(f"linear_abc_{fam}", abc, t, abc < t)
        plateau = max(tab.plateau_variation().values())
        t = thr["innerprod_plateau_rel"]
        run.add(f"innerprod_plateau_{fam}", plateau, t, plateau < t)
        run.artifacts.append(export_json(tab, out / f"{fam}_m{m}.json").name)
        run.artifacts.append(tab.curves_to_csv(out / f"{fam}_m{m}_curves.csv").name)
        if cfg.plot:
            run.artifacts.append(export_plot(_table_curve_series(tab), out / f"{fam.lower()}funcs_m{m}.svg",
                                             PlotStyle(ylabel="running integral")).name)
    run.results["tables"] = {k: v.to_dict() for k, v in tables.items()}

    if len(tables) == 2:
        try:
            cert = negativity_certificate(m, tables["K"], tables["J"])
        except VortexSpecError as exc:
            run.add("h1_negative_definite", None, None, False, True, str(exc))
        else:
            run.results["certificate"] = cert.to_dict()
            note = "" if cert.h1_matrix_negative_definite else "H1 matrix not negative definite"
            run.add("h1_negative_definite", cert.h1_det, 0.0, cert.h1_matrix_negative_definite, True, note)
            run.add("h2_zhat_negative", cert.h2_zhat_value, 0.0, cert.h2_zhat_value < 0, True)

    if cfg.deltas:
        try:
            entries, drift = perturbation_sweep(m, cfg.deltas, r_max=cfg.r_max, tol=cfg.tol, profile=prof)
        except VortexSpecError as exc:
            run.add("perturbation_index_stability", None, None, False, note=str(exc))
            run.add("perturbation_drift", None, None, False, note=str(exc))
        else:
            same = all(e.indices == entries[0].indices for e in entries)
            run.add("perturbation_index_stability", float(same), 1.0, same)
            worst = max(drift.values())
            t = thr["perturbation_drift_rel"]
            run.add("perturbation_drift", worst, t, worst < t)
            run.results["sweep"] = [{"delta": e.delta, "indices": list(e.indices),
                                     "K": e.K.to_dict(), "J": e.J.to_dict()} for e in entries]
            run.results["drift"] = drift

    if cfg.bs:
        diags = []
        for b in cfg.bs:
            try:
                sp = solve_selfsim(SelfSimilarParams(m, float(b), cfg.eta), cfg.tol)
            except VortexSpecError as exc:
                diags.append({"b": float(b), "error": str(exc)})
                continue
            diags.append(sp.diagnostics())
            run.artifacts.append(sp.to_csv(out / f"selfsim_m{m}_b{b:g}.csv").name)
        run.results["selfsim"] = diags
    return run


def run_verify(config: RunConfig, thresholds: dict | None = None) -> VerificationReport:
    """Run every per-``m`` pipeline and collect the checks.

    Solver errors become failed checks.  The H1 matrix test and the Zhat
    sign are findings, flagged informational.
    """
    thr = load_thresholds() if thresholds is None else thresholds
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    report = VerificationReport(config, thr)
    ms = [int(m) for m in config.ms]
    if ms:
        with ThreadPoolExecutor(max_workers=min(thread_count(), len(ms))) as pool:
            report.runs = list(pool.map(lambda m: _run_m(m, config, thr, out), ms))
    export_json(report, out / "report.json")
    return report


# export

def _to_dict(obj) -> dict:
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    if isinstance(obj, dict):
        return obj
    raise TypeError(f"cannot export {type(obj).__name__}")


def export_json(obj, path) -> Path:
    """JSON with floats written at full precision."""
    path = Path(path)
    path.write_text(json.dumps(_to_dict(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def load_table_json(path) -> InnerProductTable:
    return InnerProductTable.from_dict(json.loads(Path(path).read_text()))


def export_csv(tables, path) -> Path:
    """One row per inner-product table, columns ``TABLE_CSV_FIELDS``."""
    if isinstance(tables, InnerProductTable):
        tables = [tables]
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_CSV_FIELDS)
        for t in tables:
            w.writerow([t.m, t.family] + [repr(float(v)) for v in
                                          (t.delta, t.r_max, t.scale, t.v1, t.v2, t.v3,
                                           t.v3_pair[0], t.v3_pair[1], t.det, t.trace)])
    return path


def read_tables_csv(path) -> list:
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(InnerProductTable(int(row["m"]), row["family"], float(row["v1"]), float(row["v2"]),
                                         float(row["v3"]), (float(row["v3a"]), float(row["v3b"])),
                                         float(row["delta"]), float(row["r_max"]), float(row["scale"])))
    return out
