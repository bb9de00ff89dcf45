import json
import logging
import os
import time
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import scipy
from pydantic import ValidationError
from scipy.sparse.linalg import ArpackNoConvergence

from shared.config import config
from shared.models import EnvironmentInfo, OscillatingProfile, Report, RunConfig
from shared.utils import ensure_dir, rows_to_csv

from .commutators import applicable_identities, check_identity
from .conditions import check_theorem
from .conjugate import build_conjugate
from .errors import ConfigError, LapkitError
from .hs_calculus import run_hs_demo
from .lap import l_doubling_sensitivity, lowest_eigenvalues, run_sweep
from .mourre import build_s, empirical_w_star, subspace_states, verify_weak_mourre
from .potentials import HamiltonianPair, assemble_hamiltonian

logging.basicConfig(level=config.LOG_LEVEL)
logger = logging.getLogger(__name__)

STAGES = ("hypotheses", "commutators", "mourre", "eigen", "sweep", "hs")
HS_TOLERANCE = 1e-6
# numerical failures a stage records instead of aborting the run
STAGE_ERRORS = (LapkitError, np.linalg.LinAlgError, ArpackNoConvergence, ValidationError)

SWEEP_HEADER = ("lambda", "eta", "norm", "iters", "residual", "valid")
SUP_HEADER = ("lambda", "sup_norm", "ratio", "verdict")


def load_config(path: str) -> RunConfig:
    """Parse and validate a JSON run config; pydantic errors propagate with their field paths."""
    with open(path, "r", encoding="utf-8") as handle:
        return RunConfig.model_validate_json(handle.read())


def load_report(path: str) -> Report:
    with open(path, "r", encoding="utf-8") as handle:
        return Report.model_validate_json(handle.read())


class Pipeline:
    """One run of the configured stages; each stage annotates the report instead of aborting it."""

    def __init__(self, cfg: RunConfig, workers: int = config.WORKERS):
        self.cfg = cfg
        self.workers = workers
        self.timings: Dict[str, float] = {}
        self._hamiltonian: Optional[HamiltonianPair] = None
        self._w_star_done = False
        self._w_star: Optional[float] = None
        self.report = Report(
            config=cfg,
            environment=EnvironmentInfo(version=config.APP_VERSION, seed=cfg.seed,
                                        numpy_version=np.__version__, scipy_version=scipy.__version__),
        )

    @property
    def hamiltonian(self) -> HamiltonianPair:
        if self._hamiltonian is None:
            self._hamiltonian = assemble_hamiltonian(self.cfg.grid, self.cfg.potential)
        return self._hamiltonian

    @property
    def w_star(self) -> Optional[float]:
        """Empirical amplitude threshold for an oscillating V1 under a momentum-decay conjugate."""
        if not self._w_star_done:
            self._w_star_done = True
            cfg = self.cfg
            ladder = cfg.mourre.w_ladder if cfg.mourre is not None else None
            if ladder and isinstance(cfg.potential.real, OscillatingProfile) and cfg.conjugate.kind == "momentum-decay":
                self._w_star = empirical_w_star(cfg.grid, cfg.potential.real, cfg.conjugate, ladder,
                                                seed=cfg.seed)
                logger.info(f"Empirical w* = {self._w_star}")
        return self._w_star

    def run(self, stages: Sequence[str] = STAGES) -> Report:
        unknown = [s for s in stages if s not in STAGES]
        if unknown:
            raise ConfigError(f"unknown stages {unknown}, expected a subset of {list(STAGES)}")
        for stage in STAGES:
            if stage in stages:
                self._stage(stage, getattr(self, f"_run_{stage}"))
        if config.RECORD_TIMINGS:
            self.report.environment.timings = dict(self.timings)
        return self.report

    def _stage(self, name: str, fn: Callable[[], None]):
        logger.info(f"Stage {name}")
        start = time.perf_counter()
        try:
            fn()
        except STAGE_ERRORS as e:
            logger.error(f"Stage {name} failed: {type(e).__name__}: {e}")
            self.report.errors.append(f"{name}: {type(e).__name__}: {e}")
        finally:
            self.timings[name] = time.perf_counter() - start

    def _run_hypotheses(self):
        cfg = self.cfg
        for theorem in cfg.theorems:
            try:
                verdict = check_theorem(theorem, cfg.potential, cfg.grid.n, cfg.theorem_params, cfg.conjugate,
                                        cfg.grid, cfg.seed, self.w_star if theorem == "OSC" else None)
            except LapkitError as e:
                logger.error(f"{theorem}: {e}")
                self.report.errors.append(f"hypotheses/{theorem}: {type(e).__name__}: {e}")
                continue
            self.report.hypothesis_checks.append(verdict)

    def _run_commutators(self):
        cfg = self.cfg
        if cfg.commutators is None:
            return
        tags = cfg.commutators.identities or applicable_identities(cfg.grid, cfg.conjugate, cfg.potential)
        for tag in tags:
            try:
                check = check_identity(tag, cfg.grid, cfg.conjugate, cfg.potential, cfg.commutators.states, cfg.seed)
            except LapkitError as e:
                logger.warning(f"Identity {tag} skipped: {e}")
                self.report.notes.append(f"identity {tag} skipped: {e}")
                continue
            logger.info(f"Identity {tag}: deviation {check.deviation} ({check.verdict})")
            self.report.commutator_checks.append(check)

    def _run_mourre(self):
        cfg = self.cfg
        if cfg.mourre is None:
            return
        spec = cfg.mourre
        A = build_conjugate(cfg.grid, cfg.conjugate)
        S = build_s(cfg.grid, spec.s_kind, cfg.conjugate, cfg.potential, spec.scale, spec.c1)
        basis = subspace_states(cfg.grid, spec.subspace_size, cfg.seed)
        self.report.mourre_certificate = verify_weak_mourre(self.hamiltonian, A, S, spec.c1, basis, spec.probes,
                                                            cfg.seed, self.w_star, self.workers)

    def _run_eigen(self):
        cfg = self.cfg
        if cfg.eigen is None:
            return
        scan = lowest_eigenvalues(self.hamiltonian, cfg.eigen.count, cfg.eigen, cfg.seed)
        bound = [e.real for e in scan.entries if e.bound]
        if bound:
            self.report.notes.append(f"bound states at {['%.6g' % v for v in bound]}")
        self.report.eigenvalues = scan

    def _run_sweep(self):
        cfg = self.cfg
        if cfg.sweep is None:
            return
        potential = cfg.potential
        result = run_sweep(self.hamiltonian, cfg.sweep, cfg.conjugate, self.report.eigenvalues,
                           rebuild=lambda grid: assemble_hamiltonian(grid, potential), workers=self.workers)
        if cfg.sweep.l_doubling:
            sensitivity = l_doubling_sensitivity(result)
            self.report.notes.append(f"L-doubling sensitivity {sensitivity}")
        for trend in result.trends:
            if trend.verdict == "blow-up":
                self.report.notes.append(f"blow-up at lambda={trend.lam:g} (ratio {trend.ratio}, sup {trend.sup_norm})")
        self.report.lap_sweep = result

    def _run_hs(self):
        if self.cfg.hs is None:
            return
        self.report.hs_demo = run_hs_demo(self.cfg.hs)


def run_config(source: Union[str, RunConfig], seed: Optional[int] = None, workers: Optional[int] = None,
               stages: Sequence[str] = STAGES) -> Report:
    """Validate, then run hypothesis checks, commutators, Mourre certificate, eigenvalues, sweep and HS demo."""
    cfg = load_config(source) if isinstance(source, str) else source
    if seed is not None:
        cfg = cfg.model_copy(update={"seed": seed})
    logger.info(f"Running {list(stages)} on n={cfg.grid.n} {cfg.grid.geometry} N={cfg.grid.N} L={cfg.grid.L:g}")
    return Pipeline(cfg, workers or config.WORKERS).run(stages)


# ---------------------------------------------------------------- output

def _sweep_csv(report: Report) -> str:
    rows = []
    if report.lap_sweep is not None:
        rows = [(r.lam, r.eta, r.norm, r.iters, r.residual, r.valid) for r in report.lap_sweep.rows]
    return rows_to_csv(SWEEP_HEADER, rows)


def _sup_csv(report: Report) -> str:
    rows = []
    if report.lap_sweep is not None:
        rows = [(t.lam, t.sup_norm, t.ratio, t.verdict) for t in report.lap_sweep.trends]
    return rows_to_csv(SUP_HEADER, rows)


def _gnuplot_script() -> str:
    return "\n".join([
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set logscale xy",
        "set xlabel 'eta'",
        "set ylabel 'weighted resolvent norm'",
        "set terminal pngcairo size 900,600",
        "set output 'sweep.png'",
        "plot 'sweep.csv' using 2:3 with points pointtype 7",
        "unset logscale x",
        "set xlabel 'lambda'",
        "set ylabel 'sup over eta'",
        "set output 'sup_per_lambda.png'",
        "plot 'sup_per_lambda.csv' using 1:2 with linespoints",
        "",
    ])


def emit_report(report: Report, out_dir: Optional[str] = None, gnuplot: bool = False) -> List[str]:
    """Write report.json, sweep.csv, sup_per_lambda.csv (and plot.gp) into out_dir."""
    out_dir = ensure_dir(out_dir or report.config.output_dir)
    payload = json.loads(report.model_dump_json())
    files = {
        "report.json": json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        "sweep.csv": _sweep_csv(report),
        "sup_per_lambda.csv": _sup_csv(report),
    }
    if gnuplot:
        files["plot.gp"] = _gnuplot_script()
    written = []
    for name, text in files.items():
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        written.append(path)
    logger.info(f"Report written to {out_dir}: {sorted(files)}")
    return written


# ---------------------------------------------------------------- verdicts

def verdicts(report: Report) -> List[str]:
    """Every verdict in the report, mapped onto pass / fail / inconclusive."""
    found = [v.verdict for v in report.hypothesis_checks]
    found += [c.verdict for c in report.commutator_checks]
    if report.mourre_certificate is not None:
        found.append(report.mourre_certificate.verdict)
    if report.eigenvalues is not None and not report.eigenvalues.converged:
        found.append("inconclusive")
    if report.lap_sweep is not None:
        found.append({"bounded": "pass", "blow-up": "fail"}.get(report.lap_sweep.verdict, "inconclusive"))
    if report.hs_demo is not None:
        hs = report.hs_demo
        ok = hs.closure_error <= HS_TOLERANCE and hs.hs_apply_error <= HS_TOLERANCE
        found.append("pass" if ok else "fail")
    return found


def exit_code(report: Report) -> int:
    """1 on execution errors, 2 on any fail, 3 on any inconclusive, else 0."""
    if report.errors:
        return 1
    found = verdicts(report)
    if "fail" in found:
        return 2
    if "inconclusive" in found:
        return 3
    return 0
