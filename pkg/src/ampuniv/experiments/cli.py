"""Command line entry point: ``ampuniv <subcommand> [--config FILE] [--seed S] [--out DIR] [--threads K]``.

Each subcommand writes CSV data plus a ``<subcommand>_meta.json`` file with
the configuration echo, library versions and wall time. Exit status is 0 on
success, 2 when a statistical check is flagged, and 1 on errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..ensembles import RADEMACHER
from ..errors import AmpError
from ..phase_boundary import PHASE_CURVE_FIELDS, phase_curve
from .config import ExperimentConfig
from .phase_diagram import PHASE_FIELDS, TRIAL_FIELDS, run_phase_diagram, write_csv
from .se_check import SE_CHECK_FIELDS, SE_TRIAL_FIELDS, se_vs_empirical_report
from .threshold import THRESHOLD_FIELDS, estimate_threshold, non_monotone
from .tree_check import TREE_FIELDS, tree_check
from .universality import SHRINK_FIELDS, UNIVERSALITY_FIELDS, shrink_rows, universality_report

log = logging.getLogger("ampuniv")

EXIT_OK, EXIT_ERROR, EXIT_FLAGGED = 0, 1, 2
TREE_TOL = 1e-10
PROBE_FIELDS = ("delta", "rho", "ensemble", "n", "trials", "successes", "success_fraction", "wilson_lo",
                "wilson_hi", "diverged", "master_seed")


def _phase_curve(cfg: ExperimentConfig, out: Path, threads: int) -> tuple[bool, list[str]]:
    write_csv(out / "phase_curve.csv", PHASE_CURVE_FIELDS, phase_curve())
    return False, ["phase_curve.csv"]


def _phase_diagram(cfg: ExperimentConfig, out: Path, threads: int) -> tuple[bool, list[str]]:
    points, rows = run_phase_diagram(cfg, threads)
    write_csv(out / "phase_diagram.csv", PHASE_FIELDS, [p.row() for p in points])
    write_csv(out / "phase_diagram_trials.csv", TRIAL_FIELDS, rows)
    flagged = False
    for tag in sorted({p.ensemble for p in points}):
        for delta in sorted({p.delta for p in points}):
            col = [p for p in points if p.ensemble == tag and p.delta == delta]
            if non_monotone(col):
                log.warning("non-monotone success profile: %s, delta=%g", tag, delta)
                flagged = True
    return flagged, ["phase_diagram.csv", "phase_diagram_trials.csv"]


def _threshold(cfg: ExperimentConfig, out: Path, threads: int) -> tuple[bool, list[str]]:
    tc = cfg.threshold
    estimates, probes = [], []
    for spec in cfg.ensembles:
        for delta in cfg.deltas:
            est = estimate_threshold(delta, spec, cfg.n, tc.trials_per_probe, tc.probes, cfg.master_seed,
                                     cfg.solver, cfg.support, cfg.nonzero_law, tc.rho_lo, tc.rho_hi, threads)
            log.info("%s delta=%g rho_hat=%.4f (%s)", spec.tag, delta, est.rho_hat, est.method)
            estimates.append(est)
            probes += est.probes
    write_csv(out / "threshold.csv", THRESHOLD_FIELDS, [e.row() for e in estimates])
    write_csv(out / "threshold_probes.csv", PROBE_FIELDS, probes)
    return any(e.flagged for e in estimates), ["threshold.csv", "threshold_probes.csv"]


def _universality(cfg: ExperimentConfig, out: Path, threads: int) -> tuple[bool, list[str]]:
    ensembles = list(cfg.ensembles)
    if len(ensembles) < 2:
        ensembles.append(RADEMACHER)
    rows = universality_report(ensembles, cfg.universality, cfg.master_seed)
    shrink = shrink_rows(rows) if len(cfg.universality.sizes) > 1 else []
    write_csv(out / "universality.csv", UNIVERSALITY_FIELDS, rows)
    write_csv(out / "universality_shrink.csv", SHRINK_FIELDS, shrink)
    largest = max(cfg.universality.sizes)
    flagged = any(r["flagged"] for r in rows if r["N"] == largest) or any(not s["shrinks"] for s in shrink)
    return flagged, ["universality.csv", "universality_shrink.csv"]


def _se_check(cfg: ExperimentConfig, out: Path, threads: int) -> tuple[bool, list[str]]:
    rows, trials = se_vs_empirical_report(cfg.se_check, cfg.master_seed, cfg.ensembles[0], threads)
    write_csv(out / "se_check.csv", SE_CHECK_FIELDS, rows)
    write_csv(out / "se_check_trials.csv", SE_TRIAL_FIELDS, trials)
    return any(r["flagged"] for r in rows), ["se_check.csv", "se_check_trials.csv"]


def _tree_oracle(cfg: ExperimentConfig, out: Path, threads: int) -> tuple[bool, list[str]]:
    rows = tree_check(cfg.tree, cfg.master_seed)
    write_csv(out / "tree_oracle.csv", TREE_FIELDS, rows)
    return any(float(r["abs_diff"]) > TREE_TOL for r in rows), ["tree_oracle.csv"]


COMMANDS = {
    "phase-curve": (_phase_curve, "critical curve rho_*(delta) on a uniform delta grid"),
    "phase-diagram": (_phase_diagram, "Monte Carlo success fractions over the configured grid"),
    "threshold": (_threshold, "bisection/probit estimate of the 50% success crossing"),
    "universality": (_universality, "moment gaps of symmetric AMP across ensembles"),
    "se-check": (_se_check, "empirical AMP statistics against state evolution"),
    "tree-oracle": (_tree_oracle, "tree sums against message passing on small instances"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ampuniv", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="JSON configuration file")
        p.add_argument("--seed", type=int, help="master seed (overrides the configuration)")
        p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker processes")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _metadata(command: str, cfg: ExperimentConfig, files: list[str], wall: float, flagged: bool) -> dict:
    return {"command": command, "package_version": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "wall_time_s": wall, "flagged": flagged,
            "outputs": files, "config": cfg.to_dict()}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
        if args.seed is not None:
            cfg = replace(cfg, master_seed=args.seed)
        if args.threads < 1:
            raise AmpError("--threads must be at least 1")
        args.out.mkdir(parents=True, exist_ok=True)
        start = time.perf_counter()
        flagged, files = COMMANDS[args.command][0](cfg, args.out, args.threads)
        wall = time.perf_counter() - start
        meta = _metadata(args.command, cfg, files, wall, flagged)
        with open(args.out / f"{args.command}_meta.json", "w") as fh:
            json.dump(meta, fh, indent=2, default=str)
    except (AmpError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR
    if flagged:
        log.warning("statistical anomaly flagged; see %s", args.out)
        return EXIT_FLAGGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
