"""Command-line entry point: ``pseudospec {estimate,simulate,theory,bench}``."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bandwidth import CvConfig, optimal_bandwidth, select_bandwidth_cv
from .bench import StudyConfig, metric_mask, radial_average, run_study
from .errors import PseudospecError
from .geometry import HermitianField, Window, make_frequency_grid, read_pattern, write_pattern
from .intensity import fit_intensity, zero_intensity
from .simulation import CoxModelParams, SimulationConfig, cox_covariance, replicate_seeds, sample_cox_pattern
from .spectral import KernelSpec, SpectrumEstimate, feasible_periodogram, kernel_smooth
from .taper import make_taper
from .theory import AnalyticPseudoSpectrum, local_spectrum, reweighted_spectrum_and_coherence

log = logging.getLogger("pseudospec")


def _intensity_spec(text: str):
    if text in ("constant", "zero"):
        return text
    return [t.strip() for t in text.split(",") if t.strip()]


def _write_json(path, obj) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2)


def cmd_estimate(args) -> int:
    pattern = read_pattern(args.input, args.window)
    window = pattern.window
    taper = make_taper(args.taper_a)
    grid = make_frequency_grid(window, args.grid_scale, args.max_norm)
    spec = _intensity_spec(args.intensity)
    if spec == "zero":
        fit = None
        model = zero_intensity(pattern.m, window.d)
    else:
        fit = fit_intensity(pattern, spec)
        model = fit.model
    pg = feasible_periodogram(pattern, taper, model, grid)
    report = {"grid_spacing": float(np.max(grid.spacing))}
    if args.bandwidth == "raw":
        est = SpectrumEstimate(pg.field, {"kind": "raw_periodogram"})
    else:
        if args.bandwidth == "cv":
            cfg = CvConfig(half_width=args.max_norm, exclusion=args.cv_exclusion)
            res = select_bandwidth_cv(pg, cfg)
            b = res.b_cv
            report.update({"rule": "cv", "config": cfg.to_json(), **res.to_json()})
        elif args.bandwidth == "opt":
            b = optimal_bandwidth(window, float(np.max(grid.spacing)))
            report.update({"rule": "opt", "b_opt": b})
        else:
            b = float(args.bandwidth)
            report.update({"rule": "fixed", "b": b})
        est = kernel_smooth(pg, KernelSpec.triangular(b, window.d))
        _write_json(Path(args.out).with_name("bandwidth_report.json"), report)
    out = est.to_json()
    out["provenance"].update({"taper_a": args.taper_a, "intensity": model.to_json(),
                              "fit_status": fit.status if fit else "not_fitted"})
    _write_json(args.out, out)
    print(f"wrote {args.out} ({grid.size} nodes)")
    return 0


def cmd_simulate(args) -> int:
    params = CoxModelParams.preset(args.model, kernel_norm=args.kernel_norm)
    window = Window.square(args.side)
    cfg = SimulationConfig(window, seed=args.seed, cell=args.cell)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for rep, seed in enumerate(replicate_seeds(args.seed, args.reps)):
        pattern = sample_cox_pattern(params, cfg, seed=np.random.default_rng(seed))
        stem = out / f"rep{rep:04d}"
        write_pattern(pattern, stem.with_suffix(".csv"), stem.with_name(stem.name + "_window.json"),
                      extra_meta={"model": params.to_json(), "seed": args.seed, "rep": rep,
                                  "cell": args.cell, "counts": pattern.counts().tolist()})
    print(f"wrote {args.reps} pattern(s) to {out}")
    return 0


def cmd_theory(args) -> int:
    params = CoxModelParams.preset(args.model)
    window = Window.square(args.side)
    grid = make_frequency_grid(window, args.grid_scale, args.max_norm)
    taper = make_taper(args.taper_a)
    cov = cox_covariance(params)
    omegas = grid.nodes().reshape(-1, grid.d)
    F = AnalyticPseudoSpectrum(params.intensity, taper, cov)(omegas)
    Ft, R, D = reweighted_spectrum_and_coherence(cov, omegas)
    Fu = local_spectrum(params.intensity, cov, args.u, omegas) if args.u is not None else None
    shape = grid.shape + (params.m, params.m)
    doc = {"model": params.to_json(), "taper_a": args.taper_a, "grid": grid.to_json(),
           "pseudo_spectrum": HermitianField(grid, F.reshape(shape)).to_json(),
           "reweighted_spectrum": HermitianField(grid, Ft.reshape(shape)).to_json(),
           "R": R.tolist(), "D": D.tolist()}
    if Fu is not None:
        doc["local_spectrum"] = {"u": list(args.u),
                                 "field": HermitianField(grid, Fu.reshape(shape)).to_json()}
    _write_json(args.out, doc)
    if args.csv:
        m = params.m
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            pairs = [(i, j) for i in range(m) for j in range(i, m)]
            w.writerow([f"w{a + 1}" for a in range(grid.d)]
                       + [f"F{i + 1}{j + 1}_{p}" for i, j in pairs for p in ("re", "im")]
                       + [f"R{i + 1}{j + 1}" for i, j in pairs if i != j]
                       + [f"D{i + 1}{j + 1}" for i, j in pairs if i != j])
            for k, om in enumerate(omegas):
                row = list(om)
                for i, j in pairs:
                    row += [F[k, i, j].real, F[k, i, j].imag]
                row += [R[k, i, j] for i, j in pairs if i != j]
                row += [D[k, i, j] for i, j in pairs if i != j]
                w.writerow([f"{v:.10g}" for v in row])
    print(f"wrote {args.out}")
    return 0


def cmd_bench(args) -> int:
    with open(args.config) as fh:
        cfg = StudyConfig.from_json(json.load(fh))
    report = run_study(cfg, collect=args.radial_dir is not None)
    csv_path = args.csv or str(Path(args.out).with_suffix(".csv"))
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    report.write(args.out, csv_path)
    if args.radial_dir:
        _write_radial(report, cfg, Path(args.radial_dir))
    print(f"wrote {args.out} and {csv_path}; {len(report.failures)} failed replicate(s)")
    return 0


def _write_radial(report, cfg: StudyConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    params = CoxModelParams.preset(cfg.model, kernel_norm=cfg.kernel_norm)
    taper = make_taper(cfg.taper_a)
    cov = cox_covariance(params)
    for (side, scheme, name), arr in report.samples.items():
        grid = make_frequency_grid(Window.square(side), cfg.grid_scale, cfg.max_norm)
        truth = AnalyticPseudoSpectrum(params.intensity, taper, cov).on_grid(grid)
        mean = HermitianField(grid, arr.mean(axis=0))
        for entry in cfg.entries:
            est_prof = radial_average(mean, entry)
            tru_prof = dict(radial_average(truth, entry))
            path = out / f"radial_{cfg.model}_A{side:g}_{scheme}_{name}_{entry[0]}{entry[1]}.csv"
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["r", "mean_estimate", "truth"])
                for r, v in est_prof:
                    w.writerow([f"{r:.6g}", f"{v:.8g}", f"{tru_prof[r]:.8g}"])


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pseudospec", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("estimate", help="estimate the pseudo-spectrum of a point pattern")
    e.add_argument("--input", required=True, help="pattern CSV with columns x,y[,...],type")
    e.add_argument("--window", required=True, help="window JSON sidecar")
    e.add_argument("--taper-a", type=float, default=0.025)
    e.add_argument("--bandwidth", default="cv", help="a positive number, 'cv', 'opt' or 'raw'")
    e.add_argument("--intensity", default="constant",
                   help="'constant', 'zero' or comma-separated covariates (const,x1,x2,x1sq,x2sq,x1x2)")
    e.add_argument("--grid-scale", type=float, default=4 / 3)
    e.add_argument("--max-norm", type=float, default=1.5 * np.pi)
    e.add_argument("--cv-exclusion", type=float, default=0.1 * np.pi)
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_estimate)

    s = sub.add_parser("simulate", help="simulate Cox model replicates")
    s.add_argument("--model", default="M1", choices=["M1", "M2", "M3"])
    s.add_argument("--side", type=float, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--reps", type=int, default=1)
    s.add_argument("--cell", type=float, default=0.05)
    s.add_argument("--kernel-norm", default="planar", choices=["planar", "linear"])
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("theory", help="analytic pseudo-spectrum and coherences")
    t.add_argument("--model", default="M1", choices=["M1", "M2", "M3"])
    t.add_argument("--side", type=float, default=20.0)
    t.add_argument("--taper-a", type=float, default=0.025)
    t.add_argument("--grid-scale", type=float, default=4 / 3)
    t.add_argument("--max-norm", type=float, default=1.5 * np.pi)
    t.add_argument("--u", type=float, nargs="+", default=None, help="unit-cube point for the local spectrum")
    t.add_argument("--csv", default=None)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_theory)

    b = sub.add_parser("bench", help="run a Monte Carlo study")
    b.add_argument("--config", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--csv", default=None)
    b.add_argument("--radial-dir", default=None)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (PseudospecError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
