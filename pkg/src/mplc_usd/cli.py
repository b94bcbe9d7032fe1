"""Command-line front end.

Verbs: ``design``, ``simulate``, ``sweep``, ``sort-images``. Exit codes are
0 on success, 1 for invalid input or configuration, 2 for file errors and
3 for numerical failure (non-convergence in strict mode).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .errors import ConstructionViolated, DegenerateInput, InvalidArgument, NoSolution, ResolutionWarning
from .experiment import (
    Geometry,
    build_sorter,
    classification_accuracy,
    confusion_matrix,
    image_fidelities,
    image_usd,
    run_report,
    simulate_outcomes,
    sorter_fields,
)
from .fileio import (
    MaskFileError,
    config_hash,
    image_field,
    load_system,
    read_image,
    save_system,
    write_json,
    write_matrix_csv,
)

log = logging.getLogger("mplc_usd")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERICAL = 0, 1, 2, 3
AGGREGATE_COLUMNS = ["d", "fidelity", "p_err", "bound", "below_bound", "eta", "status"]


class NumericalFailure(RuntimeError):
    """Training did not converge and strict mode is on."""


# -- helpers -----------------------------------------------------------------


def _config(args) -> RunConfig:
    overrides = {
        "run.dimensions": args.d,
        "run.fidelities": args.fidelity,
        "wfm.seed": args.seed,
        "wfm.max_sweeps": getattr(args, "sweeps", None),
        "wfm.rule": getattr(args, "rule", None),
        "out": args.out,
        "jobs": args.jobs,
        "strict": True if args.strict else None,
        "images.pixels_are": getattr(args, "pixels_are", None),
    }
    return load_config(args.config, overrides)


def _check_converged(report, strict: bool, where: str) -> None:
    if report is not None and not report.converged:
        msg = f"{where}: wavefront matching did not converge in {report.sweeps} sweeps (eta={report.eta_trace[-1]:.4f})"
        if strict:
            raise NumericalFailure(msg)
        log.warning(msg)


def _single(cfg: RunConfig) -> tuple[int, float]:
    if len(cfg.run.dimensions) != 1 or len(cfg.run.fidelities) != 1:
        raise InvalidArgument("this command takes one dimension and one fidelity; use 'sweep' for grids")
    return cfg.run.dimensions[0], cfg.run.fidelities[0]


def _cell_spec(cfg: RunConfig, d: int, F: float) -> dict:
    return {
        "d": d,
        "fidelity": F,
        "branch": cfg.run.branch,
        "geometry": cfg.geometry.model_dump(),
        "wfm": cfg.wfm.model_dump(),
    }


def _design_to_dir(spec: dict, out: Path, strict: bool):
    """Train one sorter and write masks, manifest and training report."""
    design = build_sorter(
        spec["d"], spec["fidelity"], Geometry(**spec["geometry"]), _wfm(spec["wfm"]), spec["branch"]
    )
    extra = {"design": design.params(), "wfm": spec["wfm"], "cell_hash": config_hash(spec)}
    save_system(design.system, out, extra)
    write_json(out / "wfm_report.json", design.report.to_dict())
    _check_converged(design.report, strict, str(out))
    return design


def _wfm(section: dict):
    from .mplc import WFMOptions

    return WFMOptions(**section)


def _write_report(design, outcomes, out: Path, extra: dict | None = None) -> dict:
    report = run_report(design, outcomes)
    report.update(extra or {})
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "report.json", report)
    d = design.d
    head = [f"out{k + 1}" for k in range(d)] + ["ambiguous"]
    write_matrix_csv(out / "raw.csv", report["raw"], head)
    write_matrix_csv(out / "normalized.csv", report["normalized"], head)
    write_matrix_csv(out / "corrected.csv", report["corrected"], head)
    write_matrix_csv(out / "confusion.csv", report["confusion"], head[:d])
    return report


# -- verbs -------------------------------------------------------------------


def cmd_design(args) -> int:
    cfg = _config(args)
    d, F = _single(cfg)
    out = Path(cfg.out)
    design = _design_to_dir(_cell_spec(cfg, d, F), out, cfg.strict)
    print(f"wrote {design.geometry.n_planes} masks to {out} (eta={design.report.eta_trace[-1]:.4f})")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.manifest:
        system, man = load_system(args.manifest, args.mask_format)
        if "design" not in man:
            raise MaskFileError(Path(args.manifest), "manifest has no design parameters")
        p = man["design"]
        design = sorter_fields(p["d"], p["fidelity"], Geometry(**p["geometry"]), p["branch"])
        design.system = system
        out = Path(args.out) if args.out else (Path(args.manifest) if Path(args.manifest).is_dir() else Path(args.manifest).parent)
    else:
        cfg = _config(args)
        d, F = _single(cfg)
        out = Path(cfg.out)
        spec = _cell_spec(cfg, d, F)
        design = sorter_fields(d, F, Geometry(**spec["geometry"]), cfg.run.branch) if args.ideal else _design_to_dir(spec, out, cfg.strict)
    outcomes = simulate_outcomes(design, ideal=args.ideal)
    report = _write_report(design, outcomes, out)
    print(f"p_err={report['p_err']:.6f} mesd_bound={report['mesd_bound']:.6f} -> {out / 'report.json'}")
    return EXIT_OK


def _run_cell(spec: dict, cell_dir: str, strict: bool, resume: bool) -> dict:
    """One sweep cell; returns its aggregate row. Never raises."""
    cell = Path(cell_dir)
    h = config_hash(spec)
    row = {"d": spec["d"], "fidelity": spec["fidelity"], "p_err": "", "bound": "", "below_bound": "", "eta": ""}
    rep_path = cell / "report.json"
    if resume and rep_path.exists():
        try:
            prev = json.loads(rep_path.read_text())
            if prev.get("cell_hash") == h:
                row.update(_row_from_report(prev), status="skipped")
                return row
        except ValueError:
            pass
    try:
        with warnings.catch_warnings():
            if strict:
                warnings.simplefilter("error", ResolutionWarning)
            design = _design_to_dir(spec, cell, strict)
            report = _write_report(design, simulate_outcomes(design), cell, {"cell_hash": h})
        row.update(_row_from_report(report), status="ok")
    except Exception as exc:  # recorded per cell, the sweep carries on
        log.error("cell d=%s F=%s failed: %s", spec["d"], spec["fidelity"], exc)
        row["status"] = f"error: {type(exc).__name__}: {exc}"
    return row


def _row_from_report(rep: dict) -> dict:
    eta = rep.get("wfm", {}).get("eta_trace") or [None]
    return {
        "p_err": rep["p_err"],
        "bound": rep["mesd_bound"],
        "below_bound": bool(rep["p_err"] < rep["mesd_bound"]),
        "eta": eta[-1],
    }


def cmd_sweep(args) -> int:
    cfg = _config(args)
    root = Path(cfg.out)
    root.mkdir(parents=True, exist_ok=True)
    jobs_in = []
    for d in cfg.run.dimensions:
        for F in cfg.run.fidelities:
            spec = _cell_spec(cfg, d, F)
            jobs_in.append((spec, str(root / f"d{d}_F{F:.4f}"), cfg.strict, args.resume))
    if cfg.jobs > 1 and len(jobs_in) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            rows = list(ex.map(_run_cell, *zip(*jobs_in)))
    else:
        rows = [_run_cell(*j) for j in jobs_in]
    with open(root / "aggregate.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=AGGREGATE_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow(r)
    failed = [r for r in rows if str(r["status"]).startswith("error")]
    print(f"{len(rows)} cells, {len(failed)} failed -> {root / 'aggregate.csv'}")
    if failed and cfg.strict:
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_sort_images(args) -> int:
    cfg = _config(args)
    if len(args.images) < 2:
        raise InvalidArgument("need at least two images")
    imgs = [read_image(p) for p in args.images]
    shapes = {im.shape for im in imgs}
    if len(shapes) != 1:
        raise InvalidArgument(f"images have mismatched sizes: {sorted(shapes)}")
    geom = cfg.geometry.build()
    grid = geom.grid()
    fields = [image_field(im, grid, cfg.images.pixels_are, cfg.images.scale) for im in imgs]
    out = Path(cfg.out)
    if args.report_gram_only:
        fid = image_fidelities(fields)
        for row in fid:
            print(" ".join(f"{v:.4f}" for v in row))
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "gram.json", {"images": [str(p) for p in args.images], "fidelities": fid.tolist()})
        return EXIT_OK
    res = image_usd(fields, geom, cfg.wfm.build(), fidelity_tolerance=cfg.images.fidelity_tolerance)
    save_system(res.design.system, out, {"images": [str(p) for p in args.images], "wfm": cfg.wfm.model_dump()})
    conf = confusion_matrix(res.outcomes.normalized)
    report = {
        "images": [str(p) for p in args.images],
        "fidelities": res.fidelities.tolist(),
        "eta_trace": res.design.report.eta_trace,
        "raw": res.outcomes.raw.tolist(),
        "normalized": res.outcomes.normalized.tolist(),
        "confusion": conf.tolist(),
        "accuracy": res.accuracy,
    }
    write_json(out / "report.json", report)
    write_matrix_csv(out / "confusion.csv", conf)
    _check_converged(res.design.report, cfg.strict, str(out))
    print(f"accuracy={classification_accuracy(res.outcomes.normalized):.4f} -> {out / 'report.json'}")
    return EXIT_OK


# -- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="wavefront-matching seed")
    common.add_argument("--jobs", type=int, help="parallel sweep cells")
    common.add_argument("--strict", action="store_true", help="treat non-convergence and under-sampling as errors")
    common.add_argument("--d", type=int, nargs="+", help="state dimension(s)")
    common.add_argument("--fidelity", type=float, nargs="+", help="pairwise fidelity value(s)")
    common.add_argument("--sweeps", type=int, help="maximum wavefront-matching sweeps")
    common.add_argument("--rule", choices=["A", "B"], help="mask update rule")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mplc-usd", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)
    sub.add_parser("design", parents=[common], help="train a sorter and export its masks")
    s = sub.add_parser("simulate", parents=[common], help="simulate detection and write reports")
    s.add_argument("--manifest", help="run directory or manifest.json of a designed sorter")
    s.add_argument("--mask-format", choices=["text", "pgm"], default="text")
    s.add_argument("--ideal", action="store_true", help="detect the target fields directly, bypassing the masks")
    s = sub.add_parser("sweep", parents=[common], help="design and simulate a (d, F) grid")
    s.add_argument("--resume", action="store_true", help="skip cells whose report matches the config")
    s = sub.add_parser("sort-images", parents=[common], help="USD classification of overlapping images")
    s.add_argument("images", nargs="+")
    s.add_argument("--pixels-are", choices=["amplitude", "intensity"])
    s.add_argument("--report-gram-only", action="store_true", help="print pairwise fidelities and stop")
    return p


VERBS = {"design": cmd_design, "simulate": cmd_simulate, "sweep": cmd_sweep, "sort-images": cmd_sort_images}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        with warnings.catch_warnings():
            if args.strict:
                warnings.simplefilter("error", ResolutionWarning)
            return VERBS[args.verb](args)
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (MaskFileError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, InvalidArgument, DegenerateInput, NoSolution, ConstructionViolated, ResolutionWarning) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
