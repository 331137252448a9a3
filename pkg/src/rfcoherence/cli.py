"""Command-line front end: spectrum | curves | simulate | fit | oracle-check."""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .correlations import (
    FPI_RESOLUTION,
    g2_filtered,
    has_side_crossover,
    hom_coincidences,
    filtered_spectrum,
    spectrum_analytic,
)
from .emitter import EmitterParams, reference_sets, saturation_p1
from .errors import ConfigError, NumericError, OutputError, RFCoherenceError
from .estimation import (
    coincidence_ratios,
    fit_visibility_curve,
    load_coincidence_csv,
    load_visibility_csv,
    mle_fit_coincidences,
)
from .interferometry import fringe_visibility
from .oracle import oracle_check
from .simulation import SimConfig, g2_from_trace, histogram, simulate_clicks, write_binary
from .simulation import write_csv as write_stream_csv
from .traces import SCHEMA_VERSION, columns_to_csv, read_csv_rows

log = logging.getLogger("rfcoherence")


class Run:
    """Output directory for one command: artifacts, manifest and a timestamped sidecar log."""

    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.dir = cfg.out_dir / command
        try:
            self.dir.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OutputError(f"cannot create {self.dir}: {exc}") from exc
        self.artifacts: list[Path] = []
        self.notes: dict = {}
        self._handler = logging.FileHandler(self.dir / "run.log", mode="w")
        self._handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
        log.addHandler(self._handler)
        log.setLevel(logging.INFO)

    def _write(self, name: str, text: str) -> Path:
        path = self.dir / name
        try:
            path.write_text(text)
        except OSError as exc:
            raise OutputError(f"cannot write {path}: {exc}") from exc
        self.artifacts.append(path)
        log.info("wrote %s", path)
        return path

    def table(self, stem: str, columns: dict, schema: str) -> Path:
        """A table in the configured format."""
        if self.cfg.fmt == "json":
            doc = {"schema_version": SCHEMA_VERSION, "schema": schema,
                   "columns": {k: [_plain(x) for x in v] for k, v in columns.items()}}
            return self.json(f"{stem}.json", doc)
        return self._write(f"{stem}.csv", columns_to_csv(columns, schema))

    def json(self, name: str, doc: dict) -> Path:
        doc = dict(doc)
        doc.setdefault("schema_version", SCHEMA_VERSION)
        return self._write(name, json.dumps(doc, indent=2, sort_keys=True, default=_plain) + "\n")

    def register(self, path: Path):
        self.artifacts.append(Path(path))

    def close(self):
        entries = []
        for p in self.artifacts:
            entries.append({"path": p.name, "sha256": hashlib.sha256(p.read_bytes()).hexdigest()})
        manifest = {"schema_version": SCHEMA_VERSION, "command": self.command, "version": __version__,
                    "config_hash": self.cfg.hash(), "config_source": self.cfg.source,
                    "artifacts": entries, "notes": self.notes}
        try:
            (self.dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        finally:
            log.removeHandler(self._handler)
            self._handler.close()


def _plain(x):
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (str, int, float, bool)) or x is None:
        return x
    return str(x)


# ---------------------------------------------------------------------------
# commands


def cmd_spectrum(cfg: RunConfig) -> Run:
    run = Run(cfg, "spectrum")
    f = cfg.frequency_grid()
    fpi = float(cfg.instrument.get("fpi_resolution_hz", FPI_RESOLUTION))
    raw = spectrum_analytic(cfg.emitter, f)
    conv = spectrum_analytic(cfg.emitter, f, instrument_fwhm=fpi)
    run.table("spectrum_unfiltered", raw.columns(), "spectrum-trace")
    run.table("spectrum_fpi", conv.columns(), "spectrum-trace")
    for port in (cfg.amzi.port_d, cfg.amzi.port_c):
        filt = filtered_spectrum(conv, cfg.amzi, port)
        run.table(f"spectrum_filtered_{port}", filt.columns(), "spectrum-trace")
    comps = {c.name: {"weight": c.weight, "fwhm_hz": c.fwhm} for c in raw.components}
    run.json("spectrum_summary.json", {
        "components": comps,
        "broadband_fwhm_hz": comps["broadband"]["fwhm_hz"],
        "laser_like_fwhm_hz": comps["laser_like"]["fwhm_hz"],
        "laser_like_weight": comps["laser_like"]["weight"],
        "instrument_fwhm_hz": fpi,
        "fringe_period_hz": cfg.amzi.fringe_period,
        "phi": cfg.amzi.phi,
        "filtered_input": "fpi-convolved",
    })
    return run


def _reference(cfg: RunConfig):
    return reference_sets(cfg.reference) if cfg.sweep.get("reference_sets", True) else []


def cmd_curves(cfg: RunConfig) -> Run:
    run = Run(cfg, "curves")
    nbar = cfg.nbar_grid()
    phis = cfg.phi_grid()
    em = cfg.emitter
    p1 = saturation_p1(nbar, em.eta_ab)
    vc = cfg.visibility_curve
    run.table("visibility_vs_nbar", {
        "nbar": nbar, "p1": p1, "p0": 1.0 - p1,
        "visibility": np.sqrt(em.M) * (1.0 - p1),
        "visibility_reference": vc["V0"] / (1.0 + vc["x"] * nbar),
    }, "visibility-vs-nbar")
    pos = p1 > 0
    if not np.all(pos):
        warnings.warn("nbar = 0 rows dropped from the filtered g2 curve (divergent)")
    g0 = np.array([g2_filtered("zero", p) for p in p1[pos]])
    gs = np.array([g2_filtered("side", p) for p in p1[pos]])
    run.table("g2_filtered_vs_nbar", {
        "nbar": nbar[pos], "p1": p1[pos], "g2_zero": g0, "g2_side": gs, "side_over_zero": gs / g0,
    }, "filtered-g2-vs-nbar")

    sets = [("configured", em)] + [(f"nbar_{n:g}", p) for n, p in _reference(cfg)]
    summary = {}
    for label, params in sets:
        h = hom_coincidences(phis, params)
        run.table(f"hom_vs_phi_{label}", {
            "phi": phis, "C0": h.c0, "C_side": h.c_side, "C_zero": h.c_zero,
            "side_ratio": h.side_ratio, "zero_ratio": h.zero_ratio,
        }, "hom-vs-phi")
        summary[label] = {"p0": params.p0, "p1": params.p1, "p2": params.p2, "M": params.M,
                          "Mprime": params.Mprime, "nbar": params.nbar,
                          "side_crossover": has_side_crossover(params),
                          "zero_below_side": bool(np.all(h.c_zero < h.c_side))}
    run.json("curves_summary.json", {"sets": summary, "visibility_plateau": fringe_visibility(em)})
    return run


def _sim_params(cfg: RunConfig) -> EmitterParams:
    s = cfg.sim
    p1, p2 = float(s["p1"]), float(s["p2"])
    return replace(cfg.emitter, p0=1.0 - p1 - p2, p1=p1, p2=p2, M=1.0, Mprime=1.0)


def cmd_simulate(cfg: RunConfig, then_fit: bool = False) -> Run:
    run = Run(cfg, "simulate")
    s = cfg.sim
    params = _sim_params(cfg)
    k = int(s["slots_per_tau"])
    slot = cfg.amzi.tau / k
    phis = [float(p) for p in s["phis"]]
    if not phis:
        raise ConfigError("sim.phis is empty")
    rows = []
    empty = False
    for i, phi in enumerate(phis):
        sim = SimConfig(params, replace(cfg.amzi, phi=phi), slot_width=slot,
                        duration=slot * float(s["slots"]), seed=int(s["seed"]) + i,
                        detector_efficiency=float(s["detector_efficiency"]),
                        dark_rate=float(s["dark_rate"]), phase_drift_rate=float(s["phase_drift_rate"]),
                        segment_slots=s["segment_slots"])
        stream = simulate_clicks(sim)
        log.info("phi=%.6g: %d records over %d slots", phi, len(stream), stream.n_slots)
        if s.get("write_streams", True):
            if cfg.fmt == "csv":
                run.register(write_stream_csv(stream, run.dir / f"clicks_{i:02d}.csv"))
            else:
                path = write_binary(stream, run.dir / f"clicks_{i:02d}.bin")
                run.register(path)
                run.register(path.with_suffix(".layout.json"))
        if len(stream) == 0:
            log.warning("empty histogram at phi=%g: no clicks recorded", phi)
            warnings.warn(f"empty histogram at phi={phi:g}: no clicks recorded")
            empty = True
            continue
        trace = histogram(stream, "cross-c-d", int(s["max_lag_slots"]))
        if not trace.baseline:
            warnings.warn(f"empty histogram at phi={phi:g}: no baseline coincidences")
            empty = True
            continue
        g = g2_from_trace(trace)
        if cfg.fmt == "json":
            run.json(f"histogram_{i:02d}.json", trace.to_json_dict())
        else:
            cols = dict(trace.columns())
            cols["normalized"] = g.values
            cols["normalized_error"] = g.errors
            run.table(f"histogram_{i:02d}", cols, "coincidence-histogram")
        for lag, cls in ((0, "zero"), (k, "side(+tau)"), (-k, "side(-tau)")):
            v, e = g.value_at(lag)
            rows.append((phi, cls, float(v), float(e)))
    run.notes["empty_histogram"] = empty
    run.notes["simulated_params"] = {"p0": params.p0, "p1": params.p1, "p2": params.p2}
    if empty:
        run.notes["fit"] = "skipped: empty histogram"
        return run
    cols = {"phi_radians": [r[0] for r in rows], "class": [r[1] for r in rows],
            "value": [r[2] for r in rows], "error": [r[3] for r in rows]}
    # the fit reads CSV, so this table is always CSV
    path = run._write("coincidences.csv", columns_to_csv(cols, "coincidence-ratios"))
    if then_fit:
        fit_cfg = replace(cfg, fit=dict(cfg.fit, M=1.0))
        fit_run = cmd_fit(fit_cfg, [path])
        fit_run.close()
        run.notes["fit"] = str(fit_run.dir / "fit_result.json")
    return run


def _detect_kind(path: Path) -> str:
    header, _ = read_csv_rows(path)
    if header[:2] == ["nbar", "visibility"]:
        return "visibility"
    if header[:4] == ["phi_radians", "class", "value", "error"]:
        return "coincidence"
    raise ConfigError(f"{path}: unrecognized columns {','.join(header)}")


def cmd_fit(cfg: RunConfig, inputs: list[str | Path]) -> Run:
    if not inputs:
        raise ConfigError("fit needs at least one --input file")
    for p in inputs:
        if not Path(p).is_file():
            raise OutputError(f"input file {p} does not exist")
    run = Run(cfg, "fit")
    for idx, p in enumerate(inputs):
        path = Path(p)
        suffix = "" if len(inputs) == 1 else f"_{idx:02d}"
        kind = _detect_kind(path)
        if kind == "coincidence":
            data = load_coincidence_csv(path)
            res = mle_fit_coincidences(data, float(cfg.fit["M"]), int(cfg.fit["n_starts"]),
                                       int(cfg.fit["seed"]))
            doc = res.to_json_dict()
            doc["input"] = path.name
            run.json(f"fit_result{suffix}.json", doc)
            phi = np.linspace(0.0, math.pi, 181)
            pr = res.parameters
            z, sd = coincidence_ratios(phi, pr["p0"], pr["p1"], pr["p2"], res.meta["M"], pr["Mprime"])
            run.table(f"fit_curve{suffix}", {"phi": phi, "zero_ratio": z, "side_ratio": sd}, "fit-curve")
        else:
            data = load_visibility_csv(path)
            which = cfg.fit["visibility_model"]
            models = ("saturation", "rabi") if which == "both" else (which,)
            docs = {}
            nb = np.geomspace(max(min(r[0] for r in data if r[0] > 0), 1e-6), max(r[0] for r in data), 200)
            curve_cols = {"nbar": nb}
            for m in models:
                res = fit_visibility_curve(data, m)
                docs[m] = res.to_json_dict()
                curve_cols[f"visibility_{m}"] = res.parameters["V0"] / (1.0 + res.parameters["x"] * nb)
            run.json(f"fit_result{suffix}.json", {"input": path.name, "fits": docs})
            run.table(f"fit_curve{suffix}", curve_cols, "fit-curve")
    return run


def cmd_oracle_check(cfg: RunConfig) -> Run:
    run = Run(cfg, "oracle-check")
    o = cfg.oracle
    rng = np.random.default_rng(int(o["seed"]))
    phis = np.linspace(0.0, 2.0 * math.pi, int(o["phi_points"]))
    em = replace(cfg.emitter, M=1.0, Mprime=1.0)
    rows = [dict(r, draw=-1) for r in oracle_check(em, phis, float(o["tol"]))]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i in range(int(o["random_draws"])):
            p = rng.dirichlet([1.0, 1.0, 1.0])
            params = EmitterParams.from_populations(*p, normalize=True)
            phi = rng.uniform(0.0, 2.0 * math.pi)
            rows.extend(dict(r, draw=i) for r in oracle_check(params, [phi], float(o["tol"])))
    cols = {k: [r[k] for r in rows] for k in ("draw", "phi", "class", "closed_form", "oracle", "abs_error", "ok")}
    run.table("oracle_check", cols, "oracle-check")
    failures = sum(not r["ok"] for r in rows)
    run.json("oracle_summary.json", {"comparisons": len(rows), "failures": failures,
                                     "max_abs_error": max(r["abs_error"] for r in rows), "tol": o["tol"]})
    run.notes["failures"] = failures
    return run


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration (defaults to the shipped device)")
    common.add_argument("--out", help="output root directory (default: out)")
    common.add_argument("--seed", type=int, help="override the random seed")
    common.add_argument("--format", choices=["csv", "json"], help="table format")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    p = argparse.ArgumentParser(prog="rfcoherence", description=__doc__)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("spectrum", parents=[common], help="unfiltered, FPI-convolved and AMZI-filtered spectra")
    sub.add_parser("curves", parents=[common], help="visibility, filtered g2 and HOM curves")
    sp = sub.add_parser("simulate", parents=[common], help="Monte Carlo click streams and histograms")
    sp.add_argument("--fit", action="store_true", help="fit the simulated coincidences right away")
    fp = sub.add_parser("fit", parents=[common], help="fit coincidence or visibility CSV files")
    fp.add_argument("--input", action="append", default=[], help="CSV file to fit (repeatable)")
    sub.add_parser("oracle-check", parents=[common], help="closed forms against the Fock-space oracle")
    return p


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    out = dict(cfg.output)
    if args.out:
        out["dir"] = args.out
    if args.format:
        out["format"] = args.format
    sim, fit, oracle = dict(cfg.sim), dict(cfg.fit), dict(cfg.oracle)
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("seed must be non-negative")
        sim["seed"] = fit["seed"] = oracle["seed"] = args.seed
    return replace(cfg, output=out, sim=sim, fit=fit, oracle=oracle)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
        log.addHandler(handler)
    run = None
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "spectrum":
            run = cmd_spectrum(cfg)
        elif args.command == "curves":
            run = cmd_curves(cfg)
        elif args.command == "simulate":
            run = cmd_simulate(cfg, then_fit=args.fit)
        elif args.command == "fit":
            run = cmd_fit(cfg, args.input)
        else:
            run = cmd_oracle_check(cfg)
        failures = run.notes.get("failures", 0) if args.command == "oracle-check" else 0
        run.close()
        run = None
        if failures:
            print(f"error: {failures} oracle comparisons exceed tolerance", file=sys.stderr)
            return NumericError.exit_code
    except RFCoherenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return OutputError.exit_code
    finally:
        if run is not None:
            run.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
