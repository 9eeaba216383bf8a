"""Command-line interface.

Every subcommand resolves one configuration (defaults, optionally a config
file, optionally repeated --set key=value overrides), runs, and writes one
table to --out (default stdout) as csv or json.  Exit codes: 0 on success,
1 for configuration or resolution problems, 2 when a run completed but an
analysis quality gate failed (fringe fit, linearity, oracle threshold).
"""

from __future__ import annotations

import argparse
import sys
import time

from . import experiments, io, observables, three_level
from .config import ConfigError
from .observables import FringeFitError, LinearityError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_QUALITY = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems are config problems here
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _add_common(sub: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        sub.add_argument("--config", metavar="FILE", help="config file (key = value lines)")
        sub.add_argument("--set", metavar="KEY=VALUE", action="append", default=[],
                         dest="overrides", help="override one config key (repeatable)")
    sub.add_argument("--out", metavar="FILE", help="output path (default stdout)")
    sub.add_argument("--format", choices=("csv", "json"), default="csv")
    sub.add_argument("--workers", type=int, default=1, metavar="N")
    sub.add_argument("--manifest", metavar="FILE", help="also write a JSON run manifest")


def _resolve_config(args):
    items = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            items = io.parse_items(fh.read())
    for pair in getattr(args, "overrides", []):
        if "=" not in pair:
            raise ConfigError(f"--set needs KEY=VALUE, got {pair!r}")
        key, value = (part.strip() for part in pair.split("=", 1))
        items[key] = value
    return io.build_from_items(items)


def _emit(args, table: io.OutputTable, cfg, argv) -> None:
    text = io.render_table(table, args.format)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        print(f"[{time.strftime('%Y-%m-%dT%H:%M:%S')}] wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    if args.manifest and cfg is not None:
        manifest = io.make_manifest(cfg, table.meta.get("subcommand", ""), argv)
        with open(args.manifest, "w", encoding="utf-8", newline="") as fh:
            fh.write(manifest.to_json())
        print(f"[{time.strftime('%Y-%m-%dT%H:%M:%S')}] wrote {args.manifest}", file=sys.stderr)


def _cmd_simulate(args, argv) -> int:
    cfg = _resolve_config(args)
    record = experiments.run_trajectories(cfg, record_stride=args.record_stride,
                                          workers=args.workers)
    table = io.OutputTable(
        columns=("t[s]", "P_a[1]", "P_b[1]", "z_a[m]", "z_b[m]", "s_a[m]", "s_b[m]"),
        rows=[],
        meta=io.standard_meta(cfg, "simulate"),
    )
    for i in range(record.times.size):
        table.add_row(record.times[i], record.pop_a[i], record.pop_b[i],
                      record.centroid_a[i], record.centroid_b[i],
                      record.spread_a[i], record.spread_b[i])
    _emit(args, table, cfg, argv)
    return EXIT_OK


def _cmd_scan_phase(args, argv) -> int:
    cfg = _resolve_config(args)
    phi = io.parse_value_grid(args.phi) if args.phi else None
    scan = observables.scan_phase(cfg, phi_values=phi, workers=args.workers)
    fit = observables.fit_fringe(scan)
    extra = {
        "offset": io.format_float(fit.offset),
        "amplitude": io.format_float(fit.amplitude),
        "visibility": io.format_float(fit.visibility),
        "phi_min": io.format_float(fit.phi_min),
        "rms_residual": io.format_float(fit.rms_residual),
    }
    table = io.OutputTable(columns=("phi[rad]", "P_b[1]"), rows=[],
                           meta=io.standard_meta(cfg, "scan-phase", extra))
    for i in range(scan.phi.size):
        table.add_row(scan.phi[i], scan.pb[i])
    _emit(args, table, cfg, argv)
    return EXIT_OK


def _cmd_sweep_plate(args, argv) -> int:
    cfg = _resolve_config(args)
    offsets = io.parse_value_grid(args.offsets) if args.offsets else None
    rates = tuple(io.parse_value_grid(args.rates)) if args.rates else experiments.SWEEP_ROTATION_RATES
    result = experiments.sweep_plate_position(cfg, dl_over_l=offsets, rotation_rates=rates,
                                              workers=args.workers)
    table = io.OutputTable(
        columns=("dl_over_l[1]", "alpha[1]", "visibility[1]", "phi_min[rad]", "eta[1]", "fit_ok[1]"),
        rows=[],
        meta=io.standard_meta(cfg, "sweep-plate",
                              {"rotation_rates": ",".join(io.format_float(r) for r in result.rates)}),
    )
    for row in result.rows:
        table.add_row(row.dl_over_l, row.amplitude, row.visibility, row.phi_min,
                      row.eta, 1.0 if row.fit_ok else 0.0)
    _emit(args, table, cfg, argv)
    return EXIT_OK


def _cmd_area(args, argv) -> int:
    cfg = _resolve_config(args)
    rates = io.parse_value_grid(args.rates) if args.rates else None
    phi = io.parse_value_grid(args.phi) if args.phi else None
    est = observables.effective_area(cfg, rotation_rates=rates, phi_values=phi,
                                     workers=args.workers)
    extra = {
        "slope": io.format_float(est.slope),
        "area": io.format_float(est.area),
        "reference_area": io.format_float(est.reference_area),
        "eta": io.format_float(est.eta),
        "linearity_residual": io.format_float(est.linearity_residual),
    }
    table = io.OutputTable(columns=("rate[rad/s]", "dphi[rad]"), rows=[],
                           meta=io.standard_meta(cfg, "area", extra))
    for i in range(est.rates.size):
        table.add_row(est.rates[i], est.phase_shifts[i])
    _emit(args, table, cfg, argv)
    return EXIT_OK


def _cmd_bci(args, argv) -> int:
    cfg = experiments.bci_config(zone_separation=args.zone_separation,
                                 nodes=args.nodes, time_steps=args.steps,
                                 packet_width=args.packet_width)
    if args.no_mirror:
        # without the central zone there is no fringe to fit, so skip the
        # area extraction and report the raw scan and its peak-to-peak level
        cfg = experiments.no_mirror_config(cfg)
        scan = observables.scan_phase(cfg, workers=args.workers)
        top = float(scan.pb.max())
        bottom = float(scan.pb.min())
        extra = {
            "visibility": io.format_float((top - bottom) / (top + bottom) if top + bottom > 0.0 else 0.0),
            "note": "raw peak-to-peak level, no first-harmonic fit",
        }
        table = io.OutputTable(columns=("phi[rad]", "P_b[1]"), rows=[],
                               meta=io.standard_meta(cfg, "bci", extra))
        for i in range(scan.phi.size):
            table.add_row(scan.phi[i], scan.pb[i])
        _emit(args, table, cfg, argv)
        return EXIT_OK
    result = experiments.run_bci(cfg, workers=args.workers)
    est = result.estimate
    extra = {
        "visibility": io.format_float(result.fit.visibility),
        "phi_min": io.format_float(result.fit.phi_min),
        "area": io.format_float(est.area),
        "reference_area": io.format_float(est.reference_area),
        "eta": io.format_float(est.eta),
    }
    table = io.OutputTable(columns=("phi[rad]", "P_b[1]"), rows=[],
                           meta=io.standard_meta(cfg, "bci", extra))
    for i in range(result.scan.phi.size):
        table.add_row(result.scan.phi[i], result.scan.pb[i])
    _emit(args, table, cfg, argv)
    return EXIT_OK


def _cmd_linearity(args, argv) -> int:
    cfg = _resolve_config(args)
    rates = tuple(io.parse_value_grid(args.rates)) if args.rates else experiments.LINEARITY_RATE_GRID
    result = experiments.sagnac_linearity(cfg, rate_grid=rates, workers=args.workers)
    extra = {
        "reference_slope": io.format_float(result.reference_slope),
        "max_linear_rate": io.format_float(result.max_linear_rate),
    }
    table = io.OutputTable(columns=("rate[rad/s]", "dphi[rad]", "model[rad]", "deviation[1]"),
                           rows=[], meta=io.standard_meta(cfg, "linearity", extra))
    for i in range(result.rates.size):
        table.add_row(result.rates[i], result.phase_shifts[i],
                      result.reference_slope * result.rates[i], result.deviations[i])
    _emit(args, table, cfg, argv)
    return EXIT_OK


def _cmd_oracle_check(args, argv) -> int:
    scales = io.parse_value_grid(args.scales)
    rows = []
    worst = 0.0
    for scale in scales:
        cfg = three_level.comparison_config(detuning_scale=float(scale), nodes=args.nodes,
                                            pulse_length=args.pulse_length)
        cmp_res = three_level.compare_adiabatic(cfg)
        rows.append((float(scale), cmp_res.max_population_deviation,
                     cmp_res.max_excited_fraction, cmp_res.excited_bound,
                     cmp_res.min_final_fidelity))
        worst = max(worst, cmp_res.max_population_deviation)
    table = io.OutputTable(
        columns=("detuning_scale[1]", "max_pop_dev[1]", "max_P_e[1]", "P_e_bound[1]", "fidelity[1]"),
        rows=[], meta=io.standard_meta(None, "oracle-check"),
    )
    for row in rows:
        table.add_row(*row)
    _emit(args, table, None, argv)
    if args.max_deviation is not None and worst > args.max_deviation:
        print(f"oracle deviation {worst:.3e} exceeds --max-deviation {args.max_deviation:.3e}",
              file=sys.stderr)
        return EXIT_QUALITY
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="ramanci",
                     description="Raman interferometer simulator (guided and three-zone)")
    subs = parser.add_subparsers(dest="command", required=True)

    sim = subs.add_parser("simulate", help="propagate once, tabulate the trajectory")
    sim.add_argument("--record-stride", type=int, default=20, metavar="N")
    _add_common(sim)
    sim.set_defaults(func=_cmd_simulate)

    scan = subs.add_parser("scan-phase", help="plate-phase fringe scan plus fit")
    scan.add_argument("--phi", metavar="GRID", help="phase grid, start:stop:count or list")
    _add_common(scan)
    scan.set_defaults(func=_cmd_scan_phase)

    sweep = subs.add_parser("sweep-plate", help="contrast and area versus plate offset")
    sweep.add_argument("--offsets", metavar="GRID", help="dl/l grid, start:stop:count or list")
    sweep.add_argument("--rates", metavar="GRID", help="rotation rates for the area fit")
    _add_common(sweep)
    sweep.set_defaults(func=_cmd_sweep_plate)

    area = subs.add_parser("area", help="effective Sagnac area from rotation response")
    area.add_argument("--rates", metavar="GRID", help="rotation rates, must bracket zero")
    area.add_argument("--phi", metavar="GRID", help="phase grid per rate")
    _add_common(area)
    area.set_defaults(func=_cmd_area)

    bci = subs.add_parser("bci", help="three-zone interferometer on the canned geometry")
    bci.add_argument("--zone-separation", type=float, default=3.0e-3, metavar="L")
    bci.add_argument("--nodes", type=int, default=128)
    bci.add_argument("--steps", type=int, default=80000)
    bci.add_argument("--packet-width", type=float, default=None, metavar="W",
                     help="packet 1/e half-width in m (default: momentum-narrow, 200/k)")
    bci.add_argument("--no-mirror", action="store_true",
                     help="drop the central pi zone (the fringe collapses once the "
                          "packet is narrower than the recoil separation of the arms, "
                          "e.g. --packet-width 6.2e-8)")
    _add_common(bci, config=False)
    bci.set_defaults(func=_cmd_bci)

    lin = subs.add_parser("linearity", help="fringe shift versus rotation rate")
    lin.add_argument("--rates", metavar="GRID", help="rate grid spanning at least a decade")
    _add_common(lin)
    lin.set_defaults(func=_cmd_linearity)

    oracle = subs.add_parser("oracle-check", help="two-level engine versus three-level reference")
    oracle.add_argument("--scales", default="1", metavar="GRID",
                        help="detuning scale factors (default 1)")
    oracle.add_argument("--nodes", type=int, default=8)
    oracle.add_argument("--pulse-length", type=float, default=None, metavar="L")
    oracle.add_argument("--max-deviation", type=float, default=None,
                        help="fail (exit 2) if any population deviation exceeds this")
    _add_common(oracle, config=False)
    oracle.set_defaults(func=_cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args, argv)
    except (ConfigError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (FringeFitError, LinearityError) as err:
        print(f"analysis failed: {err}", file=sys.stderr)
        return EXIT_QUALITY


if __name__ == "__main__":
    sys.exit(main())
