#!/usr/bin/env python3
"""
Hénon Heights command line
Every operation as a subcommand; results go to stdout (or --out) as JSON or CSV.

Exit codes: 0 ok, 1 usage, 2 invalid input, 3 refused computation.
"""

import argparse
import hashlib
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional, Tuple

from sympy import isprime

from .arch_green import Curve, curve_green_mass, escape_data, green, green_grid, green_total, write_green_csv
from .config import ConfigError, RunConfig, resolve_config
from .family_sweep import (
    ExcludedParameterError,
    classify_dissipative,
    exceptional_parameters,
    jacobian_map,
    load_family_spec,
    parse_params,
    poly_to_string,
    sweep_common_periodic,
    unit_locus_grid,
)
from .heights import HeightCache, HeightPrecisionError, canonical_height, northcott_check
from .henon_core import (
    ComputationRefused,
    MapSpecError,
    MixedVariantError,
    UniPoly,
    format_rational,
    load_map_spec,
    parse_point,
    parse_rational,
)
from .measure import (
    harmonicity_probe,
    measure_discrepancy,
    measure_from_periodic,
    measure_rigidity_check,
    read_cloud_csv,
    support_check,
    write_cloud_csv,
)
from .nonarch_green import relevant_places
from .periodic import (
    common_periodic,
    fixed_points_exact_resultant,
    numeric_coverage,
    periodic_modp,
    periodic_numeric,
    rational_periodic_points,
)

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_REFUSED = 0, 1, 2, 3

Result = Tuple[Dict[str, Any], Optional[Callable[[io.TextIOBase], None]]]


class UsageParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _spec_hash(spec: Dict) -> str:
    spec = {k: v for k, v in spec.items() if k != "name"}
    return hashlib.sha256(json.dumps(spec, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


def _point(text: str):
    """Rational point if possible, otherwise numeric"""
    try:
        return parse_point(text, exact=True)
    except MapSpecError:
        return parse_point(text, exact=False)


def _float_list(text: str) -> List[float]:
    return [float(s) for s in text.split(",") if s.strip()]


def _require(condition: bool, message: str, field: str):
    if not condition:
        raise MapSpecError(message, field=field)


@contextmanager
def _executor(config: RunConfig):
    if config.workers <= 1:
        yield None
        return
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        yield pool


# Handlers

def cmd_eval(args, config: RunConfig) -> Result:
    f = load_map_spec(args.map)
    g = f.inverse() if args.inverse else f
    orbit = g.orbit(_point(args.point), args.iterations)
    return {"map_hash": f.canonical_hash(), "orbit": [q.to_json() for q in orbit]}, None


def cmd_jacobian(args, config: RunConfig) -> Result:
    if args.map:
        f = load_map_spec(args.map)
        jac = f.jacobian
        return {"map_hash": f.canonical_hash(),
                "jacobian": format_rational(jac) if isinstance(jac, Fraction) else repr(jac),
                "dynamical_degree": f.dynamical_degree}, None
    if not args.family:
        raise MapSpecError("jacobian needs --map or --family", field="map")
    F = load_family_spec(args.family)
    out = {"family_hash": _spec_hash(F.to_spec()),
           "jacobian_map": poly_to_string(jacobian_map(F)),
           "dynamical_degree": F.dynamical_degree,
           "excluded": [format_rational(b) for b in F.excluded_rational]}
    if args.samples:
        samples = [parse_rational(s, "samples") for s in args.samples.split(",")]
        out["dissipativity"] = classify_dissipative(F, samples).to_dict()
    return out, None


def cmd_green(args, config: RunConfig) -> Result:
    f = load_map_spec(args.map)
    out: Dict[str, Any] = {"map_hash": f.canonical_hash(), "escape_radius": escape_data(f).radius}
    if args.grid:
        re_range = tuple(_float_list(args.re))
        im_range = tuple(_float_list(args.im))
        with _executor(config) as pool:
            rows = green_grid(f, complex(args.x0), re_range, im_range, args.resolution, config.tol,
                              config.n_max, executor=pool)
        out["rows"] = [list(r) for r in rows]
        return out, lambda fh: write_green_csv(rows, fh)

    if not args.point:
        raise MapSpecError("green needs --point (or --grid)", field="point")
    q = _point(args.point)
    if args.direction == "total":
        value = green_total(f, q, config.tol, config.n_max)
    else:
        value = green(f, args.direction, q, config.tol, config.n_max)
    out.update(value.to_dict())
    out["direction"] = args.direction
    return out, None


def cmd_height(args, config: RunConfig) -> Result:
    f = load_map_spec(args.map)
    q = parse_point(args.point, exact=True)
    cache = HeightCache(config.cache_path) if config.cache_path else None
    height = canonical_height(f, q, config.tol, config.n_max, config.padic_max_iterates,
                              config.padic_max_bits, cache=cache)
    out = {"map_hash": f.canonical_hash(), "point": str(q), **height.to_dict()}
    if args.eps is not None:
        if args.eps <= height.error:
            raise HeightPrecisionError(f"eps={args.eps} does not exceed the height error {height.error}")
        out["periodic_by_height"] = height.total <= args.eps
    return out, None


def cmd_periodic(args, config: RunConfig) -> Result:
    f = load_map_spec(args.map)
    primes = args.prime or config.primes
    _require(args.max_period >= 1, f"--max-period must be >= 1, got {args.max_period}", "max_period")
    for p in primes:
        _require(isprime(p), f"--prime {p} is not prime", "prime")
    out: Dict[str, Any] = {"map_hash": f.canonical_hash(), "max_period": args.max_period}
    out["modp"] = []
    for p in primes:
        cycles = periodic_modp(f, p, args.max_period)
        out["modp"].append({"prime": p, "good_reduction": cycles.good_reduction,
                            "cycles_by_period": _histogram(c.period for c in cycles.cycles)})
    out["rational_points"] = [q.to_json() for q in
                              rational_periodic_points(f, args.max_period, primes, config.height_bound)]
    if args.resultant:
        out["resultant"] = [fixed_points_exact_resultant(f, n, config.resultant_degree_cap,
                                                         config.expansion_degree_cap).to_dict()
                            for n in range(1, min(args.max_period, 3) + 1)]
    if args.numeric:
        numeric = []
        for n in range(1, args.max_period + 1):
            cycles = periodic_numeric(f, n, config.tol, args.starts or config.newton_starts or None, config.seed)
            numeric.append({"n": n, "coverage": numeric_coverage(f, n, cycles),
                            "cycles": [c.to_dict() for c in cycles if c.period == n]})
        out["numeric"] = numeric
    return out, None


def _histogram(values) -> Dict[str, int]:
    counts: Dict[str, int] = {}
    for v in values:
        counts[str(v)] = counts.get(str(v), 0) + 1
    return counts


def cmd_common(args, config: RunConfig) -> Result:
    _require(args.max_period >= 1, f"--max-period must be >= 1, got {args.max_period}", "max_period")
    f, g = load_map_spec(args.map_f), load_map_spec(args.map_g)
    result = common_periodic(f, g, args.max_period, config.tol, config.primes, config.height_bound,
                              config.newton_starts or None, config.seed, config.iterate_search_bound,
                              config.expansion_degree_cap)
    return {"map_hash": [f.canonical_hash(), g.canonical_hash()], **result.to_dict()}, None


def cmd_sweep(args, config: RunConfig) -> Result:
    _require(args.max_period >= 1, f"--max-period must be >= 1, got {args.max_period}", "max_period")
    F, G = load_family_spec(args.family_f), load_family_spec(args.family_g)
    params = parse_params(args.params)
    with _executor(config) as pool:
        report = sweep_common_periodic(F, G, params, args.max_period, args.eps or config.eps, config.seed,
                                       config.tol, config.primes, config.height_bound,
                                       config.iterate_search_bound, executor=pool)
    out = {"family_hash": [_spec_hash(F.to_spec()), _spec_hash(G.to_spec())],
           "note": "d_observed is an empirical lower bound over the sampled parameters",
           **report.to_dict()}
    return out, report.write_csv


def cmd_measure(args, config: RunConfig) -> Result:
    _require(args.period >= 1, f"--period must be >= 1, got {args.period}", "period")
    f = load_map_spec(args.map)
    sample = measure_from_periodic(f, args.period, config.tol, args.starts or config.newton_starts or None,
                                   config.seed)
    check = support_check(f, sample, args.threshold, config.tol, config.n_max)
    out = {"map_hash": f.canonical_hash(), "period": args.period, "points": len(sample.points),
           "low_quality": sample.low_quality, "support": check.to_dict()}
    return out, lambda fh: write_cloud_csv(sample, fh)


def cmd_measure_compare(args, config: RunConfig) -> Result:
    with open(args.a) as fa, open(args.b) as fb:
        s1, s2 = read_cloud_csv(fa), read_cloud_csv(fb)
    if args.map_a and args.map_b:
        f, g = load_map_spec(args.map_a), load_map_spec(args.map_b)
        result = measure_rigidity_check(f, g, s1, s2, args.threshold, config.iterate_search_bound,
                                        config.expansion_degree_cap)
        return {"map_hash": [f.canonical_hash(), g.canonical_hash()], **result.to_dict()}, None
    return {"discrepancy": measure_discrepancy(s1, s2)}, None


def _curve(args) -> Curve:
    if args.curve == "vertical":
        return Curve.vertical()
    if args.curve == "horizontal":
        return Curve.horizontal()
    if not (args.curve_x and args.curve_y):
        raise MapSpecError("custom curves need --curve-x and --curve-y coefficient lists", field="curve")
    return Curve(UniPoly(tuple(complex(c) for c in _float_list(args.curve_x))),
                 UniPoly(tuple(complex(c) for c in _float_list(args.curve_y))))


def cmd_curve_mass(args, config: RunConfig) -> Result:
    _require(args.r_hi > args.r_lo > 0, f"need --r-hi > --r-lo > 0, got {args.r_lo}, {args.r_hi}", "r_lo")
    _require(args.radii >= 8, f"--radii must be >= 8, got {args.radii}", "radii")
    f = load_map_spec(args.map)
    curve = _curve(args)
    out: Dict[str, Any] = {"map_hash": f.canonical_hash()}
    out.update(curve_green_mass(f, curve, args.r_lo, args.r_hi, args.radii, config.quad_points,
                                max(config.tol, 1e-10), config.n_max).to_dict())
    if args.alpha is not None and args.disk:
        disks = []
        for text in args.disk:
            re, im, r = _float_list(text)
            disks.append((complex(re, im), r))
        out["harmonicity_defect"] = harmonicity_probe(f, args.alpha, curve, disks, config.quad_points,
                                                      config.tol, config.n_max)
    return out, None


def cmd_unit_locus(args, config: RunConfig) -> Result:
    F, G = load_family_spec(args.family_f), load_family_spec(args.family_g)
    box = tuple(_float_list(args.box))
    if len(box) != 4:
        raise MapSpecError("--box needs four numbers re_lo,re_hi,im_lo,im_hi", field="box")
    _require(args.resolution >= 16, f"--resolution must be >= 16, got {args.resolution}", "resolution")
    result = unit_locus_grid(F, G, box, args.resolution)
    return {"family_hash": [_spec_hash(F.to_spec()), _spec_hash(G.to_spec())], **result.to_dict()}, None


def cmd_exceptional(args, config: RunConfig) -> Result:
    F, G = load_family_spec(args.family_f), load_family_spec(args.family_g)
    pairs = exceptional_parameters(F, G, args.max_iterate, args.max_iterate, config.expansion_degree_cap)
    return {"family_hash": [_spec_hash(F.to_spec()), _spec_hash(G.to_spec())],
            "pairs": [p.to_dict() for p in pairs]}, None


def cmd_northcott(args, config: RunConfig) -> Result:
    _require(args.bound >= 1, f"--bound must be >= 1, got {args.bound}", "bound")
    _require(args.max_period >= 1, f"--max-period must be >= 1, got {args.max_period}", "max_period")
    f = load_map_spec(args.map)
    with _executor(config) as pool:
        report = northcott_check(f, args.bound, args.eps, args.max_period, config.primes,
                                 config.height_bound, config.tol, executor=pool)
    return {"map_hash": f.canonical_hash(), **report.to_dict()}, None


def cmd_places(args, config: RunConfig) -> Result:
    f = load_map_spec(args.map)
    q = parse_point(args.point, exact=True)
    return {"map_hash": f.canonical_hash(), "places": [str(p) for p in relevant_places(f, q)]}, None


# Parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (default henon_config.json)")
    common.add_argument("--tol", type=float, help="Green-function tolerance")
    common.add_argument("--seed", type=int, help="random seed (recorded in every output)")
    common.add_argument("--workers", type=int, help="worker processes for grids and sweeps")
    common.add_argument("--cache", dest="cache_path", help="height cache file (JSON lines)")
    common.add_argument("--format", dest="output_format", choices=["json", "csv"], help="output format")
    common.add_argument("--out", help="write the result here instead of stdout")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("-q", "--quiet", action="store_true", help="warnings only")

    parser = UsageParser(prog="henon", description="Arithmetic dynamics of generalized Hénon maps")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("eval", parents=[common], help="evaluate a map (or its inverse) along an orbit")
    p.add_argument("--map", required=True)
    p.add_argument("--point", required=True)
    p.add_argument("--iterations", type=int, default=1)
    p.add_argument("--inverse", action="store_true")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("jacobian", parents=[common], help="Jacobian of a map or Jacobian map of a family")
    p.add_argument("--map")
    p.add_argument("--family")
    p.add_argument("--samples", help="comma-separated rational parameters for the dissipativity check")
    p.set_defaults(handler=cmd_jacobian)

    p = sub.add_parser("green", parents=[common], help="archimedean Green function")
    p.add_argument("--map", required=True)
    p.add_argument("--point")
    p.add_argument("--direction", choices=["plus", "minus", "total"], default="plus")
    p.add_argument("--grid", action="store_true", help="evaluate on the slice x = x0")
    p.add_argument("--x0", default="0")
    p.add_argument("--re", default="-2,2")
    p.add_argument("--im", default="-2,2")
    p.add_argument("--resolution", type=int, default=32)
    p.set_defaults(handler=cmd_green)

    p = sub.add_parser("height", parents=[common], help="canonical height of a rational point")
    p.add_argument("--map", required=True)
    p.add_argument("--point", required=True)
    p.add_argument("--eps", type=float, help="also report the periodicity verdict at this threshold")
    p.set_defaults(handler=cmd_height)

    p = sub.add_parser("places", parents=[common], help="places that can contribute to a height")
    p.add_argument("--map", required=True)
    p.add_argument("--point", required=True)
    p.set_defaults(handler=cmd_places)

    p = sub.add_parser("periodic", parents=[common], help="periodic points")
    p.add_argument("--map", required=True)
    p.add_argument("--max-period", type=int, required=True)
    p.add_argument("--prime", type=int, action="append")
    p.add_argument("--numeric", action="store_true")
    p.add_argument("--starts", type=int)
    p.add_argument("--resultant", action="store_true")
    p.set_defaults(handler=cmd_periodic)

    p = sub.add_parser("common", parents=[common], help="common periodic points of two maps")
    p.add_argument("--map-f", required=True)
    p.add_argument("--map-g", required=True)
    p.add_argument("--max-period", type=int, default=2)
    p.set_defaults(handler=cmd_common)

    p = sub.add_parser("sweep", parents=[common], help="sweep common periodic points over a family pair")
    p.add_argument("--family-f", required=True)
    p.add_argument("--family-g", required=True)
    p.add_argument("--params", required=True, help="'start:stop:step' or a comma-separated list")
    p.add_argument("--max-period", type=int, default=2)
    p.add_argument("--eps", type=float)
    p.set_defaults(handler=cmd_sweep, both_formats=True)

    p = sub.add_parser("measure", parents=[common], help="saddle-point sample of the equilibrium measure")
    p.add_argument("--map", required=True)
    p.add_argument("--period", type=int, required=True)
    p.add_argument("--starts", type=int)
    p.add_argument("--threshold", type=float, default=1e-4)
    p.set_defaults(handler=cmd_measure)

    p = sub.add_parser("measure-compare", parents=[common], help="energy distance between two clouds")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--map-a")
    p.add_argument("--map-b")
    p.add_argument("--threshold", type=float, default=1e-2)
    p.set_defaults(handler=cmd_measure_compare)

    p = sub.add_parser("curve-mass", parents=[common], help="Laplacian mass of G+ along a curve")
    p.add_argument("--map", required=True)
    p.add_argument("--curve", choices=["vertical", "horizontal", "custom"], default="vertical")
    p.add_argument("--curve-x")
    p.add_argument("--curve-y")
    p.add_argument("--r-lo", type=float, default=1e3)
    p.add_argument("--r-hi", type=float, default=1e6)
    p.add_argument("--radii", type=int, default=8)
    p.add_argument("--alpha", type=float)
    p.add_argument("--disk", action="append", help="re,im,radius (repeatable)")
    p.set_defaults(handler=cmd_curve_mass)

    p = sub.add_parser("unit-locus", parents=[common], help="grid for {|Jac F|=1} ∩ {|Jac G|=1}")
    p.add_argument("--family-f", required=True)
    p.add_argument("--family-g", required=True)
    p.add_argument("--box", default="-2,2,-2,2")
    p.add_argument("--resolution", type=int, default=64)
    p.set_defaults(handler=cmd_unit_locus)

    p = sub.add_parser("exceptional", parents=[common], help="parameters where F^N = G^M")
    p.add_argument("--family-f", required=True)
    p.add_argument("--family-g", required=True)
    p.add_argument("--max-iterate", type=int, default=2)
    p.set_defaults(handler=cmd_exceptional)

    p = sub.add_parser("northcott", parents=[common], help="small heights vs certified periodic points")
    p.add_argument("--map", required=True)
    p.add_argument("--bound", type=int, default=5)
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--max-period", type=int, default=2)
    p.set_defaults(handler=cmd_northcott)

    return parser


def _configure_logging(args):
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def run(argv: Optional[List[str]] = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    _configure_logging(args)

    try:
        config = resolve_config(args.config, {
            "tol": args.tol, "seed": args.seed, "workers": args.workers,
            "cache_path": args.cache_path, "output_format": args.output_format,
        })
        payload, csv_writer = args.handler(args, config)
    except (MapSpecError, ExcludedParameterError, ConfigError, MixedVariantError) as e:
        field = getattr(e, "field", None)
        print(f"error: {e}" + (f" [field: {field}]" if field else ""), file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as e:
        print(f"error: {e.filename}: file not found", file=sys.stderr)
        return EXIT_INPUT
    except (ComputationRefused, HeightPrecisionError) as e:
        print(f"refused: {e}", file=sys.stderr)
        return EXIT_REFUSED
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT

    payload["command"] = args.command
    payload["config"] = config.to_dict()
    use_csv = csv_writer is not None and (config.output_format == "csv" or (args.out or "").endswith(".csv"))
    if not use_csv and config.output_format == "csv":
        logger.warning("%s has no CSV form; writing JSON", args.command)
    text = _render_csv(payload, csv_writer) if use_csv else _render_json(payload)

    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        if csv_writer is not None and getattr(args, "both_formats", False):
            stem = args.out.rsplit(".", 1)[0] if "." in os.path.basename(args.out) else args.out
            sibling = stem + (".json" if use_csv else ".csv")
            with open(sibling, "w") as fh:
                fh.write(_render_json(payload) if use_csv else _render_csv(payload, csv_writer))
            logger.info("also wrote %s", sibling)
    else:
        stdout.write(text)
    return EXIT_OK


def _render_json(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _render_csv(payload: Dict[str, Any], csv_writer) -> str:
    """CSV body behind '#' lines carrying the command, resolved config and input hashes"""
    buffer = io.StringIO()
    buffer.write(f"# command={payload['command']}\n")
    buffer.write(f"# config={json.dumps(payload['config'], sort_keys=True, separators=(',', ':'))}\n")
    for key in ("map_hash", "family_hash"):
        if key in payload:
            value = payload[key]
            buffer.write(f"# {key}={','.join(value) if isinstance(value, list) else value}\n")
    csv_writer(buffer)
    return buffer.getvalue()


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
