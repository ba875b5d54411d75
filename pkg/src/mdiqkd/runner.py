"""Scenario orchestration, intensity optimization, config and CSV I/O.

This is the command-line surface of the package: `scan` sweeps
rate-versus-distance curves, `yields` dumps ground-truth yield tables,
`bound` runs the estimator on an external gain-table CSV, `optimize`
reports the best signal intensity for one scenario and distance.

Everything here is deterministic: a fixed log-spaced intensity grid,
golden-section refinement with a fixed tolerance, and repr-based float
serialization that round-trips exactly.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence, TextIO

import numpy as np
from scipy import optimize as _sciopt

from .decoy import (
    BoundUnavailableError,
    GainRecord,
    GainTable,
    e11_upper_bound,
    single_pair_gain,
    y11_lower_bound,
)
from .keyrate import (
    DEFAULT_ERROR_CORRECTION,
    SCENARIO_NAMES,
    RatePoint,
    ScenarioKind,
    basis_tables,
    rate_for_scenario,
)
from .optics import Basis, LinkSpec, YieldTable, yield_table
from .source import DistributionKind, HeraldingDetector, SourceSpec, TriggerClass

__all__ = [
    "ConfigError",
    "ScanConfig",
    "parse_config",
    "parse_distances",
    "optimize_mu_prime",
    "scan",
    "emit_csv",
    "parse_rate_csv",
    "emit_gain_csv",
    "parse_gain_csv",
    "emit_yield_csv",
    "main",
]

RATE_HEADER = "distance_km,scenario,mu,mu_prime,y11_bound,e11_bound,rate,valid"
GAIN_HEADER = "basis,x,y,class,gain,qber"
YIELD_HEADER = "basis,m,n,Y,e"

# scenarios whose curves are quoted at a better heralding detector; the
# remaining heralded scenarios stay at the global default
DEFAULT_SCENARIO_HERALDING = {"H0": 0.9, "H1": 0.9}


class ConfigError(ValueError):
    """Malformed or out-of-range configuration input."""


def _default_distances() -> tuple[float, ...]:
    return tuple(float(d) for d in range(0, 301, 5))


@dataclass(frozen=True)
class ScanConfig:
    """Fully resolved inputs of one scan run."""

    distances: tuple[float, ...] = field(default_factory=_default_distances)
    scenarios: tuple[str, ...] = SCENARIO_NAMES
    alpha: float = 0.2
    e_d: float = 0.015
    d_c: float = 3e-6
    eta_c: float = 0.145
    eta_heralding: float = 0.75
    d_heralding: float = 1e-6
    f_ec: float = DEFAULT_ERROR_CORRECTION
    cutoff: int = 8
    mu_fixed: float = 0.1
    scenario_heralding: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_SCENARIO_HERALDING)
    )
    grid_points: int = 60
    mu_prime_min: float = 1e-4
    mu_prime_max: float = 1.5
    refine_tol: float = 1e-4

    def link_for(self, distance_km: float) -> LinkSpec:
        return LinkSpec(
            total_distance_km=distance_km,
            attenuation_db_per_km=self.alpha,
            relay_efficiency=self.eta_c,
            relay_dark_rate=self.d_c,
            misalignment=self.e_d,
            cutoff=self.cutoff,
        )

    def scenario_kind(self, name: str) -> ScenarioKind:
        efficiency = self.scenario_heralding.get(name, self.eta_heralding)
        return ScenarioKind(name, efficiency, self.d_heralding)


def parse_distances(text: str) -> tuple[float, ...]:
    """Parse a START:STOP:STEP distance range, inclusive of STOP."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"distances must be START:STOP:STEP, got {text!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"distances must be numeric, got {text!r}") from None
    if step <= 0 or stop < start or start < 0:
        raise ConfigError(f"bad distance range {text!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return tuple(start + i * step for i in range(count))


def _parse_scenarios(text: str) -> tuple[str, ...]:
    names = tuple(tok.strip() for tok in text.split(",") if tok.strip())
    if not names:
        raise ConfigError("empty scenario list")
    for name in names:
        if name not in SCENARIO_NAMES:
            raise ConfigError(f"unknown scenario {name!r}, expected one of {SCENARIO_NAMES}")
    return names


_UNIT_KEYS = {"e_d", "d_c", "eta_c", "eta_heralding", "d_heralding"}
_POSITIVE_KEYS = {"mu_fixed", "mu_prime_min", "mu_prime_max", "refine_tol"}


def parse_config(text: str) -> ScanConfig:
    """Parse `key = value` lines into a ScanConfig.

    Blank lines and `#` comments are ignored.  Unknown keys and values
    outside their domain are rejected with the offending line number.
    Per-scenario heralding overrides use keys like `eta_heralding_H1`.
    """
    values: dict = {}
    overrides = dict(DEFAULT_SCENARIO_HERALDING)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw.strip()!r}")
        key, _, val = (tok.strip() for tok in line.partition("="))
        if not key or not val:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw.strip()!r}")
        try:
            if key == "distances":
                values["distances"] = parse_distances(val)
            elif key == "scenarios":
                values["scenarios"] = _parse_scenarios(val)
            elif key.startswith("eta_heralding_"):
                name = key[len("eta_heralding_"):].upper()
                if name not in SCENARIO_NAMES:
                    raise ConfigError(f"unknown scenario in key {key!r}")
                eff = float(val)
                if not 0.0 <= eff <= 1.0:
                    raise ConfigError(f"{key} must lie in [0, 1], got {val}")
                overrides[name] = eff
            elif key in ("alpha", "e_d", "d_c", "eta_c", "eta_heralding", "d_heralding",
                         "f", "mu", "mu_fixed", "mu_prime_min", "mu_prime_max", "refine_tol"):
                num = float(val)
                field_name = {"f": "f_ec", "mu": "mu_fixed"}.get(key, key)
                if key == "alpha" and num < 0:
                    raise ConfigError(f"alpha must be >= 0, got {val}")
                if key == "f" and num < 1.0:
                    raise ConfigError(f"f must be >= 1, got {val}")
                if key in _UNIT_KEYS and not 0.0 <= num <= 1.0:
                    raise ConfigError(f"{key} must lie in [0, 1], got {val}")
                if (key in _POSITIVE_KEYS or field_name in _POSITIVE_KEYS) and num <= 0:
                    raise ConfigError(f"{key} must be > 0, got {val}")
                values[field_name] = num
            elif key in ("cutoff", "grid_points"):
                num = int(val)
                if key == "cutoff" and num < 2:
                    raise ConfigError(f"cutoff must be >= 2, got {val}")
                if key == "grid_points" and num < 4:
                    raise ConfigError(f"grid_points must be >= 4, got {val}")
                values[key] = num
            else:
                raise ConfigError(f"unknown key {key!r}")
        except ConfigError as exc:
            msg = str(exc)
            if not msg.startswith("line "):
                msg = f"line {lineno}: {msg}"
            raise ConfigError(msg) from None
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {val!r} for {key}") from None
    values["scenario_heralding"] = overrides
    try:
        return ScanConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _evaluate(
    scenario: ScenarioKind,
    link: LinkSpec,
    config: ScanConfig,
    mu_prime: float,
    tables: tuple[YieldTable, YieldTable],
) -> RatePoint | None:
    if scenario.coupled_mu:
        mu = (1.0 - scenario.heralding_efficiency) * mu_prime
    else:
        mu = config.mu_fixed
    try:
        return rate_for_scenario(scenario, link, mu, mu_prime, tables, config.f_ec)
    except ValueError:
        # degenerate intensities (for example coupled mu collapsing to 0)
        return None


def optimize_mu_prime(
    scenario: ScenarioKind,
    link: LinkSpec,
    config: ScanConfig,
    tables: tuple[YieldTable, YieldTable] | None = None,
) -> RatePoint:
    """Best signal intensity for one scenario and distance.

    A fixed log-spaced grid locates the basin, golden-section search on
    the log axis refines it.  If no grid point yields a positive rate
    the best point is returned flagged invalid with rate 0.
    """
    if tables is None:
        tables = basis_tables(link)
    grid = np.geomspace(config.mu_prime_min, config.mu_prime_max, config.grid_points)
    points = [_evaluate(scenario, link, config, mp, tables) for mp in grid]
    rates = [p.rate if p is not None and p.valid else -math.inf for p in points]
    best_i = int(np.argmax(rates))
    if rates[best_i] == -math.inf:
        reported = next((p for p in points if p is not None), None)
        if reported is None:
            reported = RatePoint(
                distance_km=link.total_distance_km,
                scenario=scenario.name,
                mu=0.0,
                mu_prime=float(grid[len(grid) // 2]),
                y11_bound=0.0,
                e11_bound=0.0,
                rate=0.0,
                valid=False,
                reason="no_valid_point",
            )
        return replace(reported, rate=0.0, valid=False)

    best = points[best_i]
    if 0 < best_i < len(grid) - 1:
        logs = np.log(grid)

        def cost(lg: float) -> float:
            pt = _evaluate(scenario, link, config, float(math.exp(lg)), tables)
            if pt is None or not pt.valid:
                return math.inf
            return -pt.rate

        try:
            res = _sciopt.minimize_scalar(
                cost,
                bracket=(logs[best_i - 1], logs[best_i], logs[best_i + 1]),
                method="golden",
                options={"xtol": config.refine_tol, "maxiter": 200},
            )
            refined = _evaluate(scenario, link, config, float(math.exp(res.x)), tables)
            if refined is not None and refined.valid and refined.rate > best.rate:
                best = refined
        except ValueError:
            pass  # flat or non-bracketing neighbourhood, keep the grid best

    if best.rate <= 0.0:
        return replace(best, rate=0.0, valid=False, reason="no_positive_rate")
    return best


def scan(config: ScanConfig) -> list[RatePoint]:
    """Optimized rate curve for every configured scenario and distance.

    Rows are ordered by (scenario name, distance).
    """
    points: list[RatePoint] = []
    for name in sorted(set(config.scenarios)):
        scenario = config.scenario_kind(name)
        for distance in config.distances:
            link = config.link_for(distance)
            tables = basis_tables(link)
            points.append(optimize_mu_prime(scenario, link, config, tables))
    return points


def _fmt(value: float) -> str:
    return repr(float(value))


def emit_csv(points: Iterable[RatePoint], sink: TextIO | None = None, gnuplot: bool = False) -> str:
    """Serialize rate points; full precision, byte-stable ordering.

    The gnuplot variant is whitespace separated with one block (two
    blank lines apart) per scenario.
    """
    points = list(points)
    if gnuplot:
        lines = ["# " + RATE_HEADER.replace(",", " ")]
        by_scenario: dict[str, list[RatePoint]] = {}
        for p in points:
            by_scenario.setdefault(p.scenario, []).append(p)
        for idx, name in enumerate(sorted(by_scenario)):
            if idx:
                lines.append("")
                lines.append("")
            lines.append(f"# scenario: {name}")
            for p in sorted(by_scenario[name], key=lambda q: q.distance_km):
                lines.append(
                    f"{_fmt(p.distance_km)} {p.scenario} {_fmt(p.mu)} {_fmt(p.mu_prime)} "
                    f"{_fmt(p.y11_bound)} {_fmt(p.e11_bound)} {_fmt(p.rate)} {int(p.valid)}"
                )
    else:
        lines = [RATE_HEADER]
        for p in points:
            lines.append(
                f"{_fmt(p.distance_km)},{p.scenario},{_fmt(p.mu)},{_fmt(p.mu_prime)},"
                f"{_fmt(p.y11_bound)},{_fmt(p.e11_bound)},{_fmt(p.rate)},{int(p.valid)}"
            )
    text = "\n".join(lines) + "\n"
    if sink is not None:
        sink.write(text)
    return text


def parse_rate_csv(text: str) -> list[RatePoint]:
    """Inverse of emit_csv for the comma variant."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != RATE_HEADER:
        raise ConfigError(f"bad rate CSV header, expected {RATE_HEADER!r}")
    points = []
    for lineno, line in enumerate(lines[1:], start=2):
        cols = line.split(",")
        if len(cols) != 8:
            raise ConfigError(f"line {lineno}: expected 8 columns, got {len(cols)}")
        try:
            points.append(
                RatePoint(
                    distance_km=float(cols[0]),
                    scenario=cols[1],
                    mu=float(cols[2]),
                    mu_prime=float(cols[3]),
                    y11_bound=float(cols[4]),
                    e11_bound=float(cols[5]),
                    rate=float(cols[6]),
                    valid=bool(int(cols[7])),
                )
            )
        except ValueError:
            raise ConfigError(f"line {lineno}: bad numeric value") from None
    return points


def emit_gain_csv(gains: GainTable, sink: TextIO | None = None) -> str:
    """Serialize a gain table; tail certificates are not part of the format."""
    lines = [GAIN_HEADER]
    for rec in gains:
        lines.append(
            f"{rec.basis.value},{_fmt(rec.alice_intensity)},{_fmt(rec.bob_intensity)},"
            f"{rec.trigger_class.value},{_fmt(rec.gain)},{_fmt(rec.qber)}"
        )
    text = "\n".join(lines) + "\n"
    if sink is not None:
        sink.write(text)
    return text


def parse_gain_csv(text: str) -> GainTable:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != GAIN_HEADER:
        raise ConfigError(f"bad gain CSV header, expected {GAIN_HEADER!r}")
    table = GainTable()
    for lineno, line in enumerate(lines[1:], start=2):
        cols = line.split(",")
        if len(cols) != 6:
            raise ConfigError(f"line {lineno}: expected 6 columns, got {len(cols)}")
        try:
            basis = Basis(cols[0])
            cls = TriggerClass(cols[3])
            rec = GainRecord(
                basis=basis,
                alice_intensity=float(cols[1]),
                bob_intensity=float(cols[2]),
                trigger_class=cls,
                gain=float(cols[4]),
                qber=float(cols[5]),
                tail=0.0,
            )
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value") from None
        table.add(rec)
    return table


def emit_yield_csv(table: YieldTable, sink: TextIO | None = None, header: bool = True) -> str:
    lines = [YIELD_HEADER] if header else []
    for m in range(table.cutoff + 1):
        for n in range(table.cutoff + 1):
            lines.append(
                f"{table.basis.value},{m},{n},{_fmt(table.yields[m, n])},{_fmt(table.errors[m, n])}"
            )
    text = "\n".join(lines) + "\n"
    if sink is not None:
        sink.write(text)
    return text


def _scheme_pairs(
    scheme: str, mu: float, mu_prime: float, config: ScanConfig
) -> tuple[tuple[SourceSpec, SourceSpec], tuple[SourceSpec, SourceSpec], DistributionKind]:
    """Source pairs of the named estimation scheme at given intensities."""
    scheme = scheme.upper()
    if scheme not in ("H1", "H2", "W1", "T1"):
        raise ConfigError(f"unknown scheme {scheme!r}, expected H1, H2, W1 or T1")
    kind = DistributionKind.THERMAL if scheme == "T1" else DistributionKind.POISSON
    if scheme == "W1":
        heralding = None
        weak_cls = strong_cls = TriggerClass.ALL
    else:
        heralding = HeraldingDetector(config.eta_heralding, config.d_heralding)
        if scheme == "H2":
            weak_cls = strong_cls = TriggerClass.TRIGGERED
        else:
            weak_cls, strong_cls = TriggerClass.TRIGGERED, TriggerClass.NON_TRIGGERED
    weak = (SourceSpec(kind, mu, heralding, weak_cls), SourceSpec(kind, mu, heralding, weak_cls))
    strong = (
        SourceSpec(kind, mu_prime, heralding, strong_cls),
        SourceSpec(kind, mu_prime, heralding, strong_cls),
    )
    return weak, strong, kind


def _load_config(path: str | None) -> ScanConfig:
    if path is None:
        return ScanConfig()
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _apply_flag_overrides(config: ScanConfig, args: argparse.Namespace) -> ScanConfig:
    updates: dict = {}
    if getattr(args, "scenario", None):
        updates["scenarios"] = _parse_scenarios(args.scenario)
    if getattr(args, "distances", None):
        updates["distances"] = parse_distances(args.distances)
    if getattr(args, "cutoff", None) is not None:
        if args.cutoff < 2:
            raise ConfigError(f"cutoff must be >= 2, got {args.cutoff}")
        updates["cutoff"] = args.cutoff
    return replace(config, **updates) if updates else config


def _open_sink(path: str | None) -> TextIO:
    if path is None or path == "-":
        return sys.stdout
    return open(path, "w", encoding="utf-8", newline="")


def _cmd_scan(args: argparse.Namespace) -> int:
    config = _apply_flag_overrides(_load_config(args.config), args)
    points = scan(config)
    sink = _open_sink(args.out)
    try:
        emit_csv(points, sink, gnuplot=args.gnuplot)
    finally:
        if sink is not sys.stdout:
            sink.close()
    return 0


def _cmd_yields(args: argparse.Namespace) -> int:
    config = _apply_flag_overrides(_load_config(args.config), args)
    link = config.link_for(args.distance)
    bases = {"Z": [Basis.Z], "X": [Basis.X], "both": [Basis.Z, Basis.X]}[args.basis]
    sink = _open_sink(args.out)
    try:
        for idx, basis in enumerate(bases):
            emit_yield_csv(yield_table(link, basis), sink, header=(idx == 0))
    finally:
        if sink is not sys.stdout:
            sink.close()
    return 0


def _cmd_bound(args: argparse.Namespace) -> int:
    config = _apply_flag_overrides(_load_config(args.config), args)
    with open(args.gains, "r", encoding="utf-8") as fh:
        gains = parse_gain_csv(fh.read())
    weak, strong, _ = _scheme_pairs(args.scheme, args.mu, args.mu_prime, config)
    basis = Basis(args.basis)
    bound = y11_lower_bound(gains, weak, strong, basis, config.cutoff)
    out = sys.stdout
    out.write(f"y11_lower = {_fmt(bound.value)}\n")
    out.write(f"k_factor = {_fmt(bound.k_factor)}\n")
    out.write(f"denominator = {_fmt(bound.denominator)}\n")
    out.write(f"conditions_ok = {int(bound.conditions_ok)}\n")
    out.write(f"coefficient_margin = {_fmt(bound.coefficient_margin)}\n")
    out.write(f"clamped = {int(bound.clamped)}\n")
    if bound.conditions_ok:
        try:
            bound_x = (
                bound if basis is Basis.X
                else y11_lower_bound(gains, weak, strong, Basis.X, config.cutoff)
            )
            if bound_x.conditions_ok:
                e11 = e11_upper_bound(
                    gains,
                    weak,
                    strong,
                    single_pair_gain(weak, bound_x.value),
                    single_pair_gain(strong, bound_x.value),
                )
                out.write(f"e11_upper = {_fmt(e11)}\n")
        except (KeyError, BoundUnavailableError):
            pass  # no X-basis records in the input, bound report stays yield-only
    return 0


def _cmd_optimize(args: argparse.Namespace) -> int:
    config = _apply_flag_overrides(_load_config(args.config), args)
    try:
        scenario = config.scenario_kind(args.scenario)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    link = config.link_for(args.distance)
    point = optimize_mu_prime(scenario, link, config)
    out = sys.stdout
    out.write(f"scenario = {point.scenario}\n")
    out.write(f"distance_km = {_fmt(point.distance_km)}\n")
    out.write(f"mu = {_fmt(point.mu)}\n")
    out.write(f"mu_prime = {_fmt(point.mu_prime)}\n")
    out.write(f"y11_bound = {_fmt(point.y11_bound)}\n")
    out.write(f"e11_bound = {_fmt(point.e11_bound)}\n")
    out.write(f"rate = {_fmt(point.rate)}\n")
    out.write(f"valid = {int(point.valid)}\n")
    out.write(f"reason = {point.reason}\n")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mdiqkd",
        description="MDI-QKD rate curves with heralded single-photon sources",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="path to a key = value config file")
        p.add_argument("--cutoff", type=int, help="photon-number series cutoff")

    p_scan = sub.add_parser("scan", help="rate-vs-distance curves for the configured scenarios")
    common(p_scan)
    p_scan.add_argument("--scenario", help="comma-separated scenario names")
    p_scan.add_argument("--distances", help="inclusive range START:STOP:STEP in km")
    p_scan.add_argument("--out", help="output path (default stdout)")
    p_scan.add_argument("--gnuplot", action="store_true", help="whitespace blocks per scenario")
    p_scan.set_defaults(func=_cmd_scan)

    p_yields = sub.add_parser("yields", help="ground-truth yield table for one link")
    common(p_yields)
    p_yields.add_argument("--distance", type=float, required=True, help="total distance in km")
    p_yields.add_argument("--basis", choices=["Z", "X", "both"], default="both")
    p_yields.add_argument("--out", help="output path (default stdout)")
    p_yields.set_defaults(func=_cmd_yields)

    p_bound = sub.add_parser("bound", help="estimate Y11/e11 bounds from a gain CSV")
    common(p_bound)
    p_bound.add_argument("--gains", required=True, help="gain table CSV path")
    p_bound.add_argument("--scheme", default="H1", help="H1, H2, W1 or T1")
    p_bound.add_argument("--mu", type=float, required=True, help="weak intensity")
    p_bound.add_argument("--mu-prime", type=float, required=True, help="strong intensity")
    p_bound.add_argument("--basis", choices=["Z", "X"], default="Z")
    p_bound.set_defaults(func=_cmd_bound)

    p_opt = sub.add_parser("optimize", help="best signal intensity at one distance")
    common(p_opt)
    p_opt.add_argument("--scenario", required=True, help="scenario name")
    p_opt.add_argument("--distance", type=float, required=True, help="total distance in km")
    p_opt.set_defaults(func=_cmd_optimize)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
