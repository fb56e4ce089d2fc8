"""Command-line front end.

Subcommands: ``keyrate``, ``sweep-distance``, ``sweep-variance``,
``max-noise`` and ``mc-verify``. Exit codes: 0 ok, 1 quantitative or
statistical failure, 2 configuration or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
import tempfile
from pathlib import Path

from . import analysis, config, mcsim, protocol
from .detector import ModifiedDetector, RawCalibration
from .errors import DomainError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2

SWEEP_COLUMNS = ["axis", "series_label", "key_rate_bits_per_pulse", "i_ab", "chi_be", "status", "reason"]
NOISE_COLUMNS = ["axis", "series_label", "max_excess_noise", "iterations", "residual",
                 "bracket_lo", "bracket_hi", "method", "status", "reason"]

OVERRIDES = {
    "gain": ("protocol", "gain"),
    "eta_d": ("detector", "eta_d"),
    "eta_e": ("detector", "eta_e"),
    "distance_km": ("channel", "distance_km"),
    "excess_noise": ("channel", "excess_noise"),
    "epr_variance": ("protocol", "epr_variance"),
    "beta": ("protocol", "beta"),
    "alpha_db_per_km": ("channel", "alpha_db_per_km"),
    "seed": ("mc", "seed"),
    "out": ("output", "path"),
}


def fmt(x: float | None) -> str:
    return "" if x is None else f"{x:.12g}"


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML run configuration")
    common.add_argument("--out", help="output file (CSV for sweeps, text report otherwise)")
    common.add_argument("--seed", type=int, help="Monte-Carlo seed (unsigned 64-bit)")
    common.add_argument("--clamp", action="store_true", default=None,
                        help="report negative key rates as 0")
    common.add_argument("--gain", type=float, help="PSA gain g >= 1")
    common.add_argument("--eta-d", type=float, help="detection efficiency")
    common.add_argument("--eta-e", type=float, help="electronic-noise transmittance")
    common.add_argument("--distance-km", type=float, help="fibre length in km")
    common.add_argument("--excess-noise", type=float, help="channel excess noise (SNU)")
    common.add_argument("--epr-variance", type=float, help="EPR variance V = V_A + 1 (SNU)")
    common.add_argument("--beta", type=float, help="reconciliation efficiency")
    common.add_argument("--alpha-db-per-km", type=float, help="fibre attenuation")

    parser = argparse.ArgumentParser(prog="psaqkd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("keyrate", "secret key rate for one parameter set"),
        ("sweep-distance", "key rate versus distance (CSV)"),
        ("sweep-variance", "key rate versus modulation variance (CSV)"),
        ("max-noise", "maximal tolerable excess noise versus distance (CSV)"),
        ("mc-verify", "Monte-Carlo check of the PM/EB output variances"),
    ]:
        sub.add_parser(name, parents=[common], help=help_)
    return parser


def resolve_config(args: argparse.Namespace) -> config.RunConfig:
    cfg = config.load(args.config)
    for attr, (section, key) in OVERRIDES.items():
        value = getattr(args, attr, None)
        if value is not None:
            setattr(getattr(cfg, section), key, value)
    if args.clamp:
        cfg.output.clamp = True
    config.validate(cfg)
    return cfg


def _channel(cfg: config.RunConfig) -> protocol.ChannelParams:
    ch = cfg.channel
    if ch.transmittance is not None:
        return protocol.ChannelParams(ch.transmittance, ch.excess_noise)
    return protocol.ChannelParams.from_distance(ch.distance_km, ch.alpha_db_per_km, ch.excess_noise)


def _detector(cfg: config.RunConfig) -> ModifiedDetector:
    return ModifiedDetector(cfg.detector.eta_d, cfg.detector.eta_e)


def _protocol(cfg: config.RunConfig) -> protocol.ProtocolParams:
    p = cfg.protocol
    return protocol.ProtocolParams(p.epr_variance, p.beta, p.gain)


def write_atomic(path: str | Path, text: str) -> None:
    """Write via a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv_text(columns: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    return buf.getvalue()


def _clamp(R: float | None, on: bool) -> float | None:
    return None if R is None else (max(R, 0.0) if on else R)


def keyrate_line(bd: protocol.KeyRateBreakdown, clamp: bool = False) -> str:
    parts = [f"R={fmt(_clamp(bd.R, clamp))}", f"I_AB={fmt(bd.I_AB)}", f"chi_BE={fmt(bd.chi_BE)}"]
    parts += [f"lambda{i}={fmt(lam)}" for i, lam in enumerate(bd.lambdas, start=1)]
    return " ".join(parts)


def sweep_csv(result: analysis.SweepResult, clamp: bool = False) -> str:
    rows = []
    for s in result.series:
        for axis, R, i_ab, chi, reason in zip(result.axis_values, s.values, s.i_ab, s.chi_be, s.reasons):
            status = "ok" if R is not None else "error"
            rows.append([fmt(axis), s.label, fmt(_clamp(R, clamp)), fmt(i_ab), fmt(chi), status, reason or ""])
    return _csv_text(SWEEP_COLUMNS, rows)


def noise_csv(rows_in: list[analysis.NoiseSweepRow]) -> str:
    rows = []
    for r in rows_in:
        rep = r.report
        if rep is None:
            rows.append([fmt(r.distance_km), r.label, "", "", "", "", "", "", "error", r.reason or ""])
        else:
            rows.append([fmt(r.distance_km), r.label, fmt(rep.root), str(rep.iterations), fmt(rep.residual),
                         fmt(rep.bracket[0]), fmt(rep.bracket[1]), rep.method, "ok", ""])
    return _csv_text(NOISE_COLUMNS, rows)


def cmd_keyrate(cfg: config.RunConfig) -> tuple[int, str]:
    bd = protocol.secret_key_rate(_channel(cfg), _detector(cfg), _protocol(cfg))
    return EXIT_OK, keyrate_line(bd, cfg.output.clamp) + "\n"


def cmd_sweep(cfg: config.RunConfig, kind: str) -> tuple[int, str]:
    sw = cfg.sweep
    det, pp = _detector(cfg), _protocol(cfg)
    ch = protocol.ChannelParams.from_distance(0.0, cfg.channel.alpha_db_per_km, cfg.channel.excess_noise)
    if kind == "distance":
        L_grid = config.grid(sw.distance_start_km, sw.distance_stop_km, sw.distance_step_km)
        specs = analysis.figure_series(det, pp, sw.gains, sw.include_ideal)
        result = analysis.sweep_distance(ch, det, specs, L_grid, max_workers=sw.workers)
    else:
        VA_grid = config.grid(sw.va_start, sw.va_stop, sw.va_step)
        result = analysis.sweep_modulation_variance(ch, det, pp, VA_grid, sw.va_distances_km, sw.gains,
                                                    sw.include_ideal, max_workers=sw.workers)
    return EXIT_OK, sweep_csv(result, cfg.output.clamp)


def cmd_maxnoise(cfg: config.RunConfig) -> tuple[int, str]:
    sw = cfg.sweep
    det, pp = _detector(cfg), _protocol(cfg)
    ch = protocol.ChannelParams.from_distance(0.0, cfg.channel.alpha_db_per_km, cfg.channel.excess_noise)
    L_grid = config.grid(sw.distance_start_km, sw.distance_stop_km, sw.distance_step_km)
    specs = analysis.figure_series(det, pp, sw.gains, sw.include_ideal)
    rows = analysis.sweep_max_noise(ch, det, specs, L_grid, sw.tolerance, max_workers=sw.workers)
    return EXIT_OK, noise_csv(rows)


def mc_config(cfg: config.RunConfig) -> mcsim.PMConfig:
    mc = cfg.mc
    cal = RawCalibration(mc.amplification, mc.lo_amplitude, mc.electronic_noise_variance)
    v_b1 = mc.v_b1 if mc.v_b1 is not None else protocol.b1_variance(_channel(cfg), cfg.protocol.epr_variance)
    return mcsim.PMConfig(cal, cfg.detector.eta_d, cfg.protocol.gain, v_b1, mc.n_samples, mc.seed)


def cmd_mcverify(cfg: config.RunConfig) -> tuple[int, str]:
    pm = mc_config(cfg)
    rep = mcsim.verify_equivalence(pm, cfg.mc.z_threshold, max_workers=cfg.mc.workers)
    head = f"eta_e={pm.eta_e:.12g} eta_d={pm.eta_d:.12g} g={pm.g:.12g} V_B1={pm.V_B1:.12g} seed={pm.seed}"
    text = "\n".join([head, *rep.lines()]) + "\n"
    return (EXIT_OK if rep.passed else EXIT_FAIL), text


COMMANDS = {
    "keyrate": cmd_keyrate,
    "sweep-distance": lambda c: cmd_sweep(c, "distance"),
    "sweep-variance": lambda c: cmd_sweep(c, "variance"),
    "max-noise": cmd_maxnoise,
    "mc-verify": cmd_mcverify,
}
CSV_COMMANDS = {"sweep-distance", "sweep-variance", "max-noise"}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except config.ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG

    out = cfg.output.path
    if args.command in CSV_COMMANDS and out is None:
        print("config error: output.path: sweeps need --out or output.path", file=sys.stderr)
        return EXIT_CONFIG
    if out is not None and not Path(out).parent.is_dir():
        print(f"error: output directory does not exist: {Path(out).parent}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        code, text = COMMANDS[args.command](cfg)
    except DomainError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command not in CSV_COMMANDS:
        sys.stdout.write(text)
    if out is not None:
        try:
            write_atomic(out, text)
        except OSError as exc:
            print(f"error: cannot write {out}: {exc.strerror}", file=sys.stderr)
            return EXIT_CONFIG
    return code


if __name__ == "__main__":
    sys.exit(main())
