"""Parameter sweeps and excess-noise root finding over the key-rate pipeline."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .detector import ModifiedDetector
from .errors import DomainError, NumericalDomainError
from .protocol import ChannelParams, KeyRateBreakdown, ProtocolParams, secret_key_rate

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-8
BRACKET_START = 0.1
BRACKET_CAP = 10.0
MIN_WIDTH = 1e-9
SCAN_STEP = 1e-5


class NoPositiveRate(DomainError):
    """The key rate is not positive even without excess noise."""


class BracketCapReached(DomainError):
    """The key rate stays positive up to the excess-noise cap."""


@dataclass(frozen=True)
class SeriesSpec:
    """One curve: a label plus the detector and protocol parameters it is evaluated with."""

    label: str
    pp: ProtocolParams
    det: ModifiedDetector | None = None


@dataclass
class Series:
    label: str
    values: list[float | None]
    params: dict
    i_ab: list[float | None] = field(default_factory=list)
    chi_be: list[float | None] = field(default_factory=list)
    reasons: list[str | None] = field(default_factory=list)


@dataclass
class SweepResult:
    axis_name: str
    axis_values: list[float]
    series: list[Series]

    def __post_init__(self):
        n = len(self.axis_values)
        for s in self.series:
            if len(s.values) != n:
                raise ValueError(f"series {s.label!r} has {len(s.values)} points, axis has {n}")

    def by_label(self, label: str) -> Series:
        for s in self.series:
            if s.label == label:
                return s
        raise KeyError(label)


@dataclass
class BisectionReport:
    root: float
    bracket: tuple[float, float]
    iterations: int
    residual: float
    method: str = "bisection"


def figure_series(det: ModifiedDetector, pp: ProtocolParams,
                  gains: Sequence[float] = (1.0, 3.0, 10.0), ideal: bool = True) -> list[SeriesSpec]:
    """Curves of the distance figures: one per PSA gain plus the ``eta_d = 1`` reference."""
    specs = [SeriesSpec(f"g={_fmt(g)}", replace(pp, g=float(g)), det) for g in gains]
    if ideal:
        specs.append(SeriesSpec("ideal", replace(pp, g=1.0), replace(det, eta_d=1.0)))
    return specs


def _fmt(x: float) -> str:
    return f"{x:g}"


def _as_specs(items: Iterable, det: ModifiedDetector) -> list[SeriesSpec]:
    specs = []
    for item in items:
        if isinstance(item, SeriesSpec):
            specs.append(item if item.det is not None else replace(item, det=det))
        else:
            specs.append(SeriesSpec(f"g={_fmt(item.g)}", item, det))
    return specs


def _evaluate(ch: ChannelParams, det: ModifiedDetector, pp: ProtocolParams
              ) -> tuple[KeyRateBreakdown | None, str | None]:
    try:
        return secret_key_rate(ch, det, pp), None
    except (DomainError, NumericalDomainError, ValueError) as exc:
        return None, f"{type(exc).__name__}: {exc}"


def _run_grid(tasks: list[Callable[[], tuple]], max_workers: int | None) -> list[tuple]:
    if max_workers is None or max_workers <= 1:
        return [t() for t in tasks]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(lambda t: t(), tasks))


def _collect(label: str, params: dict, results: list[tuple]) -> Series:
    s = Series(label, [], params)
    for bd, reason in results:
        s.values.append(None if bd is None else float(bd.R))
        s.i_ab.append(None if bd is None else float(bd.I_AB))
        s.chi_be.append(None if bd is None else float(bd.chi_BE))
        s.reasons.append(reason)
    return s


def _echo(ch: ChannelParams, spec: SeriesSpec) -> dict:
    return {"channel": asdict(ch), "detector": asdict(spec.det), "protocol": asdict(spec.pp)}


def sweep_distance(ch_template: ChannelParams, det: ModifiedDetector, pp_list: Iterable,
                   L_grid: Sequence[float], max_workers: int | None = None) -> SweepResult:
    """Key rate versus fibre length, one series per entry of ``pp_list``.

    Entries are :class:`ProtocolParams` (evaluated with ``det``) or
    :class:`SeriesSpec` (may carry their own detector). Failed points are
    stored as ``None`` with a reason.
    """
    L_grid = [float(L) for L in L_grid]
    if any(b <= a for a, b in zip(L_grid, L_grid[1:])):
        raise ValueError("distance grid must be strictly increasing")
    series = []
    for spec in _as_specs(pp_list, det):
        tasks = []
        for L in L_grid:
            def task(L=L, spec=spec):
                try:
                    ch = ch_template.at_distance(L)
                except DomainError as exc:
                    return None, f"{type(exc).__name__}: {exc}"
                return _evaluate(ch, spec.det, spec.pp)
            tasks.append(task)
        series.append(_collect(spec.label, _echo(ch_template, spec), _run_grid(tasks, max_workers)))
    return SweepResult("distance_km", L_grid, series)


def sweep_modulation_variance(ch_template: ChannelParams, det: ModifiedDetector,
                              pp_template: ProtocolParams, VA_grid: Sequence[float],
                              L_list: Sequence[float], gains: Sequence[float] = (1.0, 3.0, 10.0),
                              ideal: bool = True, max_workers: int | None = None) -> SweepResult:
    """Key rate versus modulation variance ``V_A = V - 1``, one series per (distance, gain)."""
    VA_grid = [float(v) for v in VA_grid]
    if any(v <= 0 for v in VA_grid):
        raise ValueError("modulation variances must be positive")
    series = []
    for L in L_list:
        ch = ch_template.at_distance(L)
        for spec in figure_series(det, pp_template, gains, ideal):
            tasks = []
            for va in VA_grid:
                def task(va=va, spec=spec, ch=ch):
                    try:
                        pp = replace(spec.pp, V=va + 1.0)
                    except DomainError as exc:
                        return None, f"{type(exc).__name__}: {exc}"
                    return _evaluate(ch, spec.det, pp)
                tasks.append(task)
            label = f"L={_fmt(L)}km,{spec.label}"
            series.append(_collect(label, _echo(ch, spec), _run_grid(tasks, max_workers)))
    return SweepResult("modulation_variance", VA_grid, series)


def _is_nonincreasing(values: Sequence[float]) -> bool:
    return all(b <= a + 1e-15 for a, b in zip(values, values[1:]))


def _scan_root(f: Callable[[float], float], lo: float, hi: float, step: float) -> BisectionReport:
    """First sign change of ``f`` on a uniform grid over ``[lo, hi]``."""
    n = int(math.ceil((hi - lo) / step))
    prev_x, prev_f = lo, f(lo)
    for k in range(1, n + 1):
        x = min(lo + k * step, hi)
        fx = f(x)
        if fx <= 0:
            root, res = (x, fx) if abs(fx) <= abs(prev_f) else (prev_x, prev_f)
            return BisectionReport(root, (prev_x, x), k, res, method="scan")
        prev_x, prev_f = x, fx
    raise BracketCapReached(f"no sign change found on [{lo}, {hi}]")


def max_tolerable_excess_noise(ch_template: ChannelParams, det: ModifiedDetector, pp: ProtocolParams,
                               L: float | None = None, tol: float = DEFAULT_TOL) -> BisectionReport:
    """Largest channel excess noise (SNU) that still yields a positive key rate.

    The upper end of the bracket starts at 0.1 and doubles (capped at 10)
    until the rate turns negative; bisection then runs until ``|R| <= tol`` or
    the bracket is narrower than 1e-9. If the rate is found to be non-monotone
    in the excess noise, a uniform scan replaces bisection.
    """
    ch = ch_template if L is None else ch_template.at_distance(L)

    def rate(eps: float) -> float:
        return secret_key_rate(ch.with_noise(eps), det, pp).R

    r0 = rate(0.0)
    if r0 <= 0:
        raise NoPositiveRate(f"no positive rate at zero noise (R={r0:.3e})")
    lo, hi = 0.0, BRACKET_START
    r_hi = rate(hi)
    while r_hi > 0:
        if hi >= BRACKET_CAP:
            raise BracketCapReached(f"cap reached: R={r_hi:.3e} > 0 at excess noise {hi}")
        lo = hi
        hi = min(2.0 * hi, BRACKET_CAP)
        r_hi = rate(hi)

    probe = np.linspace(0.0, hi, 21)
    if not _is_nonincreasing([rate(e) for e in probe]):
        log.warning("key rate not monotone in excess noise; falling back to grid scan")
        return _scan_root(rate, 0.0, hi, SCAN_STEP)

    bracket = (0.0, hi)
    it = 0
    while True:
        mid = 0.5 * (lo + hi)
        r_mid = rate(mid)
        it += 1
        x, r_x = mid, r_mid
        if abs(r_mid) <= tol or hi - lo <= MIN_WIDTH:
            break
        if r_mid > 0:
            lo = mid
        else:
            hi = mid
    return BisectionReport(x, bracket, it, r_x)


@dataclass
class NoiseSweepRow:
    distance_km: float
    label: str
    report: BisectionReport | None
    reason: str | None = None


def sweep_max_noise(ch_template: ChannelParams, det: ModifiedDetector, pp_list: Iterable,
                    L_grid: Sequence[float], tol: float = DEFAULT_TOL,
                    max_workers: int | None = None) -> list[NoiseSweepRow]:
    """Maximal tolerable excess noise along a distance grid; failures are recorded, not raised."""
    rows = []
    for spec in _as_specs(pp_list, det):
        tasks = []
        for L in L_grid:
            def task(L=float(L), spec=spec):
                try:
                    rep = max_tolerable_excess_noise(ch_template, spec.det, spec.pp, L, tol)
                    return NoiseSweepRow(L, spec.label, rep)
                except (DomainError, NumericalDomainError) as exc:
                    return NoiseSweepRow(L, spec.label, None, str(exc))
            tasks.append(task)
        rows.extend(_run_grid(tasks, max_workers))
    return rows


@dataclass
class GainLadderReport:
    distances: list[float]
    gains: list[float]
    gaps: dict[float, list[float]]
    reference: dict[float, float]

    def decreasing(self, L: float) -> bool:
        g = self.gaps[L]
        return all(b < a for a, b in zip(g, g[1:]))

    def final_gap(self, L: float) -> float:
        return self.gaps[L][-1]


def asymptotic_gain_check(ch: ChannelParams, det: ModifiedDetector, pp: ProtocolParams,
                          L_list: Sequence[float], g_ladder: Sequence[float] = (10.0, 1e2, 1e4, 1e6)
                          ) -> GainLadderReport:
    """Distance from the ``eta_d = 1`` rate as the PSA gain grows."""
    if any(b <= a for a, b in zip(g_ladder, g_ladder[1:])):
        raise ValueError("gain ladder must be increasing")
    ideal_det = replace(det, eta_d=1.0)
    gaps, ref = {}, {}
    for L in L_list:
        chL = ch.at_distance(L)
        ref[L] = secret_key_rate(chL, ideal_det, replace(pp, g=1.0)).R
        gaps[L] = [abs(secret_key_rate(chL, det, replace(pp, g=float(g))).R - ref[L]) for g in g_ladder]
    return GainLadderReport(list(L_list), [float(g) for g in g_ladder], gaps, ref)


def unimodal(values: Sequence[float | None]) -> bool:
    """True when the non-null values rise to a single maximum and then fall."""
    v = [x for x in values if x is not None]
    if not v:
        return False
    k = int(np.argmax(v))
    return all(b >= a for a, b in zip(v[:k + 1], v[1:k + 1])) and _is_nonincreasing(v[k:])


def positive_interval(axis: Sequence[float], values: Sequence[float | None]) -> tuple[float, float] | None:
    """Smallest and largest axis value with a strictly positive rate."""
    pos = [a for a, v in zip(axis, values) if v is not None and v > 0]
    return (min(pos), max(pos)) if pos else None
