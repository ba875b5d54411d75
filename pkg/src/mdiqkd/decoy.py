"""Decoy-state gain assembly and single-photon-pair estimation.

The simulator builds observable gains as truncated double series over a
ground-truth yield table, weighting each (m, n) term by per-side photon
number weights of the active event class.  The estimator is then handed
nothing but those gain records and inverts them into a lower bound on
the single-photon-pair yield Y[1][1] and an upper bound on its error
rate e[1][1].

Conventions baked into the series, shared by simulator and estimator:

* Interior terms (m, n >= 1) carry loss-only class weights, which are
  free of heralding dark counts.
* Vacuum rows carry the full trigger-weighted distribution including
  dark counts, and a record at literal intensity zero contributes its
  side's vacuum-class weight (dark rate for triggered, one minus dark
  rate for non-triggered, one for unheralded).
* Nothing is renormalised, so triggered and non-triggered records of the
  same intensities sum exactly to the plain record.

Every gain record also carries a certified truncation tail: an upper
bound on the weight the series discards beyond the cutoff, computed from
closed-form totals of the weight distributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

import numpy as np

from .optics import Basis, YieldTable
from .source import (
    DistributionKind,
    SourceSpec,
    TriggerClass,
    damped_total,
    photon_weight,
    trigger_prob,
    vacuum_weight,
)

__all__ = [
    "COEFF_REL_TOL",
    "BoundUnavailableError",
    "SideWeights",
    "GainRecord",
    "GainTable",
    "Y11Bound",
    "side_weights",
    "gain_from_yields",
    "pair_coefficients",
    "interior_tail",
    "series_terms",
    "y11_lower_bound",
    "symmetric_condition",
    "s11_gains",
    "single_pair_gain",
    "e11_upper_bound",
]

# relative slack when checking the sign of combined series coefficients;
# schemes that satisfy the constraint with equality land on the boundary
# up to float rounding and must not be rejected for it
COEFF_REL_TOL = 1e-9


class BoundUnavailableError(ValueError):
    """Raised when an estimator quantity has no usable denominator."""


@dataclass(frozen=True)
class SideWeights:
    """Per-photon-number series weights of one side for one record.

    a[m] are the interior coefficients (only m >= 1 enters the series),
    vac[m] is the full trigger-weighted distribution used in the vacuum
    rows, and vac_at_zero is the weight this side contributes to records
    taken at literal intensity zero.  a_total and vac_total are exact
    infinite-series sums of a[1:] and vac[:] used for tail certificates.
    """

    source: SourceSpec
    a: np.ndarray
    vac: np.ndarray
    vac_at_zero: float
    a_total: float
    vac_total: float


def side_weights(source: SourceSpec, cutoff: int) -> SideWeights:
    """Series weights of one source up to the cutoff photon number."""
    if cutoff < 1:
        raise ValueError(f"cutoff must be >= 1, got {cutoff}")
    p = np.array([photon_weight(source.kind, source.intensity, m) for m in range(cutoff + 1)])
    if source.trigger_class is TriggerClass.ALL:
        a = p.copy()
        vac = p.copy()
        vac0 = 1.0
        a_total = 1.0 - p[0]
        vac_total = 1.0
    else:
        eta = source.heralding.efficiency
        dark = source.heralding.dark_rate
        damp = (1.0 - eta) ** np.arange(cutoff + 1)
        survive = damped_total(source.kind, source.intensity, 1.0 - eta)
        if source.trigger_class is TriggerClass.TRIGGERED:
            a = (1.0 - damp) * p
            vac = (1.0 - (1.0 - dark) * damp) * p
            vac0 = dark
            a_total = 1.0 - survive
            vac_total = 1.0 - (1.0 - dark) * survive
        else:
            a = damp * p
            vac = (1.0 - dark) * damp * p
            vac0 = 1.0 - dark
            a_total = survive - p[0]
            vac_total = (1.0 - dark) * survive
    a.flags.writeable = False
    vac.flags.writeable = False
    return SideWeights(
        source=source,
        a=a,
        vac=vac,
        vac_at_zero=vac0,
        a_total=a_total,
        vac_total=vac_total,
    )


@dataclass(frozen=True)
class GainRecord:
    """One observable the estimator may use.

    gain is the acceptance probability per pulse of the record's event
    class (un-normalised by the class weight), qber the error fraction
    among accepted pulses, tail the certified truncation remainder of
    the series that produced the gain.  tail is a simulation-side
    certificate; records parsed from CSV carry tail 0.
    """

    basis: Basis
    alice_intensity: float
    bob_intensity: float
    trigger_class: TriggerClass
    gain: float
    qber: float
    tail: float = 0.0


def _record_key(basis: Basis, x: float, y: float, cls: TriggerClass) -> tuple:
    return (basis.value, cls.value, float(x), float(y))


class GainTable:
    """Keyed collection of gain records, the estimator's only input."""

    def __init__(self, records: Iterable[GainRecord] = ()) -> None:
        self._records: dict[tuple, GainRecord] = {}
        for rec in records:
            self.add(rec)

    def add(self, record: GainRecord) -> None:
        key = _record_key(
            record.basis, record.alice_intensity, record.bob_intensity, record.trigger_class
        )
        self._records[key] = record

    def get(self, basis: Basis, x: float, y: float, cls: TriggerClass) -> GainRecord:
        key = _record_key(basis, x, y, cls)
        rec = self._records.get(key)
        if rec is not None:
            return rec
        # tolerate float noise in intensities coming from round-tripped files
        for (b, c, rx, ry), cand in self._records.items():
            if b == basis.value and c == cls.value:
                if math.isclose(rx, x, rel_tol=1e-9, abs_tol=1e-15) and math.isclose(
                    ry, y, rel_tol=1e-9, abs_tol=1e-15
                ):
                    return cand
        raise KeyError(
            f"no gain record for basis={basis.value} class={cls.value} x={x} y={y}"
        )

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[GainRecord]:
        return iter(sorted(self._records.values(), key=lambda r: (
            r.basis.value, r.trigger_class.value, r.alice_intensity, r.bob_intensity
        )))


def gain_from_yields(alice: SideWeights, bob: SideWeights, table: YieldTable) -> GainRecord:
    """Assemble one gain record from ground-truth yields.

    The double series runs over m, n up to the table cutoff.  Vacuum
    rows use the convention documented in the module docstring, which
    makes the record set an exactly closed linear system for the
    estimator.  The returned tail bounds everything the truncation
    dropped, using yields <= 1.
    """
    if len(alice.a) != table.cutoff + 1 or len(bob.a) != table.cutoff + 1:
        raise ValueError("side weights and yield table use different cutoffs")
    if alice.source.trigger_class is not bob.source.trigger_class:
        raise ValueError("both sides of a record must share one event class")
    y = table.yields
    w = table.yields * table.errors

    def assemble(mat: np.ndarray) -> float:
        interior = float(alice.a[1:] @ mat[1:, 1:] @ bob.a[1:])
        rows = bob.vac_at_zero * float(alice.vac @ mat[:, 0])
        rows += alice.vac_at_zero * float(bob.vac @ mat[0, :])
        rows -= alice.vac_at_zero * bob.vac_at_zero * float(mat[0, 0])
        return interior + rows

    gain = assemble(y)
    wrong = assemble(w)
    qber = wrong / gain if gain > 0.0 else 0.0
    tail = interior_tail(alice, bob)
    tail += bob.vac_at_zero * (alice.vac_total - float(alice.vac.sum()))
    tail += alice.vac_at_zero * (bob.vac_total - float(bob.vac.sum()))
    return GainRecord(
        basis=table.basis,
        alice_intensity=alice.source.intensity,
        bob_intensity=bob.source.intensity,
        trigger_class=alice.source.trigger_class,
        gain=gain,
        qber=qber,
        tail=tail,
    )


def pair_coefficients(pair: tuple[SourceSpec, SourceSpec], cutoff: int) -> np.ndarray:
    """Outer product of the two sides' interior weights, index (m, n)."""
    wa = side_weights(pair[0], cutoff)
    wb = side_weights(pair[1], cutoff)
    return np.outer(wa.a, wb.a)


def interior_tail(alice: SideWeights, bob: SideWeights) -> float:
    """Weight of interior terms beyond the cutoff, assuming yields <= 1."""
    part = float(alice.a[1:].sum()) * float(bob.a[1:].sum())
    return alice.a_total * bob.a_total - part


def series_terms(
    gains: GainTable, pair: tuple[SourceSpec, SourceSpec], basis: Basis
) -> tuple[float, float, float]:
    """Full gain, reconstructed vacuum content, and summed tail of one pair.

    The vacuum content is S(x,0) + S(0,y) - S(0,0): exactly the vacuum
    rows of the series under the record conventions, so subtracting it
    from S(x,y) leaves the interior terms alone.
    """
    x = pair[0].intensity
    y = pair[1].intensity
    cls = pair[0].trigger_class
    full = gains.get(basis, x, y, cls)
    row_x = gains.get(basis, x, 0.0, cls)
    row_y = gains.get(basis, 0.0, y, cls)
    corner = gains.get(basis, 0.0, 0.0, cls)
    vacuum = row_x.gain + row_y.gain - corner.gain
    tails = full.tail + row_x.tail + row_y.tail + corner.tail
    return full.gain, vacuum, tails


@dataclass(frozen=True)
class Y11Bound:
    """Lower bound on the single-photon-pair yield with its certificate.

    conditions_ok reports whether the sign conditions licensing the
    bound hold: negative denominator and no combined interior
    coefficient above the relative tolerance for (m, n) != (1, 1).
    coefficient_margin is the largest relative violation encountered
    (negative values mean margin to spare); tail is the certified
    truncation error propagated through the inversion; clamped flags a
    raw value outside [0, 1]; swapped records that the two supplied
    settings were exchanged during canonicalisation, so k_factor and
    denominator refer to the exchanged roles.
    """

    value: float
    k_factor: float
    denominator: float
    conditions_ok: bool
    coefficient_margin: float
    clamped: bool = False
    tail: float = 0.0
    swapped: bool = False


def _unavailable(k: float = math.nan, denom: float = math.nan) -> Y11Bound:
    return Y11Bound(
        value=0.0,
        k_factor=k,
        denominator=denom,
        conditions_ok=False,
        coefficient_margin=math.inf,
        clamped=False,
        tail=math.inf,
    )


def y11_lower_bound(
    gains: GainTable,
    weak: tuple[SourceSpec, SourceSpec],
    strong: tuple[SourceSpec, SourceSpec],
    basis: Basis,
    cutoff: int,
) -> Y11Bound:
    """Lower-bound Y[1][1] from two intensity settings of one basis.

    The two settings are combined with the ratio k chosen so that their
    (1,2) and (2,1) interior coefficients cancel; all remaining non-(1,1)
    coefficients must then be non-positive, which licenses dropping them
    from the series and dividing by the (negative) combined (1,1)
    coefficient.  The roles of the two settings are canonicalised
    automatically: if the supplied order gives a positive denominator the
    settings are swapped, which leaves the bound value unchanged.

    Missing gain records raise KeyError.  Degenerate weights (for
    example a zero intensity or a unit-efficiency heralding detector on
    a non-triggered record) make the bound unavailable, reported via
    conditions_ok=False rather than an exception.
    """
    wa = side_weights(weak[0], cutoff)
    wb = side_weights(weak[1], cutoff)
    sa = side_weights(strong[0], cutoff)
    sb = side_weights(strong[1], cutoff)

    num_k = sa.a[1] * sb.a[2] + sa.a[2] * sb.a[1]
    den_k = wa.a[1] * wb.a[2] + wa.a[2] * wb.a[1]
    if num_k <= 0.0 or den_k <= 0.0:
        return _unavailable()
    k = num_k / den_k
    swapped = False
    denom = k * wa.a[1] * wb.a[1] - sa.a[1] * sb.a[1]
    if denom > 0.0:
        wa, wb, sa, sb = sa, sb, wa, wb
        weak, strong = strong, weak
        k = 1.0 / k
        denom = k * wa.a[1] * wb.a[1] - sa.a[1] * sb.a[1]
        swapped = True
    if denom >= 0.0:
        return _unavailable(k, denom)

    coeff_weak = np.outer(wa.a, wb.a)
    coeff_strong = np.outer(sa.a, sb.a)
    combined = coeff_strong - k * coeff_weak
    scale = np.maximum(np.maximum(coeff_strong, k * coeff_weak), 1e-300)
    rel = combined / scale
    rel[0, :] = -math.inf
    rel[:, 0] = -math.inf
    rel[1, 1] = -math.inf
    margin = float(rel.max())
    conditions_ok = margin <= COEFF_REL_TOL

    s_weak, vac_weak, tail_weak = series_terms(gains, weak, basis)
    s_strong, vac_strong, tail_strong = series_terms(gains, strong, basis)
    numer = k * (s_weak - vac_weak) - (s_strong - vac_strong)
    raw = numer / denom
    value = min(max(raw, 0.0), 1.0)
    tail = (
        k * (tail_weak + interior_tail(wa, wb))
        + tail_strong
        + interior_tail(sa, sb)
    ) / abs(denom)
    return Y11Bound(
        value=value,
        k_factor=k,
        denominator=denom,
        conditions_ok=conditions_ok,
        coefficient_margin=margin,
        clamped=(raw != value),
        tail=tail,
        swapped=swapped,
    )


def symmetric_condition(mu: float, mu_prime: float, eta: float) -> bool:
    """Closed-form sufficiency test for the coefficient sign conditions.

    For Poisson triggered records at mu against non-triggered records at
    mu_prime with heralding efficiency eta, the combined coefficients
    keep the right signs whenever mu >= (1 - eta) mu_prime.  Plain
    comparison, no tolerance.
    """
    return mu >= (1.0 - eta) * mu_prime


def s11_gains(
    y11: float,
    mu_prime: float,
    eta: float,
    kind: DistributionKind = DistributionKind.POISSON,
) -> tuple[float, float]:
    """Single-photon-pair gain inside the two heralded classes at mu_prime.

    Returns (triggered, non_triggered).  These are the (1,1) interior
    coefficients eta^2 P_1^2 and (1-eta)^2 P_1^2 times the supplied
    yield; heralding dark counts do not enter interior coefficients.
    """
    if y11 < 0.0:
        raise ValueError(f"yield must be >= 0, got {y11}")
    p1 = photon_weight(kind, mu_prime, 1)
    base = p1 * p1 * y11
    return (eta * eta * base, (1.0 - eta) * (1.0 - eta) * base)


def single_pair_gain(
    pair: tuple[SourceSpec, SourceSpec], y11: float
) -> float:
    """(1,1) interior coefficient of a record pair times a yield value."""
    wa = side_weights(pair[0], 1)
    wb = side_weights(pair[1], 1)
    return float(wa.a[1] * wb.a[1]) * y11


def _error_moment(gains: GainTable, pair: tuple[SourceSpec, SourceSpec]) -> float:
    """Error-weighted gain with its vacuum rows removed, X basis."""
    x = pair[0].intensity
    y = pair[1].intensity
    cls = pair[0].trigger_class
    full = gains.get(Basis.X, x, y, cls)
    row_x = gains.get(Basis.X, x, 0.0, cls)
    row_y = gains.get(Basis.X, 0.0, y, cls)
    corner = gains.get(Basis.X, 0.0, 0.0, cls)
    return (
        full.gain * full.qber
        - row_x.gain * row_x.qber
        - row_y.gain * row_y.qber
        + corner.gain * corner.qber
    )


def e11_upper_bound(
    gains_x: GainTable,
    weak: tuple[SourceSpec, SourceSpec],
    strong: tuple[SourceSpec, SourceSpec],
    s11_weak: float,
    s11_strong: float,
) -> float:
    """Upper-bound the single-photon-pair error rate in the X basis.

    Each record pair gives one candidate: its error-weighted gain minus
    vacuum rows, divided by a lower bound on that same record's (1,1)
    contribution.  The denominators must therefore be built from each
    record's own intensities and class weights (see single_pair_gain);
    the two candidates are combined by taking the minimum.  Raises
    BoundUnavailableError when both denominators vanish.
    """
    candidates = []
    if s11_weak > 0.0:
        candidates.append(_error_moment(gains_x, weak) / s11_weak)
    if s11_strong > 0.0:
        candidates.append(_error_moment(gains_x, strong) / s11_strong)
    if not candidates:
        raise BoundUnavailableError("no positive single-pair gain to divide by")
    return min(max(min(candidates), 0.0), 0.5)
