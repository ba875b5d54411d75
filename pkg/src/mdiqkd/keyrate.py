"""Secret key rate assembly for the studied source scenarios.

The rate has the usual shape: the single-photon-pair fraction earns key
at its privacy-amplified yield, the whole signal gain pays for error
correction.  Everything the estimator produced enters through two
numbers, the Y[1][1] lower bound and the e[1][1] upper bound, so the
finite-decoy scenarios and the asymptotic references share one formula.

Scenario names:

* W0 / W1: weak coherent (Poisson) sources without heralding,
  asymptotic yields versus estimated bounds.
* H0 / H1 / H2: heralded sources with Poisson signal arms.  H1 pairs
  triggered weak records with non-triggered strong ones; H2 uses
  triggered records at both intensities.
* T0 / T1: heralded sources with thermal signal arms, T1 paired like H1.

Scenarios ending in 0 are asymptotic references that read the true
single-photon-pair yield and error straight from the simulator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

from .decoy import (
    BoundUnavailableError,
    GainTable,
    e11_upper_bound,
    gain_from_yields,
    side_weights,
    single_pair_gain,
    y11_lower_bound,
)
from .optics import Basis, LinkSpec, YieldTable, yield_table
from .source import (
    DistributionKind,
    HeraldingDetector,
    SourceSpec,
    TriggerClass,
    photon_weight,
    trigger_prob,
)

__all__ = [
    "DEFAULT_ERROR_CORRECTION",
    "SCENARIO_NAMES",
    "ScenarioKind",
    "RateInputs",
    "RatePoint",
    "binary_entropy",
    "key_rate",
    "basis_tables",
    "rate_for_scenario",
]

DEFAULT_ERROR_CORRECTION = 1.16

SCENARIO_NAMES = ("W0", "W1", "H0", "H1", "H2", "T0", "T1")

_LOG2 = math.log(2.0)


def binary_entropy(p: float) -> float:
    """Shannon entropy of a bit with bias p, in bits.

    >>> binary_entropy(0.5)
    1.0
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"entropy argument must lie in [0, 1], got {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    q = 1.0 - p
    return -(p * math.log(p) + q * math.log(q)) / _LOG2


@dataclass(frozen=True)
class ScenarioKind:
    """One named curve of the study."""

    name: str
    heralding_efficiency: float = 0.75
    heralding_dark_rate: float = 1e-6

    def __post_init__(self) -> None:
        if self.name not in SCENARIO_NAMES:
            raise ValueError(f"unknown scenario {self.name!r}, expected one of {SCENARIO_NAMES}")
        if not 0.0 <= self.heralding_efficiency <= 1.0:
            raise ValueError(
                f"heralding efficiency must lie in [0, 1], got {self.heralding_efficiency}"
            )
        if not 0.0 <= self.heralding_dark_rate <= 1.0:
            raise ValueError(
                f"heralding dark rate must lie in [0, 1], got {self.heralding_dark_rate}"
            )

    @property
    def distribution(self) -> DistributionKind:
        return DistributionKind.THERMAL if self.name.startswith("T") else DistributionKind.POISSON

    @property
    def heralded(self) -> bool:
        return self.name[0] in ("H", "T")

    @property
    def asymptotic(self) -> bool:
        return self.name.endswith("0")

    @property
    def coupled_mu(self) -> bool:
        """Whether the weak intensity tracks mu = (1 - eta) mu_prime."""
        return self.name in ("H1", "T1")


@dataclass(frozen=True)
class RateInputs:
    """Everything the rate formula consumes."""

    y11: float
    e11x: float
    gain_z: float
    qber_z: float
    p1_sq: float
    q1_sq: float
    f_ec: float = DEFAULT_ERROR_CORRECTION

    def __post_init__(self) -> None:
        if not 0.0 <= self.y11 <= 1.0:
            raise ValueError(f"y11 must lie in [0, 1], got {self.y11}")
        if not 0.0 <= self.e11x <= 1.0:
            raise ValueError(f"e11x must lie in [0, 1], got {self.e11x}")
        if not self.gain_z >= 0.0:
            raise ValueError(f"gain must be >= 0, got {self.gain_z}")
        if not 0.0 <= self.qber_z <= 1.0:
            raise ValueError(f"qber must lie in [0, 1], got {self.qber_z}")
        if not 0.0 <= self.p1_sq <= 1.0:
            raise ValueError(f"p1_sq must lie in [0, 1], got {self.p1_sq}")
        if not 0.0 <= self.q1_sq <= 1.0:
            raise ValueError(f"q1_sq must lie in [0, 1], got {self.q1_sq}")
        if not self.f_ec >= 1.0:
            raise ValueError(f"error correction factor must be >= 1, got {self.f_ec}")


def key_rate(inputs: RateInputs) -> float:
    """Secret bits per signal pulse pair; negative means no key."""
    privacy = 1.0 - binary_entropy(inputs.e11x)
    gained = inputs.q1_sq * inputs.p1_sq * inputs.y11 * privacy
    spent = inputs.gain_z * inputs.f_ec * binary_entropy(inputs.qber_z)
    return gained - spent


@dataclass(frozen=True)
class RatePoint:
    """One point of a rate-versus-distance curve.

    valid=False means the estimator could not license a bound here (or
    the optimizer found no positive rate); such points carry rate 0 and
    a reason code.
    """

    distance_km: float
    scenario: str
    mu: float
    mu_prime: float
    y11_bound: float
    e11_bound: float
    rate: float
    valid: bool
    reason: str = ""


def basis_tables(link: LinkSpec) -> tuple[YieldTable, YieldTable]:
    """Ground-truth yield tables of both bases for one link."""
    return yield_table(link, Basis.Z), yield_table(link, Basis.X)


# weights are pure functions of (source, cutoff); the optimizer hits the
# same handful of sources hundreds of times per curve
_side_weights = lru_cache(maxsize=None)(side_weights)


def _heralding(scenario: ScenarioKind) -> HeraldingDetector | None:
    if not scenario.heralded:
        return None
    return HeraldingDetector(scenario.heralding_efficiency, scenario.heralding_dark_rate)


def _record_grid(
    table_z: YieldTable,
    table_x: YieldTable,
    kind: DistributionKind,
    heralding: HeraldingDetector | None,
    pairs: list[tuple[SourceSpec, SourceSpec]],
) -> GainTable:
    """All records the estimator needs: each pair plus its vacuum rows."""
    gains = GainTable()
    cutoff = table_z.cutoff
    for pair in pairs:
        cls = pair[0].trigger_class
        x = pair[0].intensity
        y = pair[1].intensity
        for xi, yi in ((x, y), (x, 0.0), (0.0, y), (0.0, 0.0)):
            wa = _side_weights(SourceSpec(kind, xi, heralding, cls), cutoff)
            wb = _side_weights(SourceSpec(kind, yi, heralding, cls), cutoff)
            gains.add(gain_from_yields(wa, wb, table_z))
            gains.add(gain_from_yields(wa, wb, table_x))
    return gains


def rate_for_scenario(
    scenario: ScenarioKind,
    link: LinkSpec,
    mu: float,
    mu_prime: float,
    tables: tuple[YieldTable, YieldTable] | None = None,
    f_ec: float = DEFAULT_ERROR_CORRECTION,
) -> RatePoint:
    """Evaluate one scenario at fixed intensities on one link.

    mu is ignored by the asymptotic scenarios.  The returned rate may be
    negative for a valid point; validity only says the bounds existed.
    """
    if not mu_prime > 0.0:
        raise ValueError(f"signal intensity must be > 0, got {mu_prime}")
    if tables is None:
        tables = basis_tables(link)
    table_z, table_x = tables
    kind = scenario.distribution
    heralding = _heralding(scenario)
    signal_cls = TriggerClass.TRIGGERED if scenario.heralded else TriggerClass.ALL

    def src(intensity: float, cls: TriggerClass) -> SourceSpec:
        return SourceSpec(kind, intensity, heralding, cls)

    signal_pair = (src(mu_prime, signal_cls), src(mu_prime, signal_cls))
    signal = gain_from_yields(
        _side_weights(signal_pair[0], link.cutoff),
        _side_weights(signal_pair[1], link.cutoff),
        table_z,
    )
    p1 = photon_weight(kind, mu_prime, 1)
    q1 = trigger_prob(heralding, 1) if heralding is not None else 1.0

    def invalid(reason: str, y11: float = 0.0, e11: float = 0.0) -> RatePoint:
        return RatePoint(
            distance_km=link.total_distance_km,
            scenario=scenario.name,
            mu=0.0 if scenario.asymptotic else mu,
            mu_prime=mu_prime,
            y11_bound=y11,
            e11_bound=e11,
            rate=0.0,
            valid=False,
            reason=reason,
        )

    if scenario.asymptotic:
        y11 = float(table_z.yields[1, 1])
        e11 = float(table_x.errors[1, 1])
        mu_out = 0.0
    else:
        if not mu > 0.0:
            raise ValueError(f"weak intensity must be > 0, got {mu}")
        if scenario.coupled_mu:
            weak_cls, strong_cls = TriggerClass.TRIGGERED, TriggerClass.NON_TRIGGERED
        else:
            weak_cls = strong_cls = signal_cls
        weak = (src(mu, weak_cls), src(mu, weak_cls))
        strong = (src(mu_prime, strong_cls), src(mu_prime, strong_cls))
        gains = _record_grid(table_z, table_x, kind, heralding, [weak, strong])
        bound_z = y11_lower_bound(gains, weak, strong, Basis.Z, link.cutoff)
        bound_x = y11_lower_bound(gains, weak, strong, Basis.X, link.cutoff)
        if not (bound_z.conditions_ok and bound_x.conditions_ok):
            return invalid("bound_conditions", bound_z.value)
        try:
            e11 = e11_upper_bound(
                gains,
                weak,
                strong,
                single_pair_gain(weak, bound_x.value),
                single_pair_gain(strong, bound_x.value),
            )
        except BoundUnavailableError:
            return invalid("e11_unavailable", bound_z.value)
        y11 = bound_z.value
        mu_out = mu

    rate = key_rate(
        RateInputs(
            y11=y11,
            e11x=e11,
            gain_z=signal.gain,
            qber_z=signal.qber,
            p1_sq=p1 * p1,
            q1_sq=q1 * q1,
            f_ec=f_ec,
        )
    )
    return RatePoint(
        distance_km=link.total_distance_km,
        scenario=scenario.name,
        mu=mu_out,
        mu_prime=mu_prime,
        y11_bound=y11,
        e11_bound=e11,
        rate=rate,
        valid=True,
        reason="",
    )
