"""Exact Fock-state model of the untrusted midpoint relay.

Alice and Bob each send number states of one BB84 polarization through a
lossy half-link into a Bell-state analyser: a 50/50 beamsplitter whose
two output ports each carry a polarizing splitter and two threshold
detectors.  A coincidence of exactly two detectors with orthogonal
polarizations announces a Bell outcome: same output port means Psi+,
opposite ports means Psi-.  Every other click pattern is discarded.

Amplitudes are computed by dense multinomial expansion over the four
detector modes (cH, cV, dH, dV), so the numbers are exact up to float
rounding.  Channel loss commutes with the passive optics and is applied
afterwards as binomial thinning of the input photon numbers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.stats import binom

__all__ = [
    "SAFETY_CAP",
    "Basis",
    "BB84State",
    "BsmOutcome",
    "LinkSpec",
    "YieldTable",
    "thin",
    "bs_output",
    "bsm_outcome_distribution",
    "yield_table",
]

# hard limit on photons entering one Bell-state measurement; the dense
# expansion grows as (m+n)^3 terms and this is far beyond any cutoff a
# gain series needs
SAFETY_CAP = 16

_SQRT1_2 = 1.0 / math.sqrt(2.0)


class BB84State(Enum):
    """Single-photon polarization states sent by the parties."""

    H = "H"
    V = "V"
    PLUS = "+"
    MINUS = "-"


class Basis(Enum):
    Z = "Z"
    X = "X"


BASIS_STATES = {
    Basis.Z: (BB84State.H, BB84State.V),
    Basis.X: (BB84State.PLUS, BB84State.MINUS),
}

# bit convention: first state of each basis encodes 0, second encodes 1
STATE_BIT = {
    BB84State.H: 0,
    BB84State.V: 1,
    BB84State.PLUS: 0,
    BB84State.MINUS: 1,
}


class BsmOutcome(Enum):
    PSI_PLUS = "psi+"
    PSI_MINUS = "psi-"
    FAIL = "fail"


@dataclass(frozen=True)
class LinkSpec:
    """Physical parameters of one symmetric link into the relay."""

    total_distance_km: float
    attenuation_db_per_km: float = 0.2
    relay_efficiency: float = 0.145
    relay_dark_rate: float = 3e-6
    misalignment: float = 0.015
    cutoff: int = 8

    def __post_init__(self) -> None:
        if not self.total_distance_km >= 0.0:
            raise ValueError(f"distance must be >= 0, got {self.total_distance_km}")
        if not self.attenuation_db_per_km >= 0.0:
            raise ValueError(f"attenuation must be >= 0, got {self.attenuation_db_per_km}")
        if not 0.0 <= self.relay_efficiency <= 1.0:
            raise ValueError(f"relay efficiency must lie in [0, 1], got {self.relay_efficiency}")
        if not 0.0 <= self.relay_dark_rate <= 1.0:
            raise ValueError(f"relay dark rate must lie in [0, 1], got {self.relay_dark_rate}")
        if not 0.0 <= self.misalignment <= 1.0:
            raise ValueError(f"misalignment must lie in [0, 1], got {self.misalignment}")
        if int(self.cutoff) != self.cutoff or self.cutoff < 1:
            raise ValueError(f"cutoff must be a positive integer, got {self.cutoff}")

    @property
    def survival(self) -> float:
        """Per-photon survival from one party to a relay detector.

        Combines half the total fibre length with the relay's detector
        efficiency.
        """
        fibre = 10.0 ** (-self.attenuation_db_per_km * (self.total_distance_km / 2.0) / 10.0)
        return self.relay_efficiency * fibre


@dataclass(frozen=True)
class YieldTable:
    """Success and error probabilities per launched photon pair (m, n).

    yields[m][n] is the probability that m photons from Alice and n from
    Bob (before loss) produce an accepted Bell announcement; errors[m][n]
    is the bit error fraction among those successes, averaged over the
    four equiprobable state pairs of the basis.
    """

    basis: Basis
    cutoff: int
    yields: np.ndarray
    errors: np.ndarray


def thin(m: int, survival: float) -> np.ndarray:
    """Binomial loss acting on an m-photon pulse.

    Returns the distribution over surviving counts k = 0..m as an array;
    thin(2, 1.0) is [0, 0, 1].
    """
    if m < 0:
        raise ValueError(f"photon number must be >= 0, got {m}")
    if not 0.0 <= survival <= 1.0:
        raise ValueError(f"survival must lie in [0, 1], got {survival}")
    return binom.pmf(np.arange(m + 1), m, survival)


def _thin_matrix(n_max: int, survival: float) -> np.ndarray:
    """Matrix T with T[m, k] = P(k of m photons survive)."""
    m = np.arange(n_max + 1)[:, None]
    k = np.arange(n_max + 1)[None, :]
    return binom.pmf(k, m, survival)


def bs_output(j: int, k: int) -> dict[tuple[int, int], float]:
    """Output distribution of a 50/50 beamsplitter fed |j, k> of one polarization.

    Keys are output occupations (p, q) with p + q = j + k.  Two-photon
    interference is built in: bs_output(1, 1) puts zero weight on (1, 1).
    """
    if j < 0 or k < 0:
        raise ValueError(f"photon numbers must be >= 0, got ({j}, {k})")
    if j + k > SAFETY_CAP:
        raise ValueError(f"photon total {j + k} exceeds safety cap {SAFETY_CAP}")
    amps: dict[tuple[int, int], float] = {}
    total = j + k
    scale = 2.0 ** (-(total) / 2.0) / math.sqrt(math.factorial(j) * math.factorial(k))
    for p in range(total + 1):
        q = total - p
        coeff = 0
        for i in range(max(0, p - k), min(j, p) + 1):
            coeff += math.comb(j, i) * math.comb(k, p - i) * (-1) ** (k - p + i)
        if coeff:
            amps[(p, q)] = coeff * scale * math.sqrt(math.factorial(p) * math.factorial(q))
    out = {pq: a * a for pq, a in amps.items()}
    # drop float dust so impossible outcomes are reported as absent
    return {pq: v for pq, v in out.items() if v > 1e-30}


def _jones(state: BB84State) -> tuple[float, float]:
    if state is BB84State.H:
        return (1.0, 0.0)
    if state is BB84State.V:
        return (0.0, 1.0)
    if state is BB84State.PLUS:
        return (_SQRT1_2, _SQRT1_2)
    return (_SQRT1_2, -_SQRT1_2)


def _rotated(vec: tuple[float, float], theta: float) -> tuple[float, float]:
    c, s = math.cos(theta), math.sin(theta)
    return (c * vec[0] - s * vec[1], s * vec[0] + c * vec[1])


@lru_cache(maxsize=None)
def _compositions(total: int) -> np.ndarray:
    """All ways to place `total` photons into the four detector modes."""
    rows = [
        (n0, n1, n2, n3)
        for n0 in range(total + 1)
        for n1 in range(total - n0 + 1)
        for n2 in range(total - n0 - n1 + 1)
        for n3 in (total - n0 - n1 - n2,)
    ]
    arr = np.array(rows, dtype=np.int64).reshape(len(rows), 4)
    arr.flags.writeable = False
    return arr


_FACT = np.array([float(math.factorial(i)) for i in range(SAFETY_CAP + 1)])


def _side_terms(count: int, amps: tuple[float, float, float, float]) -> tuple[np.ndarray, np.ndarray]:
    """Multinomial expansion of one party's count-photon creation operator.

    Returns the mode compositions and the operator coefficient of each,
    without the final 1/sqrt(count!) normalisation.
    """
    comps = _compositions(count)
    fact = _FACT[count]
    vals = np.empty(len(comps))
    for idx, (n0, n1, n2, n3) in enumerate(comps):
        coeff = fact / (_FACT[n0] * _FACT[n1] * _FACT[n2] * _FACT[n3])
        vals[idx] = coeff * amps[0] ** n0 * amps[1] ** n1 * amps[2] ** n2 * amps[3] ** n3
    return comps, vals


def _pattern_weights(occs: np.ndarray, dark_rate: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-occupation probabilities of the Psi+ and Psi- click patterns."""
    click = np.where(occs > 0, 1.0, dark_rate)
    quiet = 1.0 - click

    def exactly(a: int, b: int, c: int, d: int) -> np.ndarray:
        return click[:, a] * click[:, b] * quiet[:, c] * quiet[:, d]

    plus = exactly(0, 1, 2, 3) + exactly(2, 3, 0, 1)
    minus = exactly(0, 3, 1, 2) + exactly(1, 2, 0, 3)
    return plus, minus


def _pair_core(
    k_a: int,
    amps_a: tuple[float, float, float, float],
    k_b: int,
    amps_b: tuple[float, float, float, float],
    dark_rate: float,
) -> tuple[float, float]:
    """Bell-pattern probabilities for k_a and k_b photons hitting the relay."""
    comps_a, vals_a = _side_terms(k_a, amps_a)
    comps_b, vals_b = _side_terms(k_b, amps_b)
    base = k_a + k_b + 1
    occ = comps_a[:, None, :] + comps_b[None, :, :]
    flat = ((occ[..., 0] * base + occ[..., 1]) * base + occ[..., 2]) * base + occ[..., 3]
    dense = np.zeros(base ** 4)
    np.add.at(dense, flat.ravel(), np.outer(vals_a, vals_b).ravel())
    nz = np.flatnonzero(dense)
    if nz.size == 0:
        return 0.0, 0.0
    occs = np.empty((nz.size, 4), dtype=np.int64)
    rem = nz
    for col in (3, 2, 1, 0):
        occs[:, col] = rem % base
        rem = rem // base
    norm = np.sqrt(_FACT[occs].prod(axis=1) / (_FACT[k_a] * _FACT[k_b]))
    probs = (dense[nz] * norm) ** 2
    w_plus, w_minus = _pattern_weights(occs, dark_rate)
    return float(probs @ w_plus), float(probs @ w_minus)


@lru_cache(maxsize=None)
def _pair_tables(
    state_a: BB84State,
    state_b: BB84State,
    misalignment: float,
    dark_rate: float,
    cap_a: int,
    cap_b: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Psi+/Psi- probabilities for every surviving pair count up to the caps.

    Misalignment is modelled as a polarization rotation of Bob's arm by
    theta with sin(theta)^2 equal to the misalignment parameter.  These
    tables depend only on the relay, not on channel loss, so they are
    cached and reused across distances.
    """
    theta = math.asin(math.sqrt(misalignment))
    jones_a = _jones(state_a)
    jones_b = _rotated(_jones(state_b), theta)
    # mode order (cH, cV, dH, dV); Bob's port picks up the minus sign
    amps_a = (
        jones_a[0] * _SQRT1_2,
        jones_a[1] * _SQRT1_2,
        jones_a[0] * _SQRT1_2,
        jones_a[1] * _SQRT1_2,
    )
    amps_b = (
        jones_b[0] * _SQRT1_2,
        jones_b[1] * _SQRT1_2,
        -jones_b[0] * _SQRT1_2,
        -jones_b[1] * _SQRT1_2,
    )
    plus = np.empty((cap_a + 1, cap_b + 1))
    minus = np.empty((cap_a + 1, cap_b + 1))
    for ka in range(cap_a + 1):
        for kb in range(cap_b + 1):
            plus[ka, kb], minus[ka, kb] = _pair_core(ka, amps_a, kb, amps_b, dark_rate)
    plus.flags.writeable = False
    minus.flags.writeable = False
    return plus, minus


def bsm_outcome_distribution(
    m: int,
    n: int,
    alice_state: BB84State,
    bob_state: BB84State,
    link: LinkSpec,
) -> dict[BsmOutcome, float]:
    """Outcome distribution when Alice launches m photons and Bob launches n.

    Loss is applied as independent binomial thinning of each side before
    the relay; the fail probability is the exact complement of the two
    announced outcomes.
    """
    if m < 0 or n < 0:
        raise ValueError(f"photon numbers must be >= 0, got ({m}, {n})")
    if m + n > SAFETY_CAP:
        raise ValueError(f"photon total {m + n} exceeds safety cap {SAFETY_CAP}")
    plus_tab, minus_tab = _pair_tables(
        alice_state, bob_state, link.misalignment, link.relay_dark_rate, m, n
    )
    t = link.survival
    ta = thin(m, t)
    tb = thin(n, t)
    p_plus = float(ta @ plus_tab @ tb)
    p_minus = float(ta @ minus_tab @ tb)
    return {
        BsmOutcome.PSI_PLUS: p_plus,
        BsmOutcome.PSI_MINUS: p_minus,
        BsmOutcome.FAIL: 1.0 - p_plus - p_minus,
    }


def yield_table(link: LinkSpec, basis: Basis) -> YieldTable:
    """Ground-truth yields and error fractions for all (m, n) up to the cutoff.

    State pairs within the basis are taken equiprobable.  In the Z basis
    both announcements imply anti-correlated bits, so every success from
    an equal-bit pair is an error.  In the X basis Psi- implies
    anti-correlated and Psi+ correlated bits, so equal-bit pairs count
    their Psi- successes as errors and unequal-bit pairs their Psi+ ones.
    """
    if link.cutoff < 2:
        raise ValueError(f"cutoff must be >= 2 for a usable table, got {link.cutoff}")
    if 2 * link.cutoff > SAFETY_CAP:
        raise ValueError(
            f"cutoff {link.cutoff} needs up to {2 * link.cutoff} photons, cap is {SAFETY_CAP}"
        )
    n_max = link.cutoff
    succ = np.zeros((n_max + 1, n_max + 1))
    wrong = np.zeros((n_max + 1, n_max + 1))
    for sa in BASIS_STATES[basis]:
        for sb in BASIS_STATES[basis]:
            plus_tab, minus_tab = _pair_tables(
                sa, sb, link.misalignment, link.relay_dark_rate, n_max, n_max
            )
            succ += plus_tab
            succ += minus_tab
            same_bit = STATE_BIT[sa] == STATE_BIT[sb]
            if basis is Basis.Z:
                if same_bit:
                    wrong += plus_tab
                    wrong += minus_tab
            else:
                wrong += minus_tab if same_bit else plus_tab
    succ *= 0.25
    wrong *= 0.25
    t_mat = _thin_matrix(n_max, link.survival)
    yields = t_mat @ succ @ t_mat.T
    wrong_mixed = t_mat @ wrong @ t_mat.T
    errors = np.divide(
        wrong_mixed,
        np.maximum(yields, 1e-300),
        out=np.zeros_like(wrong_mixed),
        where=yields > 0,
    )
    yields.flags.writeable = False
    errors.flags.writeable = False
    return YieldTable(basis=basis, cutoff=n_max, yields=yields, errors=errors)
