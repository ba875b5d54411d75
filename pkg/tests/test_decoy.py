"""Gain assembly and the single-photon-pair bound machinery."""

import math

import numpy as np
import pytest

from _oracles import record_oracle, side_lists_oracle
from mdiqkd.decoy import (
    BoundUnavailableError,
    GainRecord,
    GainTable,
    e11_upper_bound,
    gain_from_yields,
    pair_coefficients,
    s11_gains,
    series_terms,
    side_weights,
    single_pair_gain,
    symmetric_condition,
    y11_lower_bound,
    _error_moment,
)
from mdiqkd.optics import Basis, LinkSpec, YieldTable, yield_table
from mdiqkd.source import (
    DistributionKind,
    HeraldingDetector,
    SourceSpec,
    TriggerClass,
    photon_weight,
)

P = DistributionKind.POISSON
T = DistributionKind.THERMAL
DET = HeraldingDetector(0.75, 1e-6)
CUTOFF = 8


def pair(kind, intensity, heralding, cls):
    spec = SourceSpec(kind, intensity, heralding, cls)
    return (spec, spec)


def grid_gains(pairs, tables, cutoff=CUTOFF):
    """Each pair's record plus its three vacuum-row records, every table."""
    gains = GainTable()
    for pr in pairs:
        kind = pr[0].kind
        her = pr[0].heralding
        cls = pr[0].trigger_class
        x, y = pr[0].intensity, pr[1].intensity
        for xi, yi in ((x, y), (x, 0.0), (0.0, y), (0.0, 0.0)):
            wa = side_weights(SourceSpec(kind, xi, her, cls), cutoff)
            wb = side_weights(SourceSpec(kind, yi, her, cls), cutoff)
            for table in tables:
                gains.add(gain_from_yields(wa, wb, table))
    return gains


def synthetic_table(yields, errors=None, basis=Basis.Z):
    yields = np.asarray(yields, dtype=float)
    if errors is None:
        errors = np.zeros_like(yields)
    return YieldTable(basis=basis, cutoff=yields.shape[0] - 1, yields=yields, errors=np.asarray(errors, dtype=float))


H1_WEAK = pair(P, 0.125, DET, TriggerClass.TRIGGERED)
H1_STRONG = pair(P, 0.5, DET, TriggerClass.NON_TRIGGERED)


class TestSideWeights:
    def test_triggered_two_photon_at_unit_efficiency(self):
        w = side_weights(SourceSpec(P, 0.5, HeraldingDetector(1.0, 0.0), TriggerClass.TRIGGERED), 4)
        assert math.isclose(w.a[2], 0.0758163, abs_tol=5e-8)
        assert math.isclose(w.a[2], photon_weight(P, 0.5, 2), rel_tol=1e-14)

    def test_non_triggered_vanishes_at_unit_efficiency(self):
        w = side_weights(SourceSpec(P, 0.3, HeraldingDetector(1.0, 0.0), TriggerClass.NON_TRIGGERED), 4)
        assert w.a[1] == 0.0
        assert all(w.a[m] == 0.0 for m in range(1, 5))

    def test_plain_class_equals_distribution(self):
        w = side_weights(SourceSpec(P, 0.1), 4)
        assert w.a[1] == photon_weight(P, 0.1, 1)

    def test_cutoff_guard(self):
        with pytest.raises(ValueError):
            side_weights(SourceSpec(P, 0.1), 0)

    def test_matches_scalar_oracle(self):
        for kind in (P, T):
            for cls in (TriggerClass.TRIGGERED, TriggerClass.NON_TRIGGERED, TriggerClass.ALL):
                her = None if cls is TriggerClass.ALL else DET
                spec = SourceSpec(kind, 0.35, her, cls)
                w = side_weights(spec, 6)
                interior, vac, vac0 = side_lists_oracle(spec, 6)
                assert np.allclose(w.a[1:], interior[1:], rtol=1e-14)
                assert np.allclose(w.vac, vac, rtol=1e-14)
                assert math.isclose(w.vac_at_zero, vac0, rel_tol=1e-14)

    def test_exact_totals(self):
        w = side_weights(SourceSpec(P, 0.5, DET, TriggerClass.TRIGGERED), CUTOFF)
        brute_a = sum(
            (1.0 - 0.25**m) * photon_weight(P, 0.5, m) for m in range(1, 400)
        )
        assert math.isclose(w.a_total, brute_a, rel_tol=1e-12)
        assert w.a_total >= float(w.a[1:].sum())


class TestGainFromYields:
    def test_saturated_interior_series(self):
        yields = np.zeros((CUTOFF + 1, CUTOFF + 1))
        yields[1:, 1:] = 1.0
        table = synthetic_table(yields)
        det = HeraldingDetector(1.0, 0.0)
        wa = side_weights(SourceSpec(P, 0.5, det, TriggerClass.TRIGGERED), CUTOFF)
        rec = gain_from_yields(wa, wa, table)
        closed = (1.0 - math.exp(-0.5)) ** 2
        assert abs(rec.gain - closed) <= rec.tail + 1e-15
        assert math.isclose(rec.gain, 0.1548181, abs_tol=5e-8)

    def test_zero_table(self):
        table = synthetic_table(np.zeros((CUTOFF + 1, CUTOFF + 1)))
        wa = side_weights(SourceSpec(P, 0.3, DET, TriggerClass.TRIGGERED), CUTOFF)
        rec = gain_from_yields(wa, wa, table)
        assert rec.gain == 0.0
        assert rec.qber == 0.0

    def test_vacuum_source_with_zero_dark_rate(self):
        det = HeraldingDetector(0.75, 0.0)
        wa = side_weights(SourceSpec(P, 0.0, det, TriggerClass.TRIGGERED), CUTOFF)
        wb = side_weights(SourceSpec(P, 0.5, det, TriggerClass.TRIGGERED), CUTOFF)
        rec = gain_from_yields(wa, wb, yield_table(LinkSpec(50.0), Basis.Z))
        assert rec.gain == 0.0

    def test_cutoff_and_class_mismatch(self):
        table = yield_table(LinkSpec(50.0), Basis.Z)
        short = side_weights(SourceSpec(P, 0.3), 4)
        full = side_weights(SourceSpec(P, 0.3), CUTOFF)
        with pytest.raises(ValueError):
            gain_from_yields(short, full, table)
        other = side_weights(SourceSpec(P, 0.3, DET, TriggerClass.TRIGGERED), CUTOFF)
        with pytest.raises(ValueError):
            gain_from_yields(full, other, table)

    def test_matches_scalar_oracle(self):
        table = yield_table(LinkSpec(80.0), Basis.X)
        yl = table.yields.tolist()
        el = table.errors.tolist()
        cases = [
            (SourceSpec(P, 0.125, DET, TriggerClass.TRIGGERED), SourceSpec(P, 0.125, DET, TriggerClass.TRIGGERED)),
            (SourceSpec(P, 0.5, DET, TriggerClass.NON_TRIGGERED), SourceSpec(P, 0.0, DET, TriggerClass.NON_TRIGGERED)),
            (SourceSpec(T, 0.2, DET, TriggerClass.TRIGGERED), SourceSpec(T, 0.2, DET, TriggerClass.TRIGGERED)),
            (SourceSpec(P, 0.1), SourceSpec(P, 0.4)),
        ]
        for spec_a, spec_b in cases:
            rec = gain_from_yields(side_weights(spec_a, CUTOFF), side_weights(spec_b, CUTOFF), table)
            gain, wrong = record_oracle(spec_a, spec_b, yl, el)
            assert math.isclose(rec.gain, gain, rel_tol=1e-12, abs_tol=1e-300)
            assert math.isclose(rec.gain * rec.qber, wrong, rel_tol=1e-11, abs_tol=1e-300)

    def test_event_classes_partition_the_plain_gain(self):
        # per side the two heralded classes split the plain distribution
        t = side_weights(SourceSpec(P, 0.4, DET, TriggerClass.TRIGGERED), CUTOFF)
        nt = side_weights(SourceSpec(P, 0.4, DET, TriggerClass.NON_TRIGGERED), CUTOFF)
        plain = side_weights(SourceSpec(P, 0.4), CUTOFF)
        assert np.allclose(t.a + nt.a, plain.a, rtol=1e-13)
        assert np.allclose(t.vac + nt.vac, plain.vac, rtol=1e-13)
        assert math.isclose(t.vac_at_zero + nt.vac_at_zero, 1.0, rel_tol=1e-15)
        # with matched classes on both sides the cross terms t/nt and nt/t
        # are left out, so the two gains undershoot the plain record
        table = yield_table(LinkSpec(60.0), Basis.Z)
        g_t = gain_from_yields(t, t, table).gain
        g_nt = gain_from_yields(nt, nt, table).gain
        g_all = gain_from_yields(plain, plain, table).gain
        assert 0.0 < g_t + g_nt <= g_all + 1e-15

    def test_tail_certificate_covers_truncation(self):
        for dist in (0.0, 100.0):
            t6 = yield_table(LinkSpec(dist, cutoff=6), Basis.Z)
            t8 = yield_table(LinkSpec(dist, cutoff=8), Basis.Z)
            for intensity in (0.3, 0.8):
                w6 = side_weights(SourceSpec(P, intensity, DET, TriggerClass.NON_TRIGGERED), 6)
                w8 = side_weights(SourceSpec(P, intensity, DET, TriggerClass.NON_TRIGGERED), 8)
                r6 = gain_from_yields(w6, w6, t6)
                r8 = gain_from_yields(w8, w8, t8)
                assert abs(r8.gain - r6.gain) <= r6.tail + 1e-18
                assert r8.tail < r6.tail


class TestGainTable:
    def test_lookup_and_iteration(self):
        rec = GainRecord(Basis.Z, 0.1, 0.2, TriggerClass.ALL, 0.5, 0.01)
        other = GainRecord(Basis.X, 0.1, 0.2, TriggerClass.ALL, 0.4, 0.02)
        table = GainTable([rec, other])
        assert len(table) == 2
        assert table.get(Basis.Z, 0.1, 0.2, TriggerClass.ALL) is rec
        assert [r.basis for r in table] == [Basis.X, Basis.Z]

    def test_float_noise_tolerated(self):
        rec = GainRecord(Basis.Z, 0.1, 0.2, TriggerClass.ALL, 0.5, 0.01)
        table = GainTable([rec])
        assert table.get(Basis.Z, 0.1 * (1.0 + 1e-12), 0.2, TriggerClass.ALL) is rec

    def test_missing_record(self):
        table = GainTable()
        with pytest.raises(KeyError):
            table.get(Basis.Z, 0.1, 0.2, TriggerClass.ALL)

    def test_duplicate_key_replaces(self):
        first = GainRecord(Basis.Z, 0.1, 0.2, TriggerClass.ALL, 0.5, 0.0)
        second = GainRecord(Basis.Z, 0.1, 0.2, TriggerClass.ALL, 0.7, 0.0)
        table = GainTable([first, second])
        assert len(table) == 1
        assert table.get(Basis.Z, 0.1, 0.2, TriggerClass.ALL).gain == 0.7


class TestSeriesClosure:
    def test_vacuum_rows_reconstruct_exactly(self):
        table = yield_table(LinkSpec(70.0), Basis.Z)
        gains = grid_gains([H1_WEAK, H1_STRONG], [table])
        for pr in (H1_WEAK, H1_STRONG):
            full, vacuum, _ = series_terms(gains, pr, Basis.Z)
            coeff = pair_coefficients(pr, CUTOFF)
            interior = float(coeff[1:, 1:].ravel() @ table.yields[1:, 1:].ravel())
            assert math.isclose(full - vacuum, interior, rel_tol=1e-12, abs_tol=1e-300)


class TestY11LowerBound:
    def make_gains(self, table):
        return grid_gains([H1_WEAK, H1_STRONG], [table])

    def test_k_factor_closed_form(self):
        table = yield_table(LinkSpec(50.0), Basis.Z)
        bound = y11_lower_bound(self.make_gains(table), H1_WEAK, H1_STRONG, Basis.Z, CUTOFF)
        eta, mu, mu_p = 0.75, 0.125, 0.5
        closed = (
            (1 - eta) * (1 - eta) ** 2 / (eta * (1 - (1 - eta) ** 2))
            * (mu_p / mu) ** 3
            * math.exp(2 * mu - 2 * mu_p)
        )
        assert not bound.swapped
        assert math.isclose(bound.k_factor, closed, rel_tol=1e-12)
        assert math.isclose(bound.k_factor, 0.6718102083427759, rel_tol=1e-12)

    def test_sound_on_synthetic_table(self):
        decay = 1.0 - 0.9 ** (np.add.outer(np.arange(CUTOFF + 1), np.arange(CUTOFF + 1)))
        table = synthetic_table(decay)
        gains = self.make_gains(table)
        bound = y11_lower_bound(gains, H1_WEAK, H1_STRONG, Basis.Z, CUTOFF)
        assert bound.conditions_ok
        true_y11 = 1.0 - 0.9**2
        assert 0.0 < bound.value <= true_y11 + 1e-12

    def test_exact_when_only_the_single_pair_cell_fires(self):
        yields = np.zeros((CUTOFF + 1, CUTOFF + 1))
        yields[1, 1] = 0.37
        gains = self.make_gains(synthetic_table(yields))
        bound = y11_lower_bound(gains, H1_WEAK, H1_STRONG, Basis.Z, CUTOFF)
        assert bound.conditions_ok and not bound.clamped
        assert math.isclose(bound.value, 0.37, rel_tol=1e-12)

    def test_all_zero_gains(self):
        table = synthetic_table(np.zeros((CUTOFF + 1, CUTOFF + 1)))
        bound = y11_lower_bound(self.make_gains(table), H1_WEAK, H1_STRONG, Basis.Z, CUTOFF)
        assert bound.conditions_ok
        assert bound.value == 0.0

    def test_argument_order_does_not_matter(self):
        table = yield_table(LinkSpec(60.0), Basis.Z)
        gains = self.make_gains(table)
        fwd = y11_lower_bound(gains, H1_WEAK, H1_STRONG, Basis.Z, CUTOFF)
        rev = y11_lower_bound(gains, H1_STRONG, H1_WEAK, Basis.Z, CUTOFF)
        assert not fwd.swapped and rev.swapped
        # canonicalisation restores the same roles, so every reported
        # quantity matches; only the swapped flag records the exchange
        assert math.isclose(rev.k_factor, fwd.k_factor, rel_tol=1e-12)
        assert math.isclose(rev.denominator, fwd.denominator, rel_tol=1e-12)
        assert math.isclose(rev.value, fwd.value, rel_tol=1e-12)
        assert math.isclose(rev.tail, fwd.tail, rel_tol=1e-9)
        assert rev.conditions_ok == fwd.conditions_ok

    def test_sound_against_ground_truth(self):
        for dist in (0.0, 100.0, 200.0):
            for basis in (Basis.Z, Basis.X):
                table = yield_table(LinkSpec(dist), basis)
                gains = grid_gains([H1_WEAK, H1_STRONG], [table])
                bound = y11_lower_bound(gains, H1_WEAK, H1_STRONG, basis, CUTOFF)
                assert bound.conditions_ok
                assert 0.0 < bound.value <= table.yields[1, 1] + 1e-12

    def test_degenerate_weights_unavailable(self):
        det = HeraldingDetector(1.0, 0.0)
        weak = pair(P, 0.125, det, TriggerClass.TRIGGERED)
        strong = pair(P, 0.5, det, TriggerClass.NON_TRIGGERED)
        table = yield_table(LinkSpec(50.0), Basis.Z)
        gains = grid_gains([weak, strong], [table])
        bound = y11_lower_bound(gains, weak, strong, Basis.Z, CUTOFF)
        assert not bound.conditions_ok
        assert not math.isfinite(bound.tail) or bound.tail == 0.0

    def test_missing_records(self):
        with pytest.raises(KeyError):
            y11_lower_bound(GainTable(), H1_WEAK, H1_STRONG, Basis.Z, CUTOFF)

    def test_inflating_background_lowers_the_bound(self):
        table = yield_table(LinkSpec(90.0), Basis.Z)
        base = self.make_gains(table)
        corner = base.get(Basis.Z, 0.0, 0.0, TriggerClass.TRIGGERED)
        values = []
        for bump in (0.0, 1e-9, 1e-7):
            gains = GainTable(iter(base))
            gains.add(
                GainRecord(
                    Basis.Z, 0.0, 0.0, TriggerClass.TRIGGERED,
                    corner.gain + bump, corner.qber, corner.tail,
                )
            )
            values.append(y11_lower_bound(gains, H1_WEAK, H1_STRONG, Basis.Z, CUTOFF).value)
        assert values[0] >= values[1] >= values[2]

    def test_negative_numerator_clamps_to_zero(self):
        gains = GainTable()
        for pr, gain in ((H1_WEAK, 0.9), (H1_STRONG, 0.0)):
            x, y = pr[0].intensity, pr[1].intensity
            cls = pr[0].trigger_class
            for xi, yi in ((x, y), (x, 0.0), (0.0, y), (0.0, 0.0)):
                g = gain if (xi, yi) == (x, y) else 0.0
                gains.add(GainRecord(Basis.Z, xi, yi, cls, g, 0.0))
        bound = y11_lower_bound(gains, H1_WEAK, H1_STRONG, Basis.Z, CUTOFF)
        assert bound.value == 0.0
        assert bound.clamped


class TestSymmetricCondition:
    def test_reference_points(self):
        assert symmetric_condition(0.125, 0.5, 0.75) is True
        assert symmetric_condition(0.1, 0.5, 0.5) is False
        assert symmetric_condition(0.25, 1.0, 0.75) is True

    def test_boundary_is_sharp(self):
        mu = (1.0 - 0.75) * 0.5
        assert symmetric_condition(mu, 0.5, 0.75)
        assert not symmetric_condition(math.nextafter(mu, 0.0), 0.5, 0.75)


class TestS11Gains:
    def test_zero_yield(self):
        assert s11_gains(0.0, 0.7, 0.75) == (0.0, 0.0)

    def test_unit_efficiency(self):
        t, nt = s11_gains(1.0, 0.5, 1.0)
        assert math.isclose(t, 0.25 * math.exp(-1.0), rel_tol=1e-14)
        assert math.isclose(t, 0.0919699, abs_tol=5e-8)
        assert nt == 0.0

    def test_partial_efficiency(self):
        t, nt = s11_gains(0.5, 0.5, 0.75)
        assert math.isclose(t, 0.0258665, abs_tol=5e-8)
        assert math.isclose(nt, t / 9.0, rel_tol=1e-12)  # ((1-eta)/eta)^2 = 1/9

    def test_thermal_substitutes_its_single_photon_weight(self):
        t, _ = s11_gains(1.0, 0.5, 0.75, T)
        p1 = photon_weight(T, 0.5, 1)
        assert math.isclose(t, 0.5625 * p1 * p1, rel_tol=1e-14)

    def test_negative_yield_rejected(self):
        with pytest.raises(ValueError):
            s11_gains(-0.1, 0.5, 0.75)

    def test_single_pair_gain_matches(self):
        y11 = 0.37
        t, nt = s11_gains(y11, 0.5, 0.75)
        det = HeraldingDetector(0.75, 1e-6)
        assert math.isclose(
            single_pair_gain(pair(P, 0.5, det, TriggerClass.TRIGGERED), y11), t, rel_tol=1e-12
        )
        assert math.isclose(
            single_pair_gain(pair(P, 0.5, det, TriggerClass.NON_TRIGGERED), y11), nt, rel_tol=1e-12
        )


def minimal_x_gains(weak, strong, weak_vals, strong_vals):
    """Records whose error moments reduce to the supplied numerators."""
    gains = GainTable()
    for pr, (gain, qber) in ((weak, weak_vals), (strong, strong_vals)):
        x, y = pr[0].intensity, pr[1].intensity
        cls = pr[0].trigger_class
        for xi, yi in ((x, y), (x, 0.0), (0.0, y), (0.0, 0.0)):
            g = gain if (xi, yi) == (x, y) else 0.0
            q = qber if (xi, yi) == (x, y) else 0.0
            gains.add(GainRecord(Basis.X, xi, yi, cls, g, q))
    return gains


class TestE11UpperBound:
    def test_minimum_of_the_two_candidates(self):
        gains = minimal_x_gains(H1_WEAK, H1_STRONG, (0.08, 1.0), (0.03, 1.0))
        assert e11_upper_bound(gains, H1_WEAK, H1_STRONG, 1.0, 1.0) == 0.03

    def test_reporting_range_clamps(self):
        high = minimal_x_gains(H1_WEAK, H1_STRONG, (0.9, 1.0), (0.9, 1.0))
        assert e11_upper_bound(high, H1_WEAK, H1_STRONG, 1.0, 1.0) == 0.5
        zero = minimal_x_gains(H1_WEAK, H1_STRONG, (0.0, 0.0), (0.0, 0.0))
        assert e11_upper_bound(zero, H1_WEAK, H1_STRONG, 1.0, 1.0) == 0.0

    def test_unavailable_without_denominators(self):
        gains = minimal_x_gains(H1_WEAK, H1_STRONG, (0.1, 1.0), (0.1, 1.0))
        with pytest.raises(BoundUnavailableError):
            e11_upper_bound(gains, H1_WEAK, H1_STRONG, 0.0, 0.0)

    def test_error_moment_closes_over_the_table(self):
        table = yield_table(LinkSpec(60.0), Basis.X)
        gains = grid_gains([H1_WEAK, H1_STRONG], [table])
        coeff = pair_coefficients(H1_WEAK, CUTOFF)
        direct = float(
            (coeff[1:, 1:] * table.yields[1:, 1:] * table.errors[1:, 1:]).sum()
        )
        assert math.isclose(_error_moment(gains, H1_WEAK), direct, rel_tol=1e-10, abs_tol=1e-300)

    def test_sound_against_ground_truth(self):
        for dist in (0.0, 120.0):
            table_x = yield_table(LinkSpec(dist), Basis.X)
            gains = grid_gains([H1_WEAK, H1_STRONG], [table_x])
            bound_x = y11_lower_bound(gains, H1_WEAK, H1_STRONG, Basis.X, CUTOFF)
            assert bound_x.conditions_ok
            e11 = e11_upper_bound(
                gains,
                H1_WEAK,
                H1_STRONG,
                single_pair_gain(H1_WEAK, bound_x.value),
                single_pair_gain(H1_STRONG, bound_x.value),
            )
            assert e11 >= table_x.errors[1, 1] - 1e-12

    def test_multiphoton_floor_without_noise(self):
        # with misalignment and dark counts both zero the true single-pair
        # error is exactly zero, but same-side photon pairs still produce
        # accepted patterns with random bit relation, so the estimate
        # cannot reach zero; the floor below is a pinned regression value
        link = LinkSpec(0.0, relay_dark_rate=0.0, misalignment=0.0)
        table_x = yield_table(link, Basis.X)
        assert table_x.errors[1, 1] == 0.0
        gains = grid_gains([H1_WEAK, H1_STRONG], [table_x])
        bound_x = y11_lower_bound(gains, H1_WEAK, H1_STRONG, Basis.X, CUTOFF)
        e11 = e11_upper_bound(
            gains,
            H1_WEAK,
            H1_STRONG,
            single_pair_gain(H1_WEAK, bound_x.value),
            single_pair_gain(H1_STRONG, bound_x.value),
        )
        assert math.isclose(e11, 0.06830830648699965, rel_tol=1e-10)

    def test_complete_misalignment_saturates(self):
        table_x = yield_table(LinkSpec(0.0, misalignment=0.5), Basis.X)
        gains = grid_gains([H1_WEAK, H1_STRONG], [table_x])
        bound_x = y11_lower_bound(gains, H1_WEAK, H1_STRONG, Basis.X, CUTOFF)
        e11 = e11_upper_bound(
            gains,
            H1_WEAK,
            H1_STRONG,
            single_pair_gain(H1_WEAK, bound_x.value),
            single_pair_gain(H1_STRONG, bound_x.value),
        )
        assert e11 == 0.5
