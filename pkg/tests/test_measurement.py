import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from precession.errors import InvalidArgument
from precession.measurement import (
    ScoreEstimate,
    ShotRecord,
    classical_mc,
    estimate_score,
    estimate_to_json,
    fidelity_lower_bound,
    sample_protocol,
    sample_shots,
    shots_from_csv,
    shots_to_csv,
)
from precession.protocol import AngleSet, pos_curve, quantum_score, violating_cat
from precession.pulses import positive_levels
from precession.spin import spin_operators

S8 = spin_operators(3.5)
CAT_SCORE = 0.65625


@pytest.fixture(scope="module")
def cat():
    return violating_cat(S8, 7)


def _exact_probs(cat, K=7):
    from precession.pulses import run_protocol

    return [p.probabilities for p in run_protocol(cat, AngleSet.uniform_set(K))]


class TestSampling:
    def test_deterministic_bin(self):
        p = np.zeros(8)
        p[5] = 1
        h = sample_shots(p, 1234, 0)
        assert h[5] == 1234 and h.sum() == 1234

    def test_uniform_concentration(self):
        n = 10**6
        h = sample_shots(np.full(8, 1 / 8), n, 7)
        sigma = np.sqrt(n * (1 / 8) * (7 / 8))
        assert np.all(np.abs(h - n / 8) < 5 * sigma)

    def test_reproducible(self):
        p = np.array([0.1, 0.2, 0.3, 0.4])
        assert np.array_equal(sample_shots(p, 500, 3), sample_shots(p, 500, 3))
        assert not np.array_equal(sample_shots(p, 500, 3), sample_shots(p, 500, 4))

    @pytest.mark.parametrize("p", [[0.5, 0.6], [1.2, -0.2], [], [[0.5, 0.5]]])
    def test_invalid_simplex(self, p):
        with pytest.raises(InvalidArgument):
            sample_shots(p, 10, 0)

    def test_needs_shots(self):
        with pytest.raises(InvalidArgument):
            sample_shots([1.0], 0, 0)

    def test_record_validation(self):
        with pytest.raises(InvalidArgument):
            ShotRecord({0: [1, 2]}, 4)
        with pytest.raises(InvalidArgument):
            ShotRecord({0: [1, 2], 1: [3]}, 3)
        with pytest.raises(InvalidArgument):
            ShotRecord({}, 3)

    def test_protocol_record(self, cat):
        rec = sample_protocol(cat, AngleSet.uniform_set(7), 100, 5)
        assert sorted(rec.counts) == list(range(7))
        assert all(h.sum() == 100 for h in rec.counts.values())
        again = sample_protocol(cat, AngleSet.uniform_set(7), 100, 5)
        assert np.array_equal(rec.histograms(), again.histograms())


class TestEstimate:
    def test_infinite_shot_limit(self, cat):
        # frequencies equal to the exact probabilities
        n = 2**20
        counts = {}
        for k, p in enumerate(_exact_probs(cat)):
            h = np.round(p * n).astype(np.int64)
            h[np.argmax(h)] += n - h.sum()
            counts[k] = h
        est = estimate_score(ShotRecord(counts, n), 8)
        assert est.point == pytest.approx(CAT_SCORE, abs=1e-5)
        assert est.ci_low <= est.point <= est.ci_high

    def test_all_positive_collapses(self):
        h = np.array([0, 0, 0, 0, 10, 20, 30, 40])
        est = estimate_score(ShotRecord({k: h for k in range(5)}, 100), 8)
        assert (est.point, est.ci_low, est.ci_high) == (1.0, 1.0, 1.0)

    def test_dimension_checks(self):
        rec = ShotRecord({0: [1, 1, 1]}, 3)
        with pytest.raises(InvalidArgument):
            estimate_score(rec)
        with pytest.raises(InvalidArgument):
            estimate_score(ShotRecord({0: [1, 1]}, 2), 4)

    def test_subspace_mask_is_used(self):
        from precession.spin import cat_state

        target = cat_state(S8, 0.5)
        rec = sample_protocol(target, AngleSet.uniform_set(3), 1000, 1, subspace=(3, 4))
        assert np.array_equal(rec.positive, positive_levels(S8, (3, 4)))
        est = estimate_score(rec)
        assert abs(est.point - 0.5) < 5 * est.sigma + 1e-12

    def test_json(self):
        est = ScoreEstimate(0.6, 0.59, 0.61, 1000, 10, 3)
        assert set(json.loads(estimate_to_json(est))) == {
            "point", "ci_low", "ci_high", "n_bootstrap", "shots_per_angle", "seed"}

    def test_ci_width_matches_binomial_propagation(self, cat):
        n = 10**4
        probs = _exact_probs(cat)
        mask = positive_levels(S8)
        pk = np.array([p[mask].sum() for p in probs])
        sigma = np.sqrt(np.sum(pk * (1 - pk) / n)) / len(pk)
        est = estimate_score(sample_protocol(cat, AngleSet.uniform_set(7), n, 11))
        assert est.sigma == pytest.approx(sigma, rel=0.15)

    def test_coverage(self, cat):
        A = AngleSet.uniform_set(7)
        hits = 0
        for seed in range(200):
            est = estimate_score(sample_protocol(cat, A, 10**4, seed))
            hits += est.ci_low <= CAT_SCORE <= est.ci_high
        assert hits >= 190

    def test_error_scaling(self, cat):
        A = AngleSet.uniform_set(7)
        rms = []
        for n in (10**2, 10**4, 10**6):
            errs = [estimate_score(sample_protocol(cat, A, n, s), n_bootstrap=2).point - CAT_SCORE
                    for s in range(40)]
            rms.append(np.sqrt(np.mean(np.square(errs))))
        ratios = np.array(rms[:-1]) / np.array(rms[1:])
        assert np.all((ratios > 10 / 3) & (ratios < 30))


class TestFidelityBound:
    def test_examples(self):
        assert fidelity_lower_bound(0.636, 7).value == pytest.approx(16 * (2 * 0.636 - 1) / 5, abs=1e-12)
        assert fidelity_lower_bound(0.636, 7).value == pytest.approx(0.8704, abs=1e-12)
        assert fidelity_lower_bound(0.5, 5).value == 0
        assert fidelity_lower_bound(CAT_SCORE, 7).value == pytest.approx(1.0, abs=1e-15)

    def test_clamping_keeps_raw(self):
        b = fidelity_lower_bound(0.3, 7)
        assert b.value == 0 and b.raw < 0

    @given(st.floats(0, 1), st.floats(0, 1), st.sampled_from([3, 5, 7, 9]))
    def test_monotone(self, a, b, K):
        lo, hi = sorted((a, b))
        if hi - lo > 1e-9:
            assert fidelity_lower_bound(lo, K).raw < fidelity_lower_bound(hi, K).raw

    def test_saturates_at_closed_form(self):
        for K in (3, 5, 7):
            s = quantum_score(violating_cat(spin_operators((K) / 2), K), AngleSet.uniform_set(K)).score
            assert fidelity_lower_bound(s, K).raw == pytest.approx(1.0, abs=1e-12)


class TestClassicalMC:
    def test_k7(self):
        res = classical_mc(7, 10**5, 0)
        assert res.max_score == Fraction(4, 7)
        assert res.histogram.sum() == 10**5
        assert res.histogram[5:].sum() == 0

    def test_k3_grid(self):
        res = classical_mc(3, 10**4, 1)
        assert res.max_score == Fraction(2, 3)
        assert len(res.histogram) == 4 and res.histogram[3] == 0 and res.histogram[0] == 0

    def test_single_sample(self):
        a, b = classical_mc(5, 1, 9), classical_mc(5, 1, 9)
        assert a.max_score == b.max_score and a.n_samples == 1

    def test_invalid(self):
        with pytest.raises(InvalidArgument):
            classical_mc(4, 10, 0)
        with pytest.raises(InvalidArgument):
            classical_mc(5, 0, 0)


class TestFiles:
    def test_csv_round_trip(self, cat):
        rec = sample_protocol(cat, AngleSet.uniform_set(7), 50, 2)
        text = shots_to_csv(rec)
        assert text.splitlines()[0] == "angle_index,outcome_m,count"
        assert text.splitlines()[1].split(",")[1] == "-7/2"
        back = shots_from_csv(text)
        assert np.array_equal(back.histograms(), rec.histograms())
        assert back.shots_per_angle == 50

    def test_bad_csv(self):
        with pytest.raises(InvalidArgument):
            shots_from_csv("a,b\n1,2\n")
