import statistics

import numpy as np
import pytest

from conftest import accuracy, build_syn1, make_boxes
from gazepipeline.errors import AlgorithmFailure, LengthMismatch, UnknownMethod
from gazepipeline.line_assign import (
    ALGORITHMS,
    AssignmentParams,
    LineAssignment,
    WOC_PRECEDENCE,
    _dtw_path,
    assign,
    assign_with_fallback,
    realign_saccades,
    wisdom_of_crowds,
    y_correction,
)
from gazepipeline.stimulus import build_stimulus

ALL_METHODS = list(ALGORITHMS)


def member_assignments(syn):
    return [assign(m, syn.fixations, syn.stimulus) for m in ALL_METHODS]


class TestSyn1Oracle:
    def test_zero_drift_every_method_perfect(self, syn1_zero):
        for method in ALL_METHODS:
            result = assign(method, syn1_zero.fixations, syn1_zero.stimulus)
            hits = sum(1 for a, b in zip(result.line_idx, syn1_zero.truth) if a == b)
            assert hits == 30, f"{method} got {hits}/30"

    def test_zero_drift_woc_perfect(self, syn1_zero):
        woc = wisdom_of_crowds(member_assignments(syn1_zero))
        assert woc.line_idx == syn1_zero.truth
        assert woc.algorithm == "wisdom_of_crowds"

    def test_offset40_recovered_by_offset_tolerant_methods(self, syn1_offset40):
        for method in ("attach", "cluster", "stretch", "regress"):
            result = assign(method, syn1_offset40.fixations, syn1_offset40.stimulus)
            assert result.line_idx == syn1_offset40.truth, method

    def test_linear_drift_attach_misassigns_late_fixations(self, syn1_drift60):
        result = assign("attach", syn1_drift60.fixations, syn1_drift60.stimulus)
        # drift crosses the half-spacing boundary at fixation 25 of 30
        misses = [i for i, (a, b) in enumerate(zip(result.line_idx, syn1_drift60.truth))
                  if a != b]
        assert misses == [25, 26, 27, 28, 29]

    def test_linear_drift_warp_and_regress_beat_attach(self, syn1_drift60):
        attach_acc = accuracy(
            assign("attach", syn1_drift60.fixations, syn1_drift60.stimulus).line_idx,
            syn1_drift60.truth)
        for method in ("warp", "regress"):
            acc = accuracy(
                assign(method, syn1_drift60.fixations, syn1_drift60.stimulus).line_idx,
                syn1_drift60.truth)
            assert acc >= attach_acc, method

    def test_woc_at_least_median_member_on_all_variants(self):
        for kwargs in ({}, {"offset": 40.0}, {"drift_total": -60.0},
                       {"noise_sigma": 15.0, "seed": 7}):
            syn = build_syn1(**kwargs)
            members = member_assignments(syn)
            member_acc = [accuracy(a.line_idx, syn.truth) for a in members]
            woc_acc = accuracy(wisdom_of_crowds(members).line_idx, syn.truth)
            assert woc_acc >= statistics.median(member_acc), kwargs

    def test_corrected_y_is_assigned_line_center(self, syn1_offset40):
        stim = syn1_offset40.stimulus
        for method in ALL_METHODS:
            result = assign(method, syn1_offset40.fixations, stim)
            for j, cy in zip(result.line_idx, result.corrected_y):
                assert cy == stim.line_centers_y[j]


class TestYCorrection:
    def test_simple_arithmetic(self, syn1_zero):
        fix = syn1_zero.fixations[0]
        fix_y = fix.y
        a = LineAssignment(algorithm="attach", line_idx=[0], corrected_y=[100.0])
        values, mean = y_correction(a, [fix])
        assert values == [100.0 - fix_y]
        assert mean == values[0]

    def test_zero_drift_mean_zero(self, syn1_zero):
        a = assign("attach", syn1_zero.fixations, syn1_zero.stimulus)
        values, mean = y_correction(a, syn1_zero.fixations)
        assert all(abs(v) <= 20.0 for v in values)  # half hull height
        assert abs(mean) < 1e-9

    def test_offset40_mean_is_minus_delta(self, syn1_offset40):
        a = assign("attach", syn1_offset40.fixations, syn1_offset40.stimulus)
        _, mean = y_correction(a, syn1_offset40.fixations)
        assert abs(mean - (-40.0)) <= 1.0

    def test_length_mismatch(self, syn1_zero):
        a = LineAssignment(algorithm="attach", line_idx=[0], corrected_y=[100.0])
        with pytest.raises(LengthMismatch):
            y_correction(a, syn1_zero.fixations)


class TestWisdomOfCrowds:
    def _member(self, label, votes, centers=(100.0, 200.0, 300.0)):
        return LineAssignment(algorithm=label, line_idx=list(votes),
                              corrected_y=[centers[v] for v in votes])

    def test_majority(self):
        members = [self._member("attach", [1]), self._member("chain", [1]),
                   self._member("warp", [2])]
        assert wisdom_of_crowds(members).line_idx == [1]

    def test_tie_goes_to_precedence_member_vote(self):
        members = [self._member("attach", [2]), self._member("cluster", [1])]
        assert wisdom_of_crowds(members).line_idx == [2]

    def test_tie_order_insensitive_to_member_list_order(self):
        members = [self._member("cluster", [1]), self._member("attach", [2])]
        assert wisdom_of_crowds(members).line_idx == [2]

    def test_single_member_identity(self, syn1_drift60):
        a = assign("warp", syn1_drift60.fixations, syn1_drift60.stimulus)
        woc = wisdom_of_crowds([a])
        assert woc.line_idx == a.line_idx
        assert woc.corrected_y == a.corrected_y

    def test_identical_members_equal_member(self, syn1_zero):
        a = assign("attach", syn1_zero.fixations, syn1_zero.stimulus)
        woc = wisdom_of_crowds([a, a, a])
        assert woc.line_idx == a.line_idx

    def test_external_labels_rank_after_builtins_alphabetically(self):
        # all votes tied one-to-one; the earliest-precedence member wins
        members = [self._member("zeta", [0]), self._member("alpha", [1]),
                   self._member("warp", [2])]
        assert wisdom_of_crowds(members).line_idx == [2]
        members = [self._member("zeta", [0]), self._member("alpha", [1])]
        assert wisdom_of_crowds(members).line_idx == [1]

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            wisdom_of_crowds([self._member("attach", [1, 1]), self._member("chain", [1])])
        with pytest.raises(LengthMismatch):
            wisdom_of_crowds([])


class TestDispatchAndValidation:
    def test_unknown_method(self, syn1_zero):
        with pytest.raises(UnknownMethod):
            assign("levitate", syn1_zero.fixations, syn1_zero.stimulus)

    def test_empty_fixations(self, syn1_zero):
        result = assign("attach", [], syn1_zero.stimulus)
        assert result.line_idx == [] and result.corrected_y == []

    def test_single_line_forces_zero(self, syn1_zero):
        stim = build_stimulus(make_boxes(["only one line here"]))
        for method in ALL_METHODS:
            result = assign(method, syn1_zero.fixations[:5], stim)
            assert result.line_idx == [0] * 5, method

    def test_wrong_length_output_rejected(self, syn1_zero, monkeypatch):
        monkeypatch.setitem(ALGORITHMS, "broken", lambda xs, ys, s, p: [0])
        with pytest.raises(AlgorithmFailure):
            assign("broken", syn1_zero.fixations, syn1_zero.stimulus)

    def test_out_of_range_output_rejected(self, syn1_zero, monkeypatch):
        monkeypatch.setitem(
            ALGORITHMS, "broken", lambda xs, ys, s, p: [99] * len(xs))
        with pytest.raises(AlgorithmFailure):
            assign("broken", syn1_zero.fixations, syn1_zero.stimulus)

    def test_internal_exception_wrapped(self, syn1_zero, monkeypatch):
        def boom(xs, ys, s, p):
            raise RuntimeError("kaput")

        monkeypatch.setitem(ALGORITHMS, "broken", boom)
        with pytest.raises(AlgorithmFailure) as err:
            assign("broken", syn1_zero.fixations, syn1_zero.stimulus)
        assert "kaput" in str(err.value)

    def test_fallback_to_attach_keeps_label(self, syn1_zero, monkeypatch):
        def boom(xs, ys, s, p):
            raise RuntimeError("kaput")

        monkeypatch.setitem(ALGORITHMS, "broken", boom)
        warnings = []
        params = AssignmentParams(fallback_to_attach=True)
        result = assign_with_fallback("broken", syn1_zero.fixations,
                                      syn1_zero.stimulus, params, warnings)
        assert result.algorithm == "broken"
        assert result.line_idx == syn1_zero.truth
        assert len(warnings) == 1

    def test_fallback_disabled_raises(self, syn1_zero, monkeypatch):
        def boom(xs, ys, s, p):
            raise RuntimeError("kaput")

        monkeypatch.setitem(ALGORITHMS, "broken", boom)
        params = AssignmentParams(fallback_to_attach=False)
        with pytest.raises(AlgorithmFailure):
            assign_with_fallback("broken", syn1_zero.fixations,
                                 syn1_zero.stimulus, params, [])


class TestAlgorithmBehaviors:
    def test_attach_tie_goes_to_upper_line(self, syn1_zero):
        fix = [f for f in syn1_zero.fixations[:1]]
        fix[0].y = 150.0  # midway between centers 100 and 200
        assert assign("attach", fix, syn1_zero.stimulus).line_idx == [0]

    def test_attach_translation_covariant(self, syn1_noise):
        base = assign("attach", syn1_noise.fixations, syn1_noise.stimulus)
        import copy

        shifted_stim = copy.deepcopy(syn1_noise.stimulus)
        shifted_stim.line_centers_y = [c + 37.0 for c in shifted_stim.line_centers_y]
        shifted_fix = copy.deepcopy(syn1_noise.fixations)
        for f in shifted_fix:
            f.y += 37.0
        shifted = assign("attach", shifted_fix, shifted_stim)
        assert shifted.line_idx == base.line_idx

    def test_chain_breaks_on_large_jumps(self, syn1_zero):
        params = AssignmentParams(chain_x_max=1e9, chain_y_max=1e9)
        result = assign("chain", syn1_zero.fixations, syn1_zero.stimulus, params)
        # one chain: every fixation lands on the line nearest the global mean
        assert len(set(result.line_idx)) == 1

    def test_segment_uses_most_negative_jumps(self, syn1_zero):
        result = assign("segment", syn1_zero.fixations, syn1_zero.stimulus)
        assert result.line_idx == syn1_zero.truth

    def test_split_constant_dx_single_segment(self, syn1_zero):
        fix = syn1_zero.fixations[:4]
        for i, f in enumerate(fix):
            f.x = 100.0 + 50.0 * i
            f.y = 100.0
        assert assign("split", fix, syn1_zero.stimulus).line_idx == [0, 0, 0, 0]

    def test_cluster_handles_empty_cluster(self, syn1_zero):
        fix = syn1_zero.fixations[:6]
        for f in fix:
            f.y = 100.0  # everything on line 0; clusters 1 and 2 go empty
        assert assign("cluster", fix, syn1_zero.stimulus).line_idx == [0] * 6

    def test_warp_path_monotone(self):
        rng = np.random.default_rng(11)
        cost = rng.uniform(0, 5, size=(9, 13))
        path = _dtw_path(cost)
        assert path[0] == (0, 0) and path[-1] == (8, 12)
        for (a, b), (c, d) in zip(path, path[1:]):
            assert c >= a and d >= b and (c - a, d - b) != (0, 0)

    def test_slice_anchor_propagates_relative_order(self, syn1_drift60):
        result = assign("slice", syn1_drift60.fixations, syn1_drift60.stimulus)
        assert result.line_idx == syn1_drift60.truth

    def test_range_invariant_on_random_inputs(self):
        rng = np.random.default_rng(99)
        syn = build_syn1()
        stim = syn.stimulus
        for _ in range(25):
            n = int(rng.integers(1, 25))
            fix = []
            for i in range(n):
                f = build_syn1().fixations[0]
                f.index = i
                f.x = float(rng.uniform(0, 900))
                f.y = float(rng.uniform(-50, 500))
                f.start_ms = 1000 + 250 * i
                f.end_ms = f.start_ms + 200
                fix.append(f)
            for method in ALL_METHODS:
                result = assign(method, fix, stim)
                assert len(result.line_idx) == n
                assert all(0 <= j < stim.n_lines for j in result.line_idx), method

    def test_determinism(self, syn1_noise):
        for method in ALL_METHODS:
            a = assign(method, syn1_noise.fixations, syn1_noise.stimulus)
            b = assign(method, syn1_noise.fixations, syn1_noise.stimulus)
            assert a == b, method


class TestRealignSaccades:
    def test_syn1_all_pairs_kept(self, syn1_zero):
        a = assign("attach", syn1_zero.fixations, syn1_zero.stimulus)
        realigned = realign_saccades(syn1_zero.saccades, syn1_zero.fixations, a)
        assert len(realigned) == len(syn1_zero.fixations) - 1
        sweep = [r for r in realigned if r.from_line != r.to_line]
        assert [(r.from_line, r.to_line) for r in sweep] == [(0, 1), (1, 2)]
        for r in realigned:
            assert r.y_start_snapped == syn1_zero.stimulus.line_centers_y[r.from_line]
            assert r.y_end_snapped == syn1_zero.stimulus.line_centers_y[r.to_line]

    def test_saccade_into_discarded_fixation_dropped(self, syn1_zero):
        surviving = syn1_zero.fixations[:3] + syn1_zero.fixations[4:]
        a = assign("attach", surviving, syn1_zero.stimulus)
        realigned = realign_saccades(syn1_zero.saccades, surviving, a)
        assert len(realigned) == len(surviving) - 1
        kept_starts = {r.saccade.start_ms for r in realigned}
        # the saccade landing on the removed fixation is gone; the one
        # leaving it survives as the new pair's arrival movement
        assert syn1_zero.saccades[2].start_ms not in kept_starts
        assert syn1_zero.saccades[3].start_ms in kept_starts
        for r in realigned:
            prev, nxt = surviving[r.from_fix], surviving[r.to_fix]
            assert prev.end_ms <= r.saccade.start_ms <= nxt.start_ms

    def test_empty_inputs(self, syn1_zero):
        a = assign("attach", [], syn1_zero.stimulus)
        assert realign_saccades([], [], a) == []


class TestPrecedenceTable:
    def test_precedence_is_fixed(self):
        assert WOC_PRECEDENCE == (
            "attach", "slice", "cluster", "regress", "merge", "segment",
            "split", "stretch", "chain", "compare", "warp",
        )

    def test_every_algorithm_in_precedence(self):
        assert set(ALGORITHMS) == set(WOC_PRECEDENCE)
