"""
byzsim.attacks — Byzantine set sampling and the corruption models.
"""

import math

import numpy as np
import pytest

# ── Byzantine set ─────────────────────────────────────────────────────────

class TestSampleByzantineSet:
    def test_size_and_range(self, rng):
        from byzsim.attacks import sample_byzantine_set
        byz = sample_byzantine_set(100, 0.15, rng)
        assert len(byz) == 15
        assert all(1 <= j <= 100 for j in byz.indices)
        assert list(byz.indices) == sorted(set(byz.indices))

    def test_master_never_included(self, rng):
        from byzsim.attacks import sample_byzantine_set
        for r in range(50):
            assert 0 not in sample_byzantine_set(4, 0.49, rng.child(r))

    def test_floor_of_alpha_m(self, rng):
        from byzsim.attacks import byzantine_count, sample_byzantine_set
        assert byzantine_count(100, 0.29) == 29
        assert len(sample_byzantine_set(10, 0.19, rng)) == 1

    def test_zero_alpha_is_empty(self, rng):
        from byzsim.attacks import sample_byzantine_set
        byz = sample_byzantine_set(100, 0.0, rng)
        assert len(byz) == 0
        assert not byz.mask(101).any()

    def test_deterministic_per_stream(self):
        from byzsim.attacks import sample_byzantine_set
        from byzsim.numerics import SeededRng
        a = sample_byzantine_set(50, 0.2, SeededRng(3).child(1))
        b = sample_byzantine_set(50, 0.2, SeededRng(3).child(1))
        assert a == b

    def test_mask(self):
        from byzsim.attacks import ByzantineSet
        mask = ByzantineSet((1, 3), 0.4).mask(5)
        assert mask.tolist() == [False, True, False, True, False]

    @pytest.mark.parametrize("m,alpha", [(0, 0.1), (10, 0.5), (10, -0.1)])
    def test_invalid(self, rng, m, alpha):
        from byzsim.attacks import sample_byzantine_set
        from byzsim.exceptions import ConfigError
        with pytest.raises(ConfigError):
            sample_byzantine_set(m, alpha, rng)


# ── Corruption ────────────────────────────────────────────────────────────

class TestCorruptReport:
    def test_gaussian_ignores_honest_value(self, rng):
        from byzsim.attacks import AttackSpec, corrupt_report
        spec = AttackSpec(kind="gaussian")
        a = corrupt_report(np.zeros(5), spec, rng.child(1))
        b = corrupt_report(np.full(5, 100.0), spec, rng.child(1))
        assert np.array_equal(a, b)

    def test_gaussian_scale(self, rng):
        from byzsim.attacks import AttackSpec, corrupt_report
        draws = corrupt_report(np.zeros(20000), AttackSpec(kind="gaussian"), rng)
        assert draws.std() == pytest.approx(math.sqrt(200.0), rel=0.03)

    def test_omniscient(self, rng):
        from byzsim.attacks import AttackSpec, corrupt_report
        out = corrupt_report(np.array([1.0, -2.0]), AttackSpec(kind="omniscient"), rng)
        assert out.tolist() == [-1e10, 2e10]

    def test_bitflip_first_dims(self, rng):
        from byzsim.attacks import AttackSpec, corrupt_report
        out = corrupt_report(np.arange(1.0, 8.0), AttackSpec(kind="bitflip"), rng)
        assert out.tolist() == [-1.0, -2.0, -3.0, -4.0, -5.0, 6.0, 7.0]

    def test_bitflip_short_vector(self, rng):
        from byzsim.attacks import AttackSpec, corrupt_report
        out = corrupt_report(np.array([1.0, 2.0]), AttackSpec(kind="bitflip"), rng)
        assert out.tolist() == [-1.0, -2.0]

    def test_none_passes_a_copy(self, rng):
        from byzsim.attacks import AttackSpec, corrupt_report
        honest = np.array([1.0, 2.0])
        out = corrupt_report(honest, AttackSpec(), rng)
        out[0] = 9.0
        assert honest[0] == 1.0


class TestCorruptReports:
    def test_only_byzantine_rows_change(self, rng):
        from byzsim.attacks import AttackSpec, ByzantineSet, corrupt_reports
        reports = np.ones((5, 3))
        out = corrupt_reports(reports, ByzantineSet((2, 4), 0.4),
                              AttackSpec(kind="omniscient"), rng)
        assert np.array_equal(out[[0, 1, 3]], reports[[0, 1, 3]])
        assert np.all(out[[2, 4]] == -1e10)
        assert np.all(reports == 1.0)

    def test_workers_draw_independent_payloads(self, rng):
        from byzsim.attacks import AttackSpec, ByzantineSet, corrupt_reports
        out = corrupt_reports(np.zeros((3, 4)), ByzantineSet((1, 2), 0.5),
                              AttackSpec(kind="gaussian"), rng)
        assert not np.array_equal(out[1], out[2])

    def test_none_leaves_every_row_unchanged(self, rng):
        from byzsim.attacks import AttackSpec, ByzantineSet, corrupt_reports
        reports = np.arange(12.0).reshape(4, 3)
        out = corrupt_reports(reports, ByzantineSet((1, 3), 0.5), AttackSpec(), rng)
        assert np.array_equal(out, reports)


# ── Label flipping ────────────────────────────────────────────────────────

class TestLabelFlip:
    def test_shard(self):
        from byzsim.attacks import label_flip_shard
        from byzsim.models import DataShard
        shard = label_flip_shard(DataShard(np.ones((3, 1)), np.array([0.0, 1.0, 1.0])))
        assert shard.Y.tolist() == [1.0, 0.0, 0.0]

    def test_non_binary_rejected(self):
        from byzsim.attacks import label_flip_shard
        from byzsim.exceptions import DomainError
        from byzsim.models import DataShard
        with pytest.raises(DomainError):
            label_flip_shard(DataShard(np.ones((2, 1)), np.array([0.0, 0.5])))

    def test_stacked_responses(self):
        from byzsim.attacks import ByzantineSet, label_flip_responses
        Y = np.array([[0.0, 1.0], [0.0, 1.0], [1.0, 1.0]])
        out = label_flip_responses(Y, ByzantineSet((2,), 0.5))
        assert out.tolist() == [[0.0, 1.0], [0.0, 1.0], [0.0, 0.0]]
        assert Y[2].tolist() == [1.0, 1.0]
