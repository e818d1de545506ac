"""Scheduling, seeding, and match execution tests."""

from __future__ import annotations

import hashlib

import numpy as np
import pytest
from hypothesis import given, strategies as st

from arena.tournament import (MatchError, MatchRecord, PlayerSpec,
                              RunSettings, band, explicit_schedule,
                              match_rngs, match_seed, play_match,
                              round_robin, run_tournament, spaced_checkpoints,
                              stable_seed, validate_schedule)


def spec(pid: str, role: str, iteration: int | None = None) -> PlayerSpec:
    return PlayerSpec(pid, role, "custom", iteration)


class FixedGenerator:
    """Emits the same constant batch regardless of the RNG."""

    def __init__(self, value: float = 0.0, dim: int = 2):
        self.value = value
        self.dim = dim

    def sample(self, count, rng):
        return np.full((count, self.dim), self.value)


class StepDiscriminator:
    """Scores the first ``high`` samples of every batch 0.9, the rest 0.1."""

    def __init__(self, high: int):
        self.high = high

    def judge(self, batch, rng=None):
        scores = np.full(len(batch), 0.1)
        scores[:self.high] = 0.9
        return scores


class BrokenPlayer:
    def sample(self, count, rng):
        raise RuntimeError("deliberately broken")

    def judge(self, batch, rng=None):
        raise RuntimeError("deliberately broken")


def oracle_stable_seed(*parts) -> int:
    digest = hashlib.blake2b(digest_size=8)
    for part in parts:
        digest.update(str(part).encode("utf-8"))
        digest.update(b"\x1f")
    return int.from_bytes(digest.digest(), "big")


class TestStableSeed:
    @given(st.lists(st.one_of(st.integers(), st.text()), max_size=5))
    def test_matches_independent_construction(self, parts):
        assert stable_seed(*parts) == oracle_stable_seed(*parts)

    def test_part_boundaries_are_significant(self):
        # The separator stops adjacent parts from merging.
        assert stable_seed("ab", "c") != stable_seed("a", "bc")
        assert stable_seed("ab") != stable_seed("a", "b")

    def test_is_a_64_bit_value(self):
        value = stable_seed("within-g00", "within-d07", 0)
        assert 0 <= value < 2 ** 64

    def test_match_seed_composition(self):
        assert match_seed(9, "g", "d", 2) == stable_seed(9, "g", "d", 2)

    def test_match_rngs_are_independent_substreams(self):
        seed = match_seed(3, "g", "d", 0)
        fake, real, judge = match_rngs(seed)
        for stream, lane in ((fake, 0), (real, 1), (judge, 2)):
            expected = np.random.default_rng([seed, lane]).random(4)
            assert np.array_equal(stream.random(4), expected)


class TestPlayerSpec:
    def test_role_is_validated(self):
        with pytest.raises(ValueError, match="unknown role"):
            PlayerSpec("p", "referee")

    def test_kind_is_validated(self):
        with pytest.raises(ValueError, match="unknown player kind"):
            PlayerSpec("p", "generator", kind="neural")

    def test_win_rate_arithmetic(self):
        rec = MatchRecord("g", "d", n_fake=64, fake_wins=40, n_real=64,
                          real_wins=24, seed=0)
        assert rec.win_rate == 0.5


class TestSchedules:
    def test_round_robin_counts_and_order(self):
        schedule = round_robin(["g2", "g1"], ["d1"], repeats=2)
        assert schedule.kind == "round_robin"
        assert schedule.matches == (("g1", "d1", 0), ("g1", "d1", 1),
                                    ("g2", "d1", 0), ("g2", "d1", 1))

    def test_round_robin_accepts_specs(self):
        schedule = round_robin([spec("g", "generator")],
                               [spec("d", "discriminator")])
        assert schedule.matches == (("g", "d", 0),)

    @pytest.mark.parametrize("gens, discs, repeats", [
        ([], ["d"], 1),       # no generators
        (["g"], [], 1),       # no discriminators
        (["g"], ["d"], 0),    # zero repeats
    ])
    def test_round_robin_rejects_degenerate_inputs(self, gens, discs,
                                                   repeats):
        with pytest.raises(ValueError):
            round_robin(gens, discs, repeats=repeats)

    def test_band_keeps_nearby_iterations_only(self):
        gens = [spec(f"g{k}", "generator", k) for k in range(4)]
        discs = [spec(f"d{k}", "discriminator", k) for k in range(4)]
        schedule = band(gens, discs, width=1)
        pairs = {(g, d) for g, d, _ in schedule.matches}
        assert ("g0", "d0") in pairs and ("g0", "d1") in pairs
        assert ("g0", "d2") not in pairs
        assert schedule.kind == "band"
        assert schedule.band_width == 1
        assert len(schedule.matches) == 4 + 2 * 3  # diagonal plus neighbours

    def test_band_requires_iterations(self):
        gens = [spec("g", "generator", None)]
        discs = [spec("d", "discriminator", 0)]
        with pytest.raises(ValueError, match="has no iteration"):
            band(gens, discs, width=1)

    def test_band_rejects_empty_result(self):
        gens = [spec("g", "generator", 0)]
        discs = [spec("d", "discriminator", 10)]
        with pytest.raises(ValueError, match="band schedule is empty"):
            band(gens, discs, width=1)

    def test_band_rejects_negative_width(self):
        with pytest.raises(ValueError, match="width must be >= 0"):
            band([spec("g", "generator", 0)],
                 [spec("d", "discriminator", 0)], width=-1)

    def test_explicit_schedule_defaults_repeat_to_zero(self):
        schedule = explicit_schedule([("g1", "d1"), ("g2", "d1", 3)])
        assert schedule.matches == (("g1", "d1", 0), ("g2", "d1", 3))
        assert schedule.kind == "explicit"


class TestValidateSchedule:
    def population(self):
        return {
            "g1": spec("g1", "generator", 0),
            "g2": spec("g2", "generator", 1),
            "d1": spec("d1", "discriminator", 0),
            "d2": spec("d2", "discriminator", 1),
        }

    def test_clean_round_robin_is_ok(self):
        specs = self.population()
        diag = validate_schedule(round_robin(["g1", "g2"], ["d1", "d2"]),
                                 specs)
        assert diag.ok
        assert diag.components == 1
        assert diag.warnings == ()

    def test_unknown_id_is_an_error(self):
        diag = validate_schedule(explicit_schedule([("ghost", "d1")]),
                                 self.population())
        assert not diag.ok
        assert any("unknown player id 'ghost'" in e for e in diag.errors)

    def test_role_violation_is_an_error(self):
        diag = validate_schedule(explicit_schedule([("d1", "g1")]),
                                 self.population())
        assert any("scheduled as generator" in e for e in diag.errors)
        assert any("scheduled as discriminator" in e for e in diag.errors)

    def test_disconnected_components_only_warn(self):
        diag = validate_schedule(
            explicit_schedule([("g1", "d1"), ("g2", "d2")]),
            self.population())
        assert diag.ok
        assert diag.components == 2
        assert any("disconnected" in w for w in diag.warnings)

    def test_duplicate_errors_are_reported_once(self):
        diag = validate_schedule(
            explicit_schedule([("ghost", "d1"), ("ghost", "d2")]),
            self.population())
        assert diag.errors.count("unknown player id 'ghost'") == 1


class TestRunSettings:
    @pytest.mark.parametrize("kwargs, message", [
        ({"batch_size": 0}, "batch_size"),          # empty batches
        ({"threshold": 0.0}, "threshold"),          # boundary excluded
        ({"threshold": 1.0}, "threshold"),
        ({"on_error": "explode"}, "on_error"),      # unknown policy
    ])
    def test_validation(self, kwargs, message):
        with pytest.raises(ValueError, match=message):
            RunSettings(seed=1, **kwargs)


class TestPlayMatch:
    def play(self, generator, discriminator, data=None, **kwargs):
        defaults = dict(generator_id="g", discriminator_id="d",
                        tournament_seed=7, batch_size=8)
        defaults.update(kwargs)
        return play_match(generator, discriminator,
                          data if data is not None else FixedGenerator(1.0),
                          **defaults)

    def test_counts_follow_the_scores(self):
        # 3 fake samples score 0.9 (generator wins them) and the same 3
        # real samples score 0.9 (discriminator wins those).
        record = self.play(FixedGenerator(), StepDiscriminator(high=3))
        assert record.n_fake == record.n_real == 8
        assert record.fake_wins == 3
        assert record.real_wins == 5
        assert record.win_rate == 0.5

    def test_boundary_scores_favour_the_generator(self):
        class Exactly(StepDiscriminator):
            def judge(self, batch, rng=None):
                return np.full(len(batch), 0.5)

        record = self.play(FixedGenerator(), Exactly(0))
        assert record.fake_wins == 8 and record.real_wins == 8
        assert record.win_rate == 1.0

    def test_all_fake_verdict_gives_exactly_half(self):
        class AllFake(StepDiscriminator):
            def judge(self, batch, rng=None):
                return np.zeros(len(batch))

        record = self.play(FixedGenerator(), AllFake(0))
        assert record.fake_wins == 0 and record.real_wins == 8
        assert record.win_rate == 0.5

    def test_custom_threshold_changes_counting(self):
        record = self.play(FixedGenerator(), StepDiscriminator(high=8),
                           threshold=0.95)
        assert record.fake_wins == 0      # 0.9 < 0.95
        assert record.real_wins == 8      # 0.9 <= 0.95

    def test_record_carries_the_match_seed(self):
        record = self.play(FixedGenerator(), StepDiscriminator(2))
        assert record.seed == match_seed(7, "g", "d", 0)

    def test_identical_calls_are_bit_identical(self):
        first = self.play(FixedGenerator(), StepDiscriminator(2))
        second = self.play(FixedGenerator(), StepDiscriminator(2))
        assert first == second

    @pytest.mark.parametrize("bad_batch, message", [
        (np.zeros((3, 2)), "batch shape"),            # wrong count
        (np.zeros(8), "batch shape"),                 # wrong rank
        (np.full((8, 2), np.nan), "non-finite"),      # NaNs
    ])
    def test_bad_generator_batches_raise(self, bad_batch, message):
        class Bad:
            def sample(self, count, rng):
                return bad_batch

        with pytest.raises(MatchError, match=message):
            self.play(Bad(), StepDiscriminator(2))

    def test_dimension_mismatch_raises(self):
        with pytest.raises(MatchError, match="dim"):
            self.play(FixedGenerator(dim=3), StepDiscriminator(2),
                      data=FixedGenerator(dim=2))

    @pytest.mark.parametrize("scores, message", [
        (np.full(7, 0.5), "shape"),                   # short reply
        (np.full((8, 1), 0.5), "shape"),              # wrong rank
        (np.full(8, 1.5), "outside"),                 # above 1
        (np.full(8, -0.1), "outside"),                # below 0
        (np.full(8, np.inf), "non-finite"),
    ])
    def test_bad_scores_raise(self, scores, message):
        class Bad:
            def judge(self, batch, rng=None):
                return scores

        with pytest.raises(MatchError, match=message):
            self.play(FixedGenerator(), Bad())


class TestRunTournament:
    def players(self):
        return {"g1": FixedGenerator(), "g2": FixedGenerator(),
                "bad": BrokenPlayer(), "d1": StepDiscriminator(2)}

    def test_records_follow_schedule_order(self):
        schedule = round_robin(["g1", "g2"], ["d1"], repeats=2)
        records = run_tournament(schedule, self.players(), FixedGenerator(),
                                 RunSettings(seed=1, batch_size=4))
        assert [(r.generator_id, r.discriminator_id) for r in records] == \
            [("g1", "d1"), ("g1", "d1"), ("g2", "d1"), ("g2", "d1")]

    def test_sink_sees_every_record_in_order(self):
        schedule = round_robin(["g1", "g2"], ["d1"])
        seen = []
        records = run_tournament(schedule, self.players(), FixedGenerator(),
                                 RunSettings(seed=1, batch_size=4),
                                 sink=seen.append)
        assert seen == records

    def test_fatal_mode_propagates_failures(self):
        schedule = round_robin(["g1", "bad"], ["d1"])
        with pytest.raises(RuntimeError, match="deliberately broken"):
            run_tournament(schedule, self.players(), FixedGenerator(),
                           RunSettings(seed=1, batch_size=4))

    def test_skip_mode_drops_only_the_failing_matches(self, caplog):
        schedule = round_robin(["g1", "bad", "g2"], ["d1"])
        with caplog.at_level("WARNING"):
            records = run_tournament(
                schedule, self.players(), FixedGenerator(),
                RunSettings(seed=1, batch_size=4, on_error="skip"))
        assert sorted(r.generator_id for r in records) == ["g1", "g2"]
        assert any("skipping match bad vs d1" in m for m in
                   caplog.messages)

    def test_missing_player_is_fatal_or_skipped(self):
        schedule = explicit_schedule([("absent", "d1")])
        with pytest.raises(KeyError):
            run_tournament(schedule, self.players(), FixedGenerator(),
                           RunSettings(seed=1, batch_size=4))
        records = run_tournament(schedule, self.players(), FixedGenerator(),
                                 RunSettings(seed=1, batch_size=4,
                                             on_error="skip"))
        assert records == []


class TestSpacedCheckpoints:
    def test_short_runs_keep_every_iteration(self):
        assert spaced_checkpoints(5, 8) == [0, 1, 2, 3, 4]

    def test_endpoints_always_present(self):
        picks = spaced_checkpoints(1000, 10)
        assert picks[0] == 0
        assert picks[-1] == 999
        assert len(picks) == 10
        assert picks == sorted(set(picks))

    def test_early_iterations_sampled_densely(self):
        picks = spaced_checkpoints(1000, 10)
        early = sum(1 for p in picks if p < 500)
        assert early > len(picks) // 2

    def test_count_must_be_positive(self):
        with pytest.raises(ValueError, match="count"):
            spaced_checkpoints(10, 0)
