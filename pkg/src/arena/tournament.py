"""Match scheduling and execution.

A match pits one generator against one discriminator: the discriminator
judges a fake batch and a fresh real batch, and each judged sample is a
binary game. Boundary scores go to the generator, so a discriminator that
answers exactly at the threshold concedes everything.

All randomness is derived from (tournament seed, generator id,
discriminator id, repeat index) through a stable 64-bit hash, so any match
can be replayed in isolation and schedule order never affects outcomes.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

ROLE_GENERATOR = "generator"
ROLE_DISCRIMINATOR = "discriminator"
ROLES = (ROLE_GENERATOR, ROLE_DISCRIMINATOR)

PLAYER_KINDS = ("toy_checkpoint", "real_data", "transform", "external",
                "custom")


class MatchError(RuntimeError):
    """A player misbehaved while a match was being played."""


@dataclass(frozen=True)
class PlayerSpec:
    """Identity and metadata of a tournament player."""

    id: str
    role: str
    kind: str = "custom"
    iteration: int | None = None
    experiment: str | None = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.kind not in PLAYER_KINDS:
            raise ValueError(f"unknown player kind {self.kind!r}")


@dataclass(frozen=True)
class MatchRecord:
    """Outcome of one match, counted from the generator's side."""

    generator_id: str
    discriminator_id: str
    n_fake: int
    fake_wins: int
    n_real: int
    real_wins: int
    seed: int
    threshold: float = 0.5

    @property
    def win_rate(self) -> float:
        """Fraction of judged samples the generator won."""
        return (self.fake_wins + self.real_wins) / (self.n_fake + self.n_real)


@dataclass(frozen=True)
class Schedule:
    """An ordered list of (generator_id, discriminator_id, repeat) matches."""

    matches: tuple[tuple[str, str, int], ...]
    kind: str = "explicit"
    band_width: int | None = None

    def __len__(self) -> int:
        return len(self.matches)


@dataclass(frozen=True)
class ScheduleDiagnostics:
    """Validation outcome: hard errors plus comparability warnings."""

    errors: tuple[str, ...]
    warnings: tuple[str, ...]
    components: int

    @property
    def ok(self) -> bool:
        return not self.errors


@dataclass(frozen=True)
class RunSettings:
    """Execution settings for a tournament run."""

    seed: int
    batch_size: int = 64
    threshold: float = 0.5
    on_error: str = "fatal"  # or "skip": failed matches are dropped

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be inside (0, 1)")
        if self.on_error not in ("fatal", "skip"):
            raise ValueError(f"on_error must be 'fatal' or 'skip', got "
                             f"{self.on_error!r}")


def _ids(players: Sequence) -> list[str]:
    return [p.id if isinstance(p, PlayerSpec) else str(p) for p in players]


def round_robin(generators: Sequence, discriminators: Sequence,
                repeats: int = 1) -> Schedule:
    """Every generator against every discriminator, ``repeats`` times each.

    Matches are ordered lexicographically by (generator, discriminator) and
    then by repeat index, so the schedule is deterministic.
    """
    gen_ids, disc_ids = _ids(generators), _ids(discriminators)
    if not gen_ids or not disc_ids:
        raise ValueError("round_robin needs at least one player per role")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    matches = tuple((g, d, r)
                    for g in sorted(gen_ids)
                    for d in sorted(disc_ids)
                    for r in range(repeats))
    return Schedule(matches=matches, kind="round_robin")


def band(generators: Sequence[PlayerSpec],
         discriminators: Sequence[PlayerSpec], width: int,
         repeats: int = 1) -> Schedule:
    """Round robin restricted to |iteration(G) - iteration(D)| <= width."""
    if width < 0:
        raise ValueError("band width must be >= 0")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    for spec in list(generators) + list(discriminators):
        if spec.iteration is None:
            raise ValueError(f"player {spec.id!r} has no iteration; banded "
                             "schedules need one for every player")
    pairs = []
    for gen in sorted(generators, key=lambda s: s.id):
        for disc in sorted(discriminators, key=lambda s: s.id):
            if abs(gen.iteration - disc.iteration) <= width:
                pairs.extend((gen.id, disc.id, r) for r in range(repeats))
    if not pairs:
        raise ValueError("band schedule is empty; widen the band")
    return Schedule(matches=tuple(pairs), kind="band", band_width=width)


def explicit_schedule(matches: Iterable[Sequence]) -> Schedule:
    """Schedule from explicit (generator_id, discriminator_id[, repeat])."""
    rows = []
    for entry in matches:
        if len(entry) == 2:
            g, d = entry
            r = 0
        else:
            g, d, r = entry
        rows.append((str(g), str(d), int(r)))
    return Schedule(matches=tuple(rows), kind="explicit")


def validate_schedule(schedule: Schedule,
                      specs: Mapping[str, PlayerSpec]) -> ScheduleDiagnostics:
    """Check a schedule against the player population.

    Unknown ids and role violations are errors. A match graph that splits
    into several connected components only warns: ratings across components
    are mutually incomparable but still well defined.
    """
    errors: list[str] = []
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for gen_id, disc_id, _ in schedule.matches:
        for pid, role in ((gen_id, ROLE_GENERATOR),
                          (disc_id, ROLE_DISCRIMINATOR)):
            spec = specs.get(pid)
            if spec is None:
                msg = f"unknown player id {pid!r}"
                if msg not in errors:
                    errors.append(msg)
                continue
            if spec.role != role:
                msg = (f"player {pid!r} has role {spec.role!r} but is "
                       f"scheduled as {role}")
                if msg not in errors:
                    errors.append(msg)
        for pid in (gen_id, disc_id):
            if pid in specs:
                parent.setdefault(pid, pid)
        if gen_id in parent and disc_id in parent:
            root_g, root_d = find(gen_id), find(disc_id)
            if root_g != root_d:
                parent[root_g] = root_d

    components = len({find(pid) for pid in parent}) if parent else 0
    warnings: list[str] = []
    if components > 1:
        warnings.append(f"match graph has {components} disconnected "
                        "components; ratings across components are not "
                        "comparable")
    return ScheduleDiagnostics(errors=tuple(errors), warnings=tuple(warnings),
                               components=components)


def stable_seed(*parts) -> int:
    """Deterministic 64-bit integer from the string forms of the parts."""
    digest = hashlib.blake2b(digest_size=8)
    for part in parts:
        digest.update(str(part).encode("utf-8"))
        digest.update(b"\x1f")
    return int.from_bytes(digest.digest(), "big")


def match_seed(tournament_seed: int, generator_id: str, discriminator_id: str,
               repeat: int) -> int:
    """Seed of one match's random substreams."""
    return stable_seed(tournament_seed, generator_id, discriminator_id,
                       repeat)


def match_rngs(seed: int) -> tuple[np.random.Generator, np.random.Generator,
                                   np.random.Generator]:
    """Independent substreams for the fake batch, real batch, and judging."""
    return (np.random.default_rng([seed, 0]),
            np.random.default_rng([seed, 1]),
            np.random.default_rng([seed, 2]))


def _check_batch(batch: np.ndarray, count: int, who: str) -> np.ndarray:
    batch = np.asarray(batch, dtype=float)
    if batch.ndim != 2 or batch.shape[0] != count:
        raise MatchError(f"{who} returned batch shape {batch.shape}, "
                         f"expected ({count}, dim)")
    if not np.isfinite(batch).all():
        raise MatchError(f"{who} returned non-finite samples")
    return batch


def _check_scores(scores: np.ndarray, count: int, who: str) -> np.ndarray:
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (count,):
        raise MatchError(f"{who} returned scores with shape {scores.shape}, "
                         f"expected ({count},)")
    if not np.isfinite(scores).all():
        raise MatchError(f"{who} returned non-finite scores")
    if scores.min() < 0.0 or scores.max() > 1.0:
        raise MatchError(f"{who} returned scores outside [0, 1]")
    return scores


def play_match(generator, discriminator, data, *, generator_id: str,
               discriminator_id: str, tournament_seed: int, repeat: int = 0,
               batch_size: int = 64, threshold: float = 0.5) -> MatchRecord:
    """Play one match and count per-sample wins for the generator.

    The discriminator judges ``batch_size`` fake samples and a fresh real
    batch of the same size. A fake sample scoring at or above the threshold
    and a real sample scoring at or below it are generator wins; ties on the
    boundary always favor the generator.
    """
    seed = match_seed(tournament_seed, generator_id, discriminator_id, repeat)
    fake_rng, real_rng, judge_rng = match_rngs(seed)

    fake = _check_batch(generator.sample(batch_size, fake_rng), batch_size,
                        f"generator {generator_id!r}")
    real = _check_batch(data.sample(batch_size, real_rng), batch_size,
                        "data source")
    if fake.shape[1] != real.shape[1]:
        raise MatchError(f"generator {generator_id!r} emits dim "
                         f"{fake.shape[1]}, data source dim {real.shape[1]}")

    who = f"discriminator {discriminator_id!r}"
    fake_scores = _check_scores(discriminator.judge(fake, judge_rng),
                                batch_size, who)
    real_scores = _check_scores(discriminator.judge(real, judge_rng),
                                batch_size, who)
    return MatchRecord(
        generator_id=generator_id,
        discriminator_id=discriminator_id,
        n_fake=batch_size,
        fake_wins=int(np.count_nonzero(fake_scores >= threshold)),
        n_real=batch_size,
        real_wins=int(np.count_nonzero(real_scores <= threshold)),
        seed=seed,
        threshold=threshold,
    )


def run_tournament(schedule: Schedule, players: Mapping[str, object], data,
                   settings: RunSettings,
                   sink: Callable[[MatchRecord], None] | None = None
                   ) -> list[MatchRecord]:
    """Play every scheduled match in order.

    ``players`` maps ids to objects with sample()/judge() methods; ``data``
    supplies real batches. Records are appended (and streamed to ``sink``)
    in schedule order. With on_error="skip" a failing match is logged and
    dropped instead of aborting the run.
    """
    records: list[MatchRecord] = []
    for gen_id, disc_id, repeat in schedule.matches:
        try:
            generator = players[gen_id]
            discriminator = players[disc_id]
            record = play_match(
                generator, discriminator, data,
                generator_id=gen_id, discriminator_id=disc_id,
                tournament_seed=settings.seed, repeat=repeat,
                batch_size=settings.batch_size, threshold=settings.threshold)
        except Exception as exc:
            if settings.on_error == "fatal":
                raise
            logger.warning("skipping match %s vs %s (repeat %d): %s",
                           gen_id, disc_id, repeat, exc)
            continue
        records.append(record)
        if sink is not None:
            sink(record)
    return records


def spaced_checkpoints(n_iterations: int, count: int) -> list[int]:
    """Pick ``count`` checkpoint indices with denser early coverage.

    Convenience for subsampling long runs: geometric spacing biased toward
    early iterations, always including the first and last index.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if count >= n_iterations:
        return list(range(n_iterations))
    raw = np.geomspace(1.0, float(n_iterations), num=count)
    picked = sorted({min(n_iterations - 1, int(round(x)) - 1) for x in raw})
    cursor = 0
    while len(picked) < count:
        if cursor not in picked:
            picked.append(cursor)
            picked.sort()
        cursor += 1
    return picked
