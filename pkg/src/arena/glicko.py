"""Glicko2 skill ratings for bipartite tournaments.

Implements the update procedure from http://www.glicko.net/glicko/glicko2.pdf
with two extensions used by the tournament engine:

* game results carry a weight so that large blocks of identical per-sample
  outcomes (same opponent, same score) aggregate exactly, and
* a whole match set is treated as one rating period and updates are iterated
  to a fixed point, since tournament matches have no temporal order.

Idle players are returned unchanged by default: deviation inflation between
rating periods is disabled because a static tournament has no notion of
elapsed time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

# Fixed conversion between the public scale (1500-anchored) and the internal
# mu/phi scale. The anchor stays at 1500 even when players start elsewhere.
GLICKO2_SCALE = 173.7178

_DEFAULT_RATING = 1500.0
_DEFAULT_DEVIATION = 350.0
_DEFAULT_VOLATILITY = 0.06


class ConvergenceError(RuntimeError):
    """The volatility root-finder did not terminate within its iteration cap."""


# Below this much accumulated Fisher information (sum of w * g^2 * E(1-E))
# every expected score is saturated to float precision and the games cannot
# move the player; the update degenerates, so it is skipped instead.
_MIN_INFORMATION = 1e-9


@dataclass(frozen=True)
class Rating:
    """Public-scale player state: rating, rating deviation, volatility."""

    rating: float = _DEFAULT_RATING
    deviation: float = _DEFAULT_DEVIATION
    volatility: float = _DEFAULT_VOLATILITY


@dataclass(frozen=True)
class GameResult:
    """One game against ``opponent`` with score in [0, 1] for this player.

    ``weight`` counts identical outcomes; the Glicko2 accumulators are linear
    over games, so a weight of n is exactly n repetitions of the same game.
    """

    opponent: Rating
    score: float
    weight: float = 1.0


@dataclass(frozen=True)
class RatingConfig:
    """Knobs for the rating engine.

    tau bounds how fast volatility can move, convergence_eps terminates the
    volatility root-finder, and pass_tolerance/max_passes control the outer
    fixed-point iteration over the whole match set. damping scales how far a
    player's rating moves toward its fresh estimate each pass; 0.5 suppresses
    the two-cycle oscillation the undamped iteration develops on strongly
    bipartite match graphs. outcome_mode selects how a match record expands
    into games: one game per judged sample ("per-sample") or a single
    fractional game per match ("per-match").
    """

    tau: float = 0.5
    default_rating: float = _DEFAULT_RATING
    default_deviation: float = _DEFAULT_DEVIATION
    default_volatility: float = _DEFAULT_VOLATILITY
    convergence_eps: float = 1e-6
    max_passes: int = 64
    pass_tolerance: float = 0.01
    damping: float = 0.5
    idle_inflation: bool = False
    outcome_mode: str = "per-sample"

    def default(self) -> Rating:
        return Rating(self.default_rating, self.default_deviation,
                      self.default_volatility)


@dataclass(frozen=True)
class RatingOutcome:
    """Result of rating a match set: converged ratings plus diagnostics."""

    ratings: dict[str, Rating]
    passes: int
    converged: bool
    warnings: tuple[str, ...] = ()


def to_internal(rating: Rating) -> tuple[float, float]:
    """Convert public (rating, deviation) to internal (mu, phi)."""
    return ((rating.rating - _DEFAULT_RATING) / GLICKO2_SCALE,
            rating.deviation / GLICKO2_SCALE)


def from_internal(mu: float, phi: float, volatility: float) -> Rating:
    """Convert internal (mu, phi) back to a public-scale Rating."""
    return Rating(mu * GLICKO2_SCALE + _DEFAULT_RATING,
                  phi * GLICKO2_SCALE, volatility)


def g(phi: float) -> float:
    """Impact damping for an opponent with internal deviation phi."""
    return 1.0 / math.sqrt(1.0 + 3.0 * phi * phi / (math.pi * math.pi))


def expected_score(mu: float, mu_j: float, phi_j: float) -> float:
    """Expected score of mu against an opponent at (mu_j, phi_j)."""
    x = g(phi_j) * (mu - mu_j)
    # Saturating logistic: exp() only ever sees non-positive arguments.
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    ex = math.exp(x)
    return ex / (1.0 + ex)


def update_volatility(sigma: float, delta: float, phi: float, v: float,
                      tau: float, eps: float = 1e-6,
                      max_iterations: int = 1000) -> float:
    """Solve for the new volatility.

    Finds the root of the volatility objective with the Illinois-modified
    regula falsi, expanding the lower bracket when the improvement delta is
    small. Raises ConvergenceError if the iteration cap is exceeded.
    """
    a = math.log(sigma * sigma)
    phi2 = phi * phi
    delta2 = delta * delta

    def f(x: float) -> float:
        ex = math.exp(x)
        if ex > 1e150:
            # Same expression with numerator and denominator divided by
            # ex^2, which avoids overflow when the bracket is enormous.
            ratio = (((delta2 - phi2 - v) / ex - 1.0)
                     / (2.0 * (1.0 + (phi2 + v) / ex) ** 2))
        else:
            num = ex * (delta2 - phi2 - v - ex)
            den = 2.0 * (phi2 + v + ex) ** 2
            ratio = num / den
        return ratio - (x - a) / (tau * tau)

    if delta2 > phi2 + v:
        lo, hi = a, math.log(delta2 - phi2 - v)
    else:
        k = 1
        while f(a - k * tau) < 0.0:
            k += 1
            if k > max_iterations:
                raise ConvergenceError("volatility bracket expansion exceeded "
                                       f"{max_iterations} steps")
        lo, hi = a, a - k * tau

    f_lo, f_hi = f(lo), f(hi)
    iterations = 0
    while abs(hi - lo) > eps:
        iterations += 1
        if iterations > max_iterations:
            raise ConvergenceError(f"volatility solve exceeded {max_iterations} "
                                   "iterations")
        mid = lo + (lo - hi) * f_lo / (f_hi - f_lo)
        f_mid = f(mid)
        if f_mid == 0.0:
            # Exact root; the sign test below could never move the bracket.
            lo = mid
            break
        if f_mid * f_hi < 0.0:
            lo, f_lo = hi, f_hi
        else:
            f_lo /= 2.0
        hi, f_hi = mid, f_mid
    return math.exp(lo / 2.0)


def _apply_period(rating: Rating, mu_eval: float,
                  games: Sequence[GameResult], cfg: RatingConfig) -> Rating:
    """One rating period anchored at ``rating`` with E evaluated at mu_eval.

    The classic update evaluates expected scores at the player's own prior
    (mu_eval == prior mu). The tournament fixed point instead evaluates them
    at the player's current estimate, which makes the converged ratings solve
    the penalized-likelihood equation the one-step update linearizes.
    """
    mu, phi = to_internal(rating)
    v_inv = 0.0
    delta_sum = 0.0
    for game in games:
        mu_j, phi_j = to_internal(game.opponent)
        g_j = g(phi_j)
        e_j = expected_score(mu_eval, mu_j, phi_j)
        v_inv += game.weight * g_j * g_j * e_j * (1.0 - e_j)
        delta_sum += game.weight * g_j * (game.score - e_j)
    if v_inv <= _MIN_INFORMATION:
        # Every expected score is saturated; the games carry no usable
        # information about this player.
        return rating

    v = 1.0 / v_inv
    delta = v * delta_sum
    sigma_new = update_volatility(rating.volatility, delta, phi, v,
                                  cfg.tau, cfg.convergence_eps)
    phi_star = math.sqrt(phi * phi + sigma_new * sigma_new)
    # Uncertainty never grows past the uninformed prior (or the player's own
    # starting deviation if that was larger); this keeps degenerate one-sided
    # match sets from blowing up the deviation through volatility feedback.
    phi_cap = max(phi, cfg.default_deviation / GLICKO2_SCALE)
    phi_star = min(phi_star, phi_cap)
    phi_new = 1.0 / math.sqrt(1.0 / (phi_star * phi_star) + v_inv)
    mu_new = mu + phi_new * phi_new * delta_sum
    return from_internal(mu_new, phi_new, sigma_new)


def update_player(rating: Rating, games: Sequence[GameResult],
                  config: RatingConfig | None = None) -> Rating:
    """Apply one rating period to a player.

    With no games the player is returned unchanged unless idle inflation is
    enabled, in which case only the deviation grows.
    """
    cfg = config or RatingConfig()
    if not games:
        if not cfg.idle_inflation:
            return rating
        mu, phi = to_internal(rating)
        phi_star = math.sqrt(phi * phi + rating.volatility ** 2)
        return from_internal(mu, phi_star, rating.volatility)
    return _apply_period(rating, to_internal(rating)[0], games, cfg)


def _expand_record(record, mode: str):
    """Yield (side, opponent_id, score, weight) games for one match record.

    side 0 is the generator, side 1 the discriminator; per-sample scores are
    complementary between the two.
    """
    total = record.n_fake + record.n_real
    if total <= 0:
        return
    wins = record.fake_wins + record.real_wins
    if mode == "per-sample":
        losses = total - wins
        if wins:
            yield 0, record.discriminator_id, 1.0, float(wins)
            yield 1, record.generator_id, 0.0, float(wins)
        if losses:
            yield 0, record.discriminator_id, 0.0, float(losses)
            yield 1, record.generator_id, 1.0, float(losses)
    elif mode == "per-match":
        s = wins / total
        yield 0, record.discriminator_id, s, 1.0
        yield 1, record.generator_id, 1.0 - s, 1.0
    else:
        raise ValueError(f"unknown outcome mode: {mode!r}")


def rate_tournament(records: Iterable, config: RatingConfig | None = None,
                    players: Iterable[str] | Mapping[str, Rating] | None = None,
                    ) -> RatingOutcome:
    """Rate a full match set by fixed-point iteration.

    The whole match set forms a single rating period. Each pass re-rates
    every player from their prior against a snapshot of the opponents'
    ratings from the start of the pass, so the result is independent of
    player order and each game is counted exactly once no matter how many
    passes run. Convergence means the largest public-rating change in a
    pass fell below pass_tolerance.

    ``players`` optionally fixes the player universe: ids seen in records
    must belong to it, and listed players without matches keep their prior.
    Passing a mapping of id -> Rating supplies per-player priors (for
    example carried over from an earlier tournament).
    """
    cfg = config or RatingConfig()
    records = list(records)
    priors: dict[str, Rating] = {}
    if isinstance(players, Mapping):
        priors = dict(players)
        known = set(priors)
    else:
        known = set(players) if players is not None else None

    games_by_player: dict[str, list[tuple[str, float, float]]] = {}
    if known is not None:
        games_by_player = {pid: [] for pid in known}
    for record in records:
        for pid, opp in ((record.generator_id, record.discriminator_id),
                         (record.discriminator_id, record.generator_id)):
            if known is not None and pid not in known:
                raise ValueError(f"match record references unknown player "
                                 f"{pid!r}")
        games_by_player.setdefault(record.generator_id, [])
        games_by_player.setdefault(record.discriminator_id, [])
    for record in records:
        for side, opp_id, score, weight in _expand_record(record,
                                                          cfg.outcome_mode):
            pid = record.generator_id if side == 0 else record.discriminator_id
            games_by_player[pid].append((opp_id, score, weight))

    warnings: list[str] = []
    if not records:
        warnings.append("empty record set; all players rated at defaults")

    ids = sorted(games_by_player)
    start = {pid: priors.get(pid, cfg.default()) for pid in ids}
    ratings = dict(start)
    passes = 0
    converged = not records
    while passes < cfg.max_passes and not converged:
        passes += 1
        snapshot = ratings
        updated: dict[str, Rating] = {}
        for pid in ids:
            games = [GameResult(snapshot[opp_id], score, weight)
                     for opp_id, score, weight in games_by_player[pid]]
            mu_eval = to_internal(snapshot[pid])[0]
            fresh = _apply_period(start[pid], mu_eval, games, cfg)
            if fresh is start[pid]:
                # Degenerate pass (no games, or all expected scores
                # saturated): hold the current estimate instead of snapping
                # back to the prior.
                updated[pid] = snapshot[pid]
                continue
            blended = (snapshot[pid].rating
                       + cfg.damping * (fresh.rating - snapshot[pid].rating))
            updated[pid] = Rating(blended, fresh.deviation, fresh.volatility)
        shift = max((abs(updated[pid].rating - snapshot[pid].rating)
                     for pid in ids), default=0.0)
        ratings = updated
        if shift < cfg.pass_tolerance:
            converged = True
    if not converged:
        warnings.append(f"ratings did not converge within {cfg.max_passes} "
                        "passes")
    return RatingOutcome(ratings=ratings, passes=passes, converged=converged,
                         warnings=tuple(warnings))
