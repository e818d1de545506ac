"""Distinguishability tournaments and skill ratings for generative models.

Generators and discriminators play per-sample judging games; match outcomes
feed a Glicko2 rating engine, and an analytic Gaussian toy domain provides
players with known ground truth.
"""

__version__ = "0.1.0"

from arena.glicko import (GameResult, Rating, RatingConfig, RatingOutcome,
                          rate_tournament, update_player)

__all__ = [
    "GameResult",
    "Rating",
    "RatingConfig",
    "RatingOutcome",
    "rate_tournament",
    "update_player",
    "__version__",
]
