"""GAP ratings, ordinal outcome forecasts and betting backtests for football matches."""

__version__ = "0.1.0"
