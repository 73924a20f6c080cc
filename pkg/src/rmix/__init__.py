"""Risk-sensitive cooperative multi-agent value learning with per-agent
CVaR policies over learned return distributions."""

__version__ = "0.1.0"
