"""Bundled model artifacts."""

from pathlib import Path

_HERE = Path(__file__).resolve().parent


def default_lstm_path() -> Path:
    """Path of the bundled desk-scale LSTM weights."""
    return _HERE / "lstm_default.json"
