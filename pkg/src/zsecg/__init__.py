"""Personalized zero-shot ECG arrhythmia detection."""

__version__ = "0.1.0"
