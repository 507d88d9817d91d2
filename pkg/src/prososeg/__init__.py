"""Sentence and topic segmentation of time-aligned speech from prosodic and lexical cues."""

__version__ = "0.1.0"
