"""Replay-and-relay workbench for multimodal real-time support agents."""

__version__ = "0.1.0"
