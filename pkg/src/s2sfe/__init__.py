"""Sequence-to-sequence TTS frontend: BPE, a small transformer, chunk splicing and MT metrics."""

__version__ = "0.1.0"
