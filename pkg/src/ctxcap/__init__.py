"""Contextual video captioning: S2VT encoder-decoder with a pointer-generator
that copies words from an accompanying text."""

__version__ = "0.1.0"
