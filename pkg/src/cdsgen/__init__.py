"""Age-conditioned generation and statistical analysis of child-directed
speech transcripts."""

__version__ = "0.1.0"
