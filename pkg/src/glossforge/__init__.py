"""Toolkit for growing a small sentence-gloss corpus.

Three augmentation routes (tense rules, masked-token substitution,
retrieval-grounded generation), plus dual-rater agreement statistics and
corpus-level BLEU for checking the result.
"""

__version__ = "0.1.0"


class GlossforgeError(Exception):
    """Base class for all errors raised by this package."""
