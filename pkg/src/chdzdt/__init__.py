"""chdzdt: character-level word encoder for Algerian dialect text.

Subpackages cover the full pipeline: corpus normalization into a labeled
lexicon, joint masked-character + language-label pre-training of a small
transformer word encoder, and an intrinsic/downstream evaluation battery.
"""

__version__ = "0.1.0"
