"""Exclusive hierarchical decoding for keyphrase generation.

A desk-scale, dependency-light implementation: attentional BiGRU encoder,
two-level phrase/word decoder with copy mechanism and attention rescaling,
soft (training-time) and hard (inference-time) first-word exclusion, plus
the evaluation harness (F1@M, F1@5, DupRatio).
"""

__version__ = "0.1.0"
