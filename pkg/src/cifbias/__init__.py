"""Contextual hotword biasing for a toy integrate-and-fire recognizer.

Subpackages follow the pipeline: numerics (autodiff tape), corpus
(synthetic language), asr (recognizer + integrate-and-fire), codebook
(confidence-weighted embedding tables), bias (hotword module), infer
(collaborative decoding), harness (metrics, experiments, CLI).
"""

__version__ = "0.1.0"
