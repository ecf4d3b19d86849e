"""Toolkit for decoding code-modulated visual evoked potentials.

Subpackages and modules cover the full path from stimulus codes to
cross-validated accuracy tables: binary m-sequence handling (:mod:`~cvepkit.codes`),
synthetic EEG generation (:mod:`~cvepkit.synth`), signal conditioning
(:mod:`~cvepkit.preprocess`), correlation/CCA features (:mod:`~cvepkit.features`),
Bayesian LDA (:mod:`~cvepkit.blda`), a small CNN stack (:mod:`~cvepkit.nn`),
transport-based output decoding (:mod:`~cvepkit.decode`, :mod:`~cvepkit.simplex`),
session-level evaluation (:mod:`~cvepkit.pipeline`), rank statistics
(:mod:`~cvepkit.stats`) and file/CLI plumbing (:mod:`~cvepkit.io`,
:mod:`~cvepkit.cli`, :mod:`~cvepkit.plots`).
"""

__version__ = "0.1.0"
