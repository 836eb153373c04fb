"""Emotion recognition toolkit for code-mixed dyadic call-center conversations.

Covers the full desk-scale pipeline: corpus modeling and manifests, word-level
VAD lexicon features, pluggable speech/text feature providers with an on-disk
cache, a from-scratch BiLSTM classifier with analytic gradients, an evaluation
and ablation harness, and an annotation backend.
"""

__version__ = "0.1.0"
