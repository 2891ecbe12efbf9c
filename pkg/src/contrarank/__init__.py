"""contrarank: learning-to-rank for question-answer pairs.

Provides dataset ingestion, a small differentiable relevance scorer with
exact analytic gradients, pointwise/pairwise/contrastive training
objectives, generation-based data augmentation with pluggable backends,
and oracle-checked IR evaluation metrics (MAP / MRR / P@k / nDCG@k).
"""

__version__ = "0.1.0"
