"""featurescope: project contextual word embeddings into semantic feature-norm spaces.

Subpackages cover the full pipeline: norm-space loading (``norms``),
embedding persistence and aggregation (``store``), MLP projection training
(``mlp``), hyperparameter search (``hpo``), the dative-alternation case
study (``dative``), and the CLI / HTTP service (``cli``, ``service``).
"""

__version__ = "0.1.0"
