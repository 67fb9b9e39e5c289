"""planlens: corpus analytics for city climate-action plans.

Pipeline: document ingestion and lemmatization (corpus), tf-idf
featurization (featurizer), weighted L1-regularized logistic regression
(glm), repeated-split evaluation with LOOCV penalty selection and
chi-square term tests (evaluation), nine-topic lexicon counting and
embedding-driven lexicon expansion (topics), and a two-factor
principal-axis model with varimax rotation and quadrant scores (factors).
The cli module ties the stages together behind a config file.
"""

__version__ = "0.1.0"

from .errors import ConsistencyError, DegeneracyError, InputError, PlanlensError

__all__ = [
    "__version__",
    "PlanlensError",
    "InputError",
    "DegeneracyError",
    "ConsistencyError",
]
