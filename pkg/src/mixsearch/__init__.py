"""Mixed-modality retrieval engine with gap calibration and evaluation."""

from .core import Corpus, Document, Modality, Qrels, Query, Role

__version__ = "0.1.0"

__all__ = ["Corpus", "Document", "Modality", "Qrels", "Query", "Role", "__version__"]
