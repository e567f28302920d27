"""Execution backends referenced by compiled task specs."""
from .clustering import clustering_run
from .dimreduction import dimreduction_run
from .embedding import embedding_run, hashed_embeddings
from .segmentation import segmentation_run
from .transform import transform_run

__all__ = ["clustering_run", "dimreduction_run", "embedding_run",
           "hashed_embeddings", "segmentation_run", "transform_run"]
