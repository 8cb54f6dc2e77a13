"""voxmine: build language-labeled speech corpora from web sources.

Pipeline stages: dump ingestion -> search-phrase mining -> video retrieval ->
speech segmentation -> embeddings -> robust label filtering -> train/eval
assembly, plus a crowd-validation HTTP service and evaluation metrics.
"""

__version__ = "0.1.0"
