from .extract import FeatureSequence, extract_features, sampled_sequence
from .store import FeatureStore, FeatureStoreError, FeatureStoreWriter

__all__ = [
    "FeatureSequence",
    "FeatureStore",
    "FeatureStoreError",
    "FeatureStoreWriter",
    "extract_features",
    "sampled_sequence",
]
