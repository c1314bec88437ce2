"""Reading validation, deduplicating storage and the HTTP service core."""

from .service import IngestResult, IngestService, IngestStats
from .store import ReadingStore, StoredReading
from .validate import Rejected, validate_reading

__all__ = [
    "IngestResult",
    "IngestService",
    "IngestStats",
    "ReadingStore",
    "StoredReading",
    "Rejected",
    "validate_reading",
]
