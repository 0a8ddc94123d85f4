"""Abstract base class for corpus readers and writers."""

import logging
from abc import ABC, abstractmethod

from folkgather.model import CorpusBuilder

logger = logging.getLogger(__name__)


class CorpusFormat(ABC):
    """Abstract interface for reading and writing sapling corpora."""

    name = None

    @abstractmethod
    def iter_records(self, path):
        """Yield (locator, record) pairs parsed from the file."""
        pass

    @abstractmethod
    def write_records(self, records, path):
        """Write user records (dicts in the corpus schema) to path."""
        pass

    def read(self, path):
        """Parse, validate and normalize a corpus file into a Corpus."""
        builder = CorpusBuilder()
        for locator, record in self.iter_records(path):
            builder.add_record(record, f"{path}: {locator}")
        corpus = builder.build()
        s = corpus.summary()
        logger.info(f"Ingested {path}: {s['users']} user(s), "
                    f"{s['saplings']} sapling(s), {s['nodes']} node(s)")
        return corpus
