"""Whole-file JSON array corpus format."""

import json

from folkgather.errors import InputError
from folkgather.formats.base import CorpusFormat


class JsonArrayFormat(CorpusFormat):
    """A single JSON array of user objects. An empty file is an empty corpus."""

    name = 'json'

    def iter_records(self, path):
        try:
            with open(path, 'r', encoding='utf-8') as f:
                text = f.read()
        except OSError as e:
            raise InputError(f"{path}: cannot read corpus ({e.strerror})")
        except UnicodeDecodeError as e:
            raise InputError(f"{path}: corpus is not valid UTF-8 ({e.reason})")
        if not text.strip():
            return
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise InputError(f"{path}: line {e.lineno}: invalid JSON ({e.msg})")
        if isinstance(data, dict):
            data = [data]
        if not isinstance(data, list):
            raise InputError(f"{path}: top level must be a list of user objects")
        for index, record in enumerate(data, start=1):
            yield f"record {index}", record

    def write_records(self, records, path):
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(list(records), f, indent=2, sort_keys=True)
            f.write('\n')
        return path
