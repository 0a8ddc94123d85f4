"""JSON Lines corpus format: one user object per line."""

import json

from folkgather.errors import InputError
from folkgather.formats.base import CorpusFormat


class JsonLinesFormat(CorpusFormat):

    name = 'jsonl'

    def iter_records(self, path):
        try:
            f = open(path, 'r', encoding='utf-8')
        except OSError as e:
            raise InputError(f"{path}: cannot read corpus ({e.strerror})")
        with f:
            try:
                for lineno, line in enumerate(f, start=1):
                    if not line.strip():
                        continue
                    try:
                        record = json.loads(line)
                    except json.JSONDecodeError as e:
                        raise InputError(f"{path}: line {lineno}: invalid JSON ({e.msg})")
                    yield f"line {lineno}", record
            except UnicodeDecodeError as e:
                raise InputError(f"{path}: corpus is not valid UTF-8 ({e.reason})")

    def write_records(self, records, path):
        with open(path, 'w', encoding='utf-8') as f:
            for record in records:
                f.write(json.dumps(record, sort_keys=True))
                f.write('\n')
        return path
