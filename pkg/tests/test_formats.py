"""Tests for corpus file formats."""

import json

import pytest

from folkgather.errors import InputError
from folkgather.formats import get_format, guess_format
from folkgather.formats.json_array import JsonArrayFormat
from folkgather.formats.jsonl import JsonLinesFormat
from tests.conftest import africa_records


class TestGetFormat:

    def test_known_names(self):
        assert isinstance(get_format('json'), JsonArrayFormat)
        assert isinstance(get_format('jsonl'), JsonLinesFormat)

    def test_unknown_name(self):
        with pytest.raises(InputError, match="Unsupported corpus format"):
            get_format('xml')

    def test_guess_from_suffix(self):
        assert guess_format('data/corpus.JSONL') == 'jsonl'
        assert guess_format('data/corpus.json') == 'json'


class TestJsonArray:

    def test_read_written_corpus(self, tmp_path):
        path = get_format('json').write_records(africa_records(), tmp_path / 'c.json')
        corpus = get_format('json').read(path)
        assert corpus.summary() == {'users': 5, 'saplings': 5, 'nodes': 15}

    def test_empty_file_is_empty_corpus(self, tmp_path):
        path = tmp_path / 'empty.json'
        path.write_text('', encoding='utf-8')
        assert get_format('json').read(path).summary()['users'] == 0

    def test_single_object_accepted(self, tmp_path):
        path = tmp_path / 'one.json'
        path.write_text(json.dumps(africa_records()[0]), encoding='utf-8')
        assert get_format('json').read(path).summary()['saplings'] == 1

    def test_invalid_json_reports_line(self, tmp_path):
        path = tmp_path / 'bad.json'
        path.write_text('[\n{"user_id": }\n]', encoding='utf-8')
        with pytest.raises(InputError, match="line 2"):
            get_format('json').read(path)

    def test_error_locator_names_record(self, tmp_path):
        path = tmp_path / 'bad.json'
        path.write_text(json.dumps([africa_records()[0], {'saplings': []}]), encoding='utf-8')
        with pytest.raises(InputError, match="record 2"):
            get_format('json').read(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            get_format('json').read(tmp_path / 'absent.json')

    def test_undecodable_bytes(self, tmp_path):
        path = tmp_path / 'c.json'
        path.write_bytes(b'[{"user_id": "\xff\xfe"}]')
        with pytest.raises(InputError, match="UTF-8"):
            get_format('json').read(path)


class TestJsonLines:

    def test_read_written_corpus(self, tmp_path):
        path = get_format('jsonl').write_records(africa_records(), tmp_path / 'c.jsonl')
        assert len(path.read_text(encoding='utf-8').splitlines()) == 5
        corpus = get_format('jsonl').read(path)
        assert corpus.summary()['nodes'] == 15

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / 'c.jsonl'
        path.write_text('\n' + json.dumps(africa_records()[1]) + '\n\n', encoding='utf-8')
        assert get_format('jsonl').read(path).summary()['users'] == 1

    def test_error_locator_names_line(self, tmp_path):
        path = tmp_path / 'c.jsonl'
        path.write_text(json.dumps(africa_records()[1]) + '\nnot json\n', encoding='utf-8')
        with pytest.raises(InputError, match="line 2"):
            get_format('jsonl').read(path)

    def test_undecodable_bytes(self, tmp_path):
        path = tmp_path / 'c.jsonl'
        path.write_bytes(json.dumps(africa_records()[1]).encode('utf-8') + b'\n\xc3\x28\n')
        with pytest.raises(InputError, match="UTF-8"):
            get_format('jsonl').read(path)
