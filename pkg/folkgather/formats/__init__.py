"""Corpus file formats."""

from folkgather.errors import InputError

FORMAT_NAMES = ('json', 'jsonl')


def get_format(name='json'):
    """Return the reader implementation for a corpus format name."""
    if name == 'json':
        from folkgather.formats.json_array import JsonArrayFormat
        return JsonArrayFormat()
    elif name == 'jsonl':
        from folkgather.formats.jsonl import JsonLinesFormat
        return JsonLinesFormat()
    else:
        raise InputError(f"Unsupported corpus format: {name}")


def guess_format(path):
    """Pick a format from the file suffix (.jsonl -> jsonl, anything else -> json)."""
    return 'jsonl' if str(path).lower().endswith('.jsonl') else 'json'
