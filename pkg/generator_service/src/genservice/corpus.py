"""Fine-tuning corpus files: two TAB-separated columns per line, the source
text ending with the separator token, then the target text."""

from __future__ import annotations

from dataclasses import dataclass

SEPARATOR = "[SEP]"
SOURCE_SUFFIX = " " + SEPARATOR


class CorpusError(ValueError):
    """Malformed corpus; carries the 1-based line number."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


@dataclass(frozen=True)
class CorpusRecord:
    source: str  # ends with " [SEP]"
    target: str


def parse_corpus(lines) -> list[CorpusRecord]:
    records: list[CorpusRecord] = []
    for line_no, line in enumerate(lines, start=1):
        line = line.rstrip("\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 2:
            raise CorpusError(line_no, f"expected 2 TAB-separated fields, got {len(fields)}")
        source, target = fields
        if not source.endswith(SOURCE_SUFFIX):
            raise CorpusError(line_no, f"source does not end with {SOURCE_SUFFIX!r}")
        if len(source) == len(SOURCE_SUFFIX):
            raise CorpusError(line_no, "source is empty apart from the separator")
        if not target.strip():
            raise CorpusError(line_no, "empty target")
        records.append(CorpusRecord(source=source, target=target))
    if not records:
        raise CorpusError(0, "corpus contains no records")
    return records


def read_corpus(path: str) -> list[CorpusRecord]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_corpus(fh)
    except OSError as exc:
        raise CorpusError(0, f"cannot read corpus {path!r}: {exc}") from exc
