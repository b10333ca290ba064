"""CSV / record ingestion into contingency vectors."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import Attribute, AttributeSchema, ContingencyVector


class IngestError(ValueError):
    pass


def load_schema(path: str | Path) -> AttributeSchema:
    """Read a JSON schema file.

    Expected layout::

        {"attributes": [{"name": "A", "cardinality": 2, "values": ["0", "1"]}, ...]}

    ``values`` is optional and pins the value -> code order.
    """
    try:
        doc = json.loads(Path(path).read_text())
        attrs = []
        for entry in doc["attributes"]:
            values = entry.get("values")
            card = int(entry.get("cardinality", len(values) if values else 0))
            attrs.append(Attribute(str(entry["name"]), card,
                                   tuple(str(v) for v in values) if values is not None else None))
        return AttributeSchema(tuple(attrs))
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise IngestError(f"cannot parse schema {path}: {exc}") from exc


class Encoder:
    """Dictionary-encodes categorical values.

    Pinned values keep their declared order; other attributes get codes in
    order of first appearance. Integers are taken as codes as-is.
    """

    def __init__(self, schema: AttributeSchema):
        self.schema = schema
        self.maps: list[dict[str, int]] = [
            {v: i for i, v in enumerate(a.values)} if a.values is not None else {}
            for a in schema.attributes
        ]

    def encode_value(self, j: int, value) -> int:
        attr = self.schema.attributes[j]
        if value is None or (isinstance(value, str) and value.strip() == ""):
            raise IngestError(f"missing value for attribute {attr.name!r}")
        if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
            code = int(value)
        else:
            key = str(value).strip()
            table = self.maps[j]
            code = table.get(key)
            if code is None:
                if attr.values is not None:
                    raise IngestError(f"value {key!r} not among pinned values of {attr.name!r}")
                code = table[key] = len(table)
        if not 0 <= code < attr.cardinality:
            raise IngestError(f"value {value!r} out of range for {attr.name!r} "
                              f"(cardinality {attr.cardinality})")
        return code

    def encode(self, row: Sequence) -> list[int]:
        if len(row) != len(self.schema.attributes):
            raise IngestError(f"record has {len(row)} fields, schema has {len(self.schema.attributes)}")
        return [self.encode_value(j, v) for j, v in enumerate(row)]

    def dictionary(self) -> dict[str, dict[str, int]]:
        return {a.name: dict(m) for a, m in zip(self.schema.attributes, self.maps)}


def build_contingency(schema: AttributeSchema, records: Iterable[Sequence],
                      encoder: Encoder | None = None) -> ContingencyVector:
    enc = encoder or Encoder(schema)
    cells = np.zeros(1 << schema.d)
    for row in records:
        cells[schema.cell_index(enc.encode(row))] += 1
    return ContingencyVector(cells)


def read_csv(path: str | Path, schema: AttributeSchema) -> list[list[str]]:
    """Rows of the schema's columns, in schema order; errors carry file/line context."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return []
        missing = [n for n in schema.names if n not in reader.fieldnames]
        if missing:
            raise IngestError(f"{path}: missing columns {missing}")
        return [[r[n] for n in schema.names] for r in reader]


def ingest_csv(path: str | Path, schema: AttributeSchema) -> tuple[ContingencyVector, Encoder]:
    enc = Encoder(schema)
    cells = np.zeros(1 << schema.d)
    for lineno, row in enumerate(read_csv(path, schema), 2):
        try:
            cells[schema.cell_index(enc.encode(row))] += 1
        except IngestError as exc:
            raise IngestError(f"{path}:{lineno}: {exc}") from exc
    return ContingencyVector(cells), enc


def write_dictionary(path: str | Path, enc: Encoder) -> None:
    Path(path).write_text(json.dumps(enc.dictionary(), indent=2, sort_keys=False) + "\n")
