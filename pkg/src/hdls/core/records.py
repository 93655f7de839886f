import json
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Union

import numpy as np

from hdls.core.file import File

SCHEMA_VERSION = 1


def _to_jsonable(value: Any) -> Any:
    """Converts numpy scalars/arrays (and non-finite floats) to JSON values."""
    if isinstance(value, dict):
        return {str(k): _to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_to_jsonable(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class RecordFile(File):
    """
    Line-delimited JSON file of schema-versioned records.

    Parameters
    ----------
    path:
        Path to the `.jsonl` file. It does not have to exist yet.
    """

    extensions = (".jsonl",)

    def __init__(self, path: Union[str, Path]):
        super().__init__(path, must_exist=False)

    @staticmethod
    def encode(record: Dict[str, Any]) -> str:
        """Encodes one record as a single JSON line with the schema version first."""
        payload = {"schema_version": SCHEMA_VERSION}
        payload.update(_to_jsonable(record))
        return json.dumps(payload, sort_keys=False)

    def write_records(self, records: Iterable[Dict[str, Any]], append: bool = False):
        """
        Writes records, one JSON object per line.

        Parameters
        ----------
        records:
            Dictionaries to write. numpy values are converted.
        append:
            Append instead of overwriting.
        """
        lines = [self.encode(record) for record in records]
        self.write_text("".join(line + "\n" for line in lines), append=append)

    def read_records(self) -> List[Dict[str, Any]]:
        """Reads every record back."""
        return [json.loads(line) for line in self.read_text().splitlines() if line]
