import csv
import dataclasses
import json
import math
import sys
from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Iterator, Optional, Sequence, TextIO

import numpy as np

from src.run_config import RunConfig


def format_value(value: Any) -> str:
    """CSV cell text: floats with 17 significant digits, '.' decimal point"""
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def to_jsonable(obj: Any) -> Any:
    """Plain JSON types; complex numbers become {"re": .., "im": ..}"""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                if f.repr}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": to_jsonable(float(obj.real)), "im": to_jsonable(float(obj.imag))}
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    return obj


class ReportWriter:
    """Writes CSV tables and JSON reports, each carrying the resolved run config"""

    def __init__(self, config: RunConfig, output: Optional[Path] = None):
        """
        Args:
            config: fully resolved run configuration
            output: destination file; None writes to stdout
        """
        self.config = config
        self.output = Path(output) if output is not None else None

    @contextmanager
    def _stream(self) -> Iterator[TextIO]:
        if self.output is None:
            yield sys.stdout
            sys.stdout.flush()
            return
        self.output.parent.mkdir(parents=True, exist_ok=True)
        with open(self.output, "w", encoding="utf-8", newline="") as f:
            yield f

    def write_csv(self, columns: Sequence[str], rows: Iterable[Sequence[Any]],
                  extra_header: Sequence[str] = ()) -> int:
        """
        Write a '# '-prefixed config header, then the table.

        Returns:
            Number of data rows written
        """
        count = 0
        with self._stream() as f:
            for line in self.config.header_lines():
                f.write(f"# {line}\n")
            for line in extra_header:
                f.write(f"# {line}\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([format_value(v) for v in row])
                count += 1
        return count

    def write_json(self, payload: Any) -> None:
        """JSON cannot carry comments, so the config is the first top-level key"""
        document = {"config": self.config.to_dict()}
        body = to_jsonable(payload)
        if isinstance(body, dict):
            document.update(body)
        else:
            document["result"] = body
        with self._stream() as f:
            json.dump(document, f, indent=2, ensure_ascii=False)
            f.write("\n")
