"""
CSV and JSON writers for trajectories, observables and phase diagrams

Files are written next to their destination and moved into place, so a failed
run never leaves a partial file behind.
"""

import csv
import io
import json
import logging
import math
import numbers
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence, TextIO, Union

logger = logging.getLogger('matrix-lorenz-export')


def format_number(value: Any) -> str:
    """17 significant digits, empty for missing values"""
    if value is None:
        return ''
    value = float(value)
    if math.isnan(value):
        return ''
    return format(value, '.17g')


def _clean(value: Any) -> Any:
    """JSON-safe copy: NaN/inf become null, numpy scalars become floats"""
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if value is None or isinstance(value, (bool, str)):
        return value
    if isinstance(value, numbers.Integral):
        return int(value)
    value = float(value)
    return value if math.isfinite(value) else None


@contextmanager
def atomic_output(path: Union[str, Path]) -> Iterator[TextIO]:
    """Yield a text stream on a temporary sibling of path, moved into place on success"""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path('.')
    directory.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f'.{path.name}.', dir=directory)
    try:
        with os.fdopen(fd, 'w', newline='') as handle:
            yield handle
        os.replace(tmp_name, path)
        logger.info(f"Wrote {path}")
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_number(v) for v in row])
    return buffer.getvalue()


def render_json(document: Any) -> str:
    return json.dumps(_clean(document), indent=2, sort_keys=True) + '\n'


def render_table(header: Sequence[str], rows: Iterable[Sequence[Any]], fmt: str) -> str:
    """A table as CSV, or as {"columns": [...], "rows": [...]} JSON"""
    if fmt == 'json':
        return render_json({'columns': list(header), 'rows': [list(row) for row in rows]})
    return render_csv(header, rows)


def write_text(path: Union[str, Path], text: str):
    with atomic_output(path) as handle:
        handle.write(text)
