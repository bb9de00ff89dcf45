import csv
import io
import os
from typing import Iterable, Optional, Sequence

import numpy as np

from shared.config import config


def make_rng(seed: Optional[int] = None, *stream: int) -> np.random.Generator:
    """Seeded generator; `stream` keys derive independent, reproducible substreams."""
    base = config.SEED if seed is None else seed
    return np.random.default_rng(np.random.SeedSequence([int(base), *map(int, stream)]))


def random_complex(rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.standard_normal(size) + 1j * rng.standard_normal(size)


def format_g17(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.17g" % float(value)


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    output = io.StringIO()
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_g17(v) for v in row])
    return output.getvalue()


def ensure_dir(path: str) -> str:
    os.makedirs(path, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise PermissionError(f"Output directory {path} is not writable")
    return path
