"""Loading raw categorical tables and turning them into coded datasets.

A recipe is an ordered list of steps, each a dict with an ``op`` key:

``select_columns``  keep ``columns`` (indices or header names), in that order
``drop_columns``    remove ``columns``
``drop_missing``    drop rows holding any of ``markers`` (default ``["?", ""]``)
``drop_if_domain_leq``  remove attributes with at most ``t`` distinct labels
``top_m_group``     keep the ``m`` most frequent labels, map the rest to ``other``
``frequency_rank_encode``  code labels 0.. by descending frequency

Frequency ties are broken lexicographically on the label. Encoding is always
applied last, whether or not the recipe lists it.
"""

from __future__ import annotations

import csv
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import CorrRRError, Dataset, true_marginals  # noqa: F401  (re-exported)

DEFAULT_MISSING = ("?", "")


class RaggedRows(CorrRRError):
    def __init__(self, line: int, got: int, expected: int):
        self.line = line
        super().__init__(f"line {line} has {got} fields, expected {expected}")


class RecipeError(CorrRRError):
    def __init__(self, step, reason: str):
        self.step = step
        super().__init__(f"recipe step {step!r}: {reason}")


@dataclass
class RawTable:
    rows: list
    header: list | None = None

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_cols(self) -> int:
        if self.rows:
            return len(self.rows[0])
        return len(self.header or [])


@dataclass
class PreprocessRecipe:
    steps: list
    name: str = "custom"
    has_header: bool = False
    delimiter: str | None = None
    notes: list = field(default_factory=list)

    @classmethod
    def from_json(cls, path) -> "PreprocessRecipe":
        spec = json.loads(Path(path).read_text())
        return cls(
            steps=list(spec["steps"]),
            name=spec.get("name", Path(path).stem),
            has_header=bool(spec.get("has_header", False)),
            delimiter=spec.get("delimiter"),
            notes=list(spec.get("notes", [])),
        )

    def to_dict(self) -> dict:
        return {"name": self.name, "has_header": self.has_header, "steps": self.steps, "notes": self.notes}


def _guess_delimiter(lines) -> str:
    try:
        return csv.Sniffer().sniff("\n".join(lines), delimiters=",;\t").delimiter
    except csv.Error:
        # the sniffer gives up on ragged samples; fall back to the most common candidate
        hits = {c: sum(c in line for line in lines) for c in ",;\t"}
        best = max(hits, key=hits.get)
        return best if hits[best] else " "


def load_csv(path, has_header: bool = False, delimiter: str | None = None) -> RawTable:
    """Read a rectangular delimited text file as strings.

    ``delimiter=None`` sniffs comma/semicolon/tab and falls back to runs of
    whitespace. Blank lines are skipped. Raises :class:`RaggedRows` with the
    1-based line number of the first row whose width differs.
    """
    text = Path(path).read_text()
    if delimiter is None:
        delimiter = _guess_delimiter(text.splitlines()[:50])
    if delimiter in (" ", "whitespace"):
        lines = [(i + 1, line.split()) for i, line in enumerate(text.splitlines()) if line.strip()]
    else:
        reader = csv.reader(text.splitlines(), delimiter=delimiter)
        lines = [(i + 1, [c.strip() for c in row]) for i, row in enumerate(reader) if any(c.strip() for c in row)]
    if not lines:
        return RawTable([], [] if has_header else None)
    header = None
    if has_header:
        header = lines[0][1]
        lines = lines[1:]
    width = len(header) if header is not None else len(lines[0][1]) if lines else 0
    for lineno, row in lines:
        if len(row) != width:
            raise RaggedRows(lineno, len(row), width)
    return RawTable([row for _, row in lines], header)


def _resolve(columns, names, step):
    out = []
    for c in columns:
        if isinstance(c, int) and not isinstance(c, bool):
            if not 0 <= c < len(names):
                raise RecipeError(step, f"column index {c} out of range 0..{len(names) - 1}")
            out.append(c)
        elif c in names:
            out.append(names.index(c))
        else:
            raise RecipeError(step, f"unknown column {c!r}")
    return out


def _ranked_labels(values) -> list:
    counts = Counter(values)
    return sorted(counts, key=lambda lab: (-counts[lab], str(lab)))


def apply_recipe(table: RawTable, recipe: PreprocessRecipe | list) -> tuple[Dataset, dict]:
    """Run the recipe steps and return the coded dataset plus audit metadata."""
    if isinstance(recipe, list):
        recipe = PreprocessRecipe(recipe)
    names = list(table.header) if table.header else [str(i) for i in range(table.n_cols)]
    cols = [list(col) for col in zip(*table.rows)] if table.rows else [[] for _ in names]
    log = []

    for step in recipe.steps:
        op = step.get("op")
        if op == "select_columns":
            idx = _resolve(step["columns"], names, step)
            names, cols = [names[i] for i in idx], [cols[i] for i in idx]
        elif op == "drop_columns":
            idx = set(_resolve(step["columns"], names, step))
            keep = [i for i in range(len(names)) if i not in idx]
            names, cols = [names[i] for i in keep], [cols[i] for i in keep]
        elif op == "drop_missing":
            markers = set(step.get("markers", DEFAULT_MISSING))
            n_before = len(cols[0]) if cols else 0
            keep = [i for i in range(n_before) if not any(c[i] in markers for c in cols)]
            cols = [[c[i] for i in keep] for c in cols]
            log.append({"op": op, "rows_dropped": n_before - len(keep)})
        elif op == "drop_if_domain_leq":
            t = int(step["t"])
            markers = set(step.get("markers", DEFAULT_MISSING))
            sizes = [len(set(c) - markers) for c in cols]
            keep = [i for i, s in enumerate(sizes) if s > t]
            log.append({"op": op, "dropped": [names[i] for i in range(len(names)) if i not in keep]})
            names, cols = [names[i] for i in keep], [cols[i] for i in keep]
        elif op == "top_m_group":
            m = int(step["m"])
            if m < 1:
                raise RecipeError(step, "m must be >= 1")
            other = step.get("other", "Other")
            grouped = []
            for c in cols:
                top = set(_ranked_labels(c)[:m])
                grouped.append([v if v in top else other for v in c])
            cols = grouped
        elif op == "frequency_rank_encode":
            pass
        else:
            raise RecipeError(step, f"unknown op {op!r}")

    if not cols:
        raise RecipeError(recipe.steps[-1] if recipe.steps else None, "no attributes left")
    if not cols[0]:
        raise RecipeError(recipe.steps[-1] if recipe.steps else None, "no rows left")

    codebooks = [_ranked_labels(c) for c in cols]
    k = max(2, max(len(cb) for cb in codebooks))
    encoded = []
    for c, cb in zip(cols, codebooks):
        code = {lab: i for i, lab in enumerate(cb)}
        encoded.append(np.array([code[v] for v in c], dtype=np.int64))
    records = np.column_stack(encoded)
    meta = {
        "source": recipe.name,
        "recipe": recipe.to_dict(),
        "columns": names,
        "codebooks": codebooks,
        "achieved": {"n": int(records.shape[0]), "d": len(cols), "k": k},
        "steps_log": log,
    }
    return Dataset(records, (k,) * len(cols)), meta


MUSHROOM = PreprocessRecipe(
    name="mushroom",
    steps=[
        {"op": "drop_if_domain_leq", "t": 5},
        {"op": "drop_missing"},
        {"op": "top_m_group", "m": 5},
        {"op": "frequency_rank_encode"},
    ],
    notes=["attributes with <= 5 labels removed (class column included), then top-5 + Other"],
)

NURSERY = PreprocessRecipe(
    name="nursery",
    steps=[
        {"op": "drop_columns", "columns": [5]},
        {"op": "drop_missing"},
        {"op": "top_m_group", "m": 2},
        {"op": "frequency_rank_encode"},
    ],
    notes=["column 5 is the binary 'finance' attribute", "domain 3 = top-2 labels + Other"],
)

CLAVE = PreprocessRecipe(
    name="clave",
    steps=[
        {"op": "select_columns", "columns": list(range(16))},
        {"op": "drop_missing"},
        {"op": "frequency_rank_encode"},
    ],
    notes=["first 16 binary onset columns"],
)

RECIPES = {"mushroom": MUSHROOM, "nursery": NURSERY, "clave": CLAVE}


def get_recipe(name_or_path) -> PreprocessRecipe:
    if str(name_or_path).lower() in RECIPES:
        return RECIPES[str(name_or_path).lower()]
    return PreprocessRecipe.from_json(name_or_path)


def ingest_file(path, recipe) -> tuple[Dataset, dict]:
    recipe = get_recipe(recipe) if not isinstance(recipe, PreprocessRecipe) else recipe
    table = load_csv(path, has_header=recipe.has_header, delimiter=recipe.delimiter)
    dataset, meta = apply_recipe(table, recipe)
    meta["input"] = str(path)
    meta["raw_shape"] = [table.n_rows, table.n_cols]
    return dataset, meta
