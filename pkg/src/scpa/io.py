"""CSV emission and reading.

Every table starts with a comment line ``# scpa-csv table=<name> schema=<n>``
so analysis scripts fail loudly when the columns change. Floats are written
with six decimals, which makes the files byte-identical across runs with
the same scenario and seed. Files are written to a temporary name in the
target directory and renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .core import day_of_slot
from .orchestrator import SimulationLog, TouResult, summarize

SCHEMA_VERSION = 1
DECIMALS = 6

CLEARING_COLUMNS = ("day", "slot", "price", "quantity_kwh", "revenue", "cost", "uncontrolled_kwh",
                    "model1_kwh", "model2_kwh", "model3_kwh")
ROUND_COLUMNS = ("session", "iteration", "slot", "price", "demand_kwh", "revenue_deficit")
SUMMARY_COLUMNS = ("metric", "value")
TOU_COLUMNS = ("day", "slot", "price", "quantity_kwh", "revenue", "cost", "deficit_per_kwh", "shortfall",
               "uncontrolled_kwh", "model1_kwh", "model2_kwh", "model3_kwh")
_GROUP_COLUMNS = {"quad_total": "model1_kwh", "log_per_slot": "model2_kwh", "device_milp": "model3_kwh"}
_INT_COLUMNS = {"day", "slot", "session", "iteration"}


class SchemaError(ValueError):
    pass


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = round(float(value), DECIMALS)
    return f"{v + 0.0:.{DECIMALS}f}"  # + 0.0 turns -0.0 into 0.0


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _table_text(name: str, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(f"# scpa-csv table={name} schema={SCHEMA_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row[c]) if not isinstance(row[c], str) else row[c] for c in columns])
    return buf.getvalue()


def write_table(path, name: str, columns, rows) -> Path:
    return atomic_write_text(path, _table_text(name, columns, rows))


def read_table(path, name: str | None = None) -> list[dict]:
    """Rows of a table written by :func:`write_table`, numbers parsed."""
    path = Path(path)
    with path.open(newline="") as fh:
        header = fh.readline().strip()
        if not header.startswith("# scpa-csv"):
            raise SchemaError(f"{path}: missing schema header")
        meta = dict(part.split("=", 1) for part in header[len("# scpa-csv"):].split())
        if int(meta.get("schema", -1)) != SCHEMA_VERSION:
            raise SchemaError(f"{path}: schema {meta.get('schema')} != {SCHEMA_VERSION}")
        if name is not None and meta.get("table") != name:
            raise SchemaError(f"{path}: expected table {name}, found {meta.get('table')}")
        rows = []
        for raw in csv.DictReader(fh):
            rows.append({k: _parse(k, v) for k, v in raw.items()})
        return rows


def _parse(key: str, value: str):
    if key in _INT_COLUMNS:
        return int(value)
    try:
        return float(value)
    except ValueError:
        return value


# ---------------------------------------------------------------------------
# row builders


def clearing_rows(log_: SimulationLog) -> list[dict]:
    rows = []
    for c in log_.clearings:
        row = {
            "day": int(day_of_slot(c.slot)),
            "slot": int(c.slot),
            "price": c.price,
            "quantity_kwh": c.quantity,
            "revenue": c.revenue,
            "cost": c.cost,
            "uncontrolled_kwh": c.uncontrolled,
        }
        for group, col in _GROUP_COLUMNS.items():
            row[col] = c.subtotals.get(group, 0.0)
        rows.append(row)
    return rows


def round_rows(log_: SimulationLog):
    for s in log_.sessions:
        slots = s.slots
        for k in range(s.iterations):
            for h, slot in enumerate(slots):
                yield {
                    "session": s.session,
                    "iteration": k + 1,
                    "slot": int(slot),
                    "price": s.prices[k, h],
                    "demand_kwh": s.demand[k, h],
                    "revenue_deficit": s.deficits[k, h],
                }


def summary_rows(log_: SimulationLog) -> list[dict]:
    totals = summarize(log_)["totals"]
    return [{"metric": k, "value": v} for k, v in totals.items()]


def tou_rows(result: TouResult) -> list[dict]:
    rows = []
    deficit, shortfall = result.deficit, result.shortfall
    for i, slot in enumerate(result.slots):
        row = {
            "day": int(day_of_slot(slot)),
            "slot": int(slot),
            "price": result.prices[i],
            "quantity_kwh": result.demand[i],
            "revenue": result.revenue[i],
            "cost": result.cost[i],
            "deficit_per_kwh": deficit[i],
            "shortfall": shortfall[i],
            "uncontrolled_kwh": result.uncontrolled[i],
        }
        for group, col in _GROUP_COLUMNS.items():
            row[col] = result.subtotals[group][i]
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# writers


def write_run(log_: SimulationLog, out_dir) -> dict[str, Path]:
    """clearings.csv, clock_rounds.csv, summary.csv and timing.json."""
    out = Path(out_dir)
    paths = {
        "clearings": write_table(out / "clearings.csv", "clearings", CLEARING_COLUMNS, clearing_rows(log_)),
        "clock_rounds": write_table(out / "clock_rounds.csv", "clock_rounds", ROUND_COLUMNS, round_rows(log_)),
        "summary": write_table(out / "summary.csv", "summary", SUMMARY_COLUMNS, summary_rows(log_)),
    }
    # wall-clock numbers vary between runs, so they stay out of the CSVs
    paths["timing"] = atomic_write_text(out / "timing.json", json.dumps(summarize(log_)["timing"], indent=2) + "\n")
    return paths


def write_tou(result: TouResult, out_dir) -> Path:
    return write_table(Path(out_dir) / "tou.csv", "tou", TOU_COLUMNS, tou_rows(result))


def read_clearings(path) -> list[dict]:
    return read_table(path, "clearings")


def read_clock_rounds(path) -> list[dict]:
    return read_table(path, "clock_rounds")


def read_summary(path) -> dict:
    return {r["metric"]: r["value"] for r in read_table(path, "summary")}


def read_tou(path) -> list[dict]:
    return read_table(path, "tou")


def rounded(row: dict) -> dict:
    """A row as it reads back from disk."""
    return {k: (_parse(k, fmt(v)) if not isinstance(v, str) else v) for k, v in row.items()}
