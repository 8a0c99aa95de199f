"""Localization metrics grouped by lighting condition.

Every statistic is reported for each condition present and for ``global``,
which pools all queries (not an average of condition means).
"""

import csv
import json
import math
import re
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .dataset import CONDITIONS
from .localization import RESULTS_HEADER

GROUPS = CONDITIONS + ("global",)


class EvaluationError(Exception):
    pass


@dataclass(frozen=True)
class Outcome:
    """One localized query joined with its ground truth."""

    query_id: str
    condition: str
    pred_room: str
    true_room: str
    x_est: float
    y_est: float
    x_true: float
    y_true: float
    elapsed_ms: float = math.nan

    @property
    def correct(self):
        return self.pred_room == self.true_room

    @property
    def error(self):
        return math.hypot(self.x_true - self.x_est, self.y_true - self.y_est)

    @property
    def localized(self):
        return not (math.isnan(self.x_est) or math.isnan(self.y_est))


def _float(s):
    return float(s) if s not in ("", None) else math.nan


def read_results(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RESULTS_HEADER:
            raise EvaluationError(f"{path}: expected header {','.join(RESULTS_HEADER)}")
        return list(reader)


def join(result_rows, truth):
    """Attach condition and true pose from the ``truth`` manifest to each result row."""
    by_id = truth.by_id()
    seen = set()
    out = []
    for row in result_rows:
        qid = row["query_id"]
        if qid not in by_id:
            raise EvaluationError(f"result for {qid!r} has no ground-truth record")
        if qid in seen:
            raise EvaluationError(f"duplicate result for {qid!r}")
        seen.add(qid)
        t = by_id[qid]
        out.append(Outcome(
            query_id=qid,
            condition=t.condition,
            pred_room=row["pred_room"],
            true_room=t.room,
            x_est=_float(row["x_est"]),
            y_est=_float(row["y_est"]),
            x_true=t.pose_x,
            y_true=t.pose_y,
            elapsed_ms=_float(row.get("elapsed_ms")),
        ))
    return out


def _groups(outcomes):
    groups = {c: [o for o in outcomes if o.condition == c] for c in CONDITIONS}
    groups = {c: g for c, g in groups.items() if g}
    groups["global"] = list(outcomes)
    return groups


def room_accuracy(outcomes):
    """Percent of queries whose predicted room is correct, per condition and pooled."""
    return {
        c: 100.0 * sum(o.correct for o in g) / len(g)
        for c, g in _groups(outcomes).items()
        if g
    }


def mae(outcomes):
    """Mean Euclidean distance between estimated and true positions, in metres."""
    errs = [o.error for o in outcomes if o.localized]
    if not errs:
        raise EvaluationError("no localized queries to average")
    return math.fsum(errs) / len(errs)


def error_distribution(errors):
    """Box-plot statistics: linear-interpolation quartiles, 1.5*IQR whiskers."""
    e = np.sort(np.asarray(errors, dtype=np.float64))
    if e.size == 0:
        raise EvaluationError("no errors to summarise")
    q1, median, q3 = (float(v) for v in np.percentile(e, [25, 50, 75]))
    iqr = q3 - q1
    lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = e[(e >= lo) & (e <= hi)]
    return {
        "q1": q1,
        "median": median,
        "q3": q3,
        "whisker_low": float(inside[0]),
        "whisker_high": float(inside[-1]),
        "outliers": int(e.size - inside.size),
        "mean": float(math.fsum(e) / e.size),
    }


@dataclass(frozen=True)
class ConditionStats:
    n: int
    room_accuracy: float
    mae: float | None
    q1: float | None = None
    median: float | None = None
    q3: float | None = None
    whisker_low: float | None = None
    whisker_high: float | None = None
    outliers: int = 0
    failed: int = 0
    mean_elapsed: float | None = None


@dataclass(frozen=True)
class EvalReport:
    label: str
    conditions: dict

    def to_dict(self):
        return {"label": self.label,
                "conditions": {c: asdict(s) for c, s in self.conditions.items()}}

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in fields(ConditionStats)}
        conds = {c: ConditionStats(**{k: v for k, v in s.items() if k in names})
                 for c, s in data["conditions"].items()}
        return cls(data.get("label", ""), conds)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def build_report(outcomes, label="model", timing=True):
    if not outcomes:
        raise EvaluationError("cannot report on an empty result set")
    acc = room_accuracy(outcomes)
    stats = {}
    for cond, group in _groups(outcomes).items():
        localized = [o for o in group if o.localized]
        dist = error_distribution([o.error for o in localized]) if localized else None
        times = [o.elapsed_ms for o in group if not math.isnan(o.elapsed_ms)]
        stats[cond] = ConditionStats(
            n=len(group),
            room_accuracy=acc[cond],
            mae=mae(localized) if localized else None,
            q1=dist and dist["q1"],
            median=dist and dist["median"],
            q3=dist and dist["q3"],
            whisker_low=dist and dist["whisker_low"],
            whisker_high=dist and dist["whisker_high"],
            outliers=dist["outliers"] if dist else 0,
            failed=len(group) - len(localized),
            mean_elapsed=(math.fsum(times) / len(times)) if (timing and times) else None,
        )
    return EvalReport(label, stats)


_TITLES = {"cloudy": "Cloudy", "night": "Night", "sunny": "Sunny", "global": "Global"}
ACCURACY_TITLE = "Room retrieval accuracy (%)"
ERROR_TITLE = "Hierarchical localization error (MAE)"
TIME_TITLE = "Computation time of the hierarchical localization"
BOX_TITLE = "Error distribution (m)"


def _cell(v, fmt, unit=""):
    return "-" if v is None else f"{v:{fmt}}{unit}"


def _row(cells, widths):
    return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()


def render_text(report):
    """Plain-text tables: room accuracy, MAE per condition, mean time, box-plot data."""
    label = report.label or "model"
    lw = max(len(label), len("Model"), len("Condition")) + 2
    s = report.conditions
    lines = [ACCURACY_TITLE]
    head = ["Model"] + [_TITLES[c] for c in GROUPS]
    widths = [lw] + [8] * len(GROUPS)
    lines.append(_row(head, widths))
    lines.append(_row([label] + [_cell(s[c].room_accuracy if c in s else None, ".2f") for c in GROUPS], widths))
    lines.append("")

    lines.append(ERROR_TITLE)
    widths = [lw] + [14] * len(GROUPS)
    lines.append(_row(["Model"] + [f"{_TITLES[c]} Error" for c in GROUPS], widths))
    lines.append(_row([label] + [_cell(s[c].mae if c in s else None, ".2f", " m") for c in GROUPS], widths))
    lines.append("")

    lines.append(TIME_TITLE)
    widths = [lw, 10]
    lines.append(_row(["Model", "Mean Time"], widths))
    g = s.get("global")
    lines.append(_row([label, _cell(g.mean_elapsed if g else None, ".3g", " ms")], widths))
    lines.append("")

    lines.append(BOX_TITLE)
    cols = ["n", "q1", "median", "q3", "whisker_low", "whisker_high", "outliers"]
    widths = [lw] + [13] * len(cols)
    lines.append(_row(["Condition"] + cols, widths))
    for c in GROUPS:
        if c not in s:
            continue
        st = s[c]
        cells = [str(st.n)] + [_cell(getattr(st, k), ".4f") for k in cols[1:-1]] + [str(st.outliers)]
        lines.append(_row([_TITLES[c]] + cells, widths))
    return "\n".join(lines) + "\n"


def _parse_num(tok, unit=""):
    if tok == "-":
        return None
    if unit and tok.endswith(unit):
        tok = tok[: -len(unit)]
    return float(tok)


def parse_text(text):
    """Read the accuracy, MAE and time tables back from :func:`render_text` output.

    Returns ``{label: {"accuracy": {...}, "mae": {...}, "mean_time_ms": x}}``.
    Several model rows per table are accepted.
    """
    sections = re.split(r"\n\s*\n", text.strip())
    out = {}
    for sec in sections:
        lines = sec.splitlines()
        title, body = lines[0].strip(), lines[2:]
        if title not in (ACCURACY_TITLE, ERROR_TITLE, TIME_TITLE):
            continue
        for line in body:
            # columns are separated by two or more spaces; "0.22 m" keeps its single space
            parts = re.split(r"\s{2,}", line.strip())
            label, vals = parts[0], parts[1:]
            entry = out.setdefault(label, {"accuracy": {}, "mae": {}, "mean_time_ms": None})
            if title == ACCURACY_TITLE:
                entry["accuracy"] = {c: _parse_num(v) for c, v in zip(GROUPS, vals)}
            elif title == ERROR_TITLE:
                entry["mae"] = {c: _parse_num(v, " m") for c, v in zip(GROUPS, vals)}
            elif title == TIME_TITLE:
                entry["mean_time_ms"] = _parse_num(vals[0], " ms")
    return out


def write_report(report, out_json, out_txt=None):
    out_json = Path(out_json)
    out_json.parent.mkdir(parents=True, exist_ok=True)
    out_json.write_text(report.to_json(), encoding="utf-8")
    txt = Path(out_txt) if out_txt else out_json.with_suffix(".txt")
    txt.write_text(render_text(report), encoding="utf-8")
    return txt


def render_latency(times):
    """Mean-time table, one row per model: ``times`` maps label -> milliseconds."""
    lw = max([len("Model")] + [len(k) for k in times]) + 2
    lines = [TIME_TITLE, _row(["Model", "Mean Time"], [lw, 10])]
    lines += [_row([label, _cell(ms, ".3g", " ms")], [lw, 10]) for label, ms in times.items()]
    return "\n".join(lines) + "\n"
