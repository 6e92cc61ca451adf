"""Model documents on disk and the CSV / JSON output formats."""
from __future__ import annotations

import csv
import io
import json
import re
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
import yaml

from .core import ModelError, SpnModel, validate_model
from .stats import EmpiricalPmf, MeanCI


class ModelSyntaxError(ModelError):
    pass


_TOKEN = re.compile(r"([^.\[\]]+)|\[(\d+)\]")


def _node_line(root: yaml.Node | None, path: str) -> int | None:
    """1-based line of the YAML node addressed by a dotted/indexed field path."""
    node, line = root, None
    if node is not None:
        line = node.start_mark.line + 1
    for name, idx in _TOKEN.findall(path):
        if node is None:
            break
        nxt = None
        if idx and isinstance(node, yaml.SequenceNode):
            k = int(idx)
            nxt = node.value[k] if k < len(node.value) else None
        elif name and isinstance(node, yaml.MappingNode):
            for key, val in node.value:
                if key.value == name:
                    nxt = val if val.tag != "tag:yaml.org,2002:null" else key
                    break
        if nxt is None:
            break
        node = nxt
        line = node.start_mark.line + 1
    return line


def parse_model_text(text: str, source: str = "<string>") -> SpnModel:
    try:
        root = yaml.compose(text)
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}:{mark.column + 1}" if mark else source
        problem = getattr(exc, "problem", None) or str(exc)
        raise ModelSyntaxError(f"{where}: syntax error: {problem}") from None
    if doc is None:
        raise ModelSyntaxError(f"{source}: syntax error: empty model document")
    if not isinstance(doc, dict):
        raise ModelSyntaxError(f"{source}:1: syntax error: model document must be a mapping")
    try:
        return validate_model(doc)
    except ModelError as exc:
        line = _node_line(root, exc.path) if exc.path else None
        where = f"{source}:{line}" if line else source
        raise ModelError(exc.message, exc.path, where) from None


def parse_model_file(path) -> SpnModel:
    path = Path(path)
    return parse_model_text(path.read_text(), str(path))


class _Dumper(yaml.SafeDumper):
    pass


def _str_block(dumper, data):
    style = "|" if "\n" in data else None
    return dumper.represent_scalar("tag:yaml.org,2002:str", data, style=style)


_Dumper.add_representer(str, _str_block)


def dump_model(model: SpnModel) -> str:
    return yaml.dump(model.to_document(), Dumper=_Dumper, sort_keys=False, width=88)


def fmt(v: Any) -> str:
    """Shortest round-trip text for numbers."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def trajectory_csv(times, states, places: Sequence[str]) -> str:
    return csv_text(["time", *places], ([t, *s] for t, s in zip(times, states)))


def summary_csv(rows: Iterable[tuple[str, MeanCI | float, float, float]]) -> str:
    out = []
    for place, ci, lo, hi in rows:
        if isinstance(ci, MeanCI):
            out.append((place, ci.mean, ci.halfwidth, lo, hi))
        else:
            out.append((place, float(ci), 0.0, lo, hi))
    return csv_text(["place", "mean", "ci_halfwidth", "min", "max"], out)


def pmf_csv(pmf: EmpiricalPmf) -> str:
    return csv_text(["value", "mass"], zip(pmf.support.tolist(), pmf.mass.tolist()))


def pmf_record(place: str, pmf: EmpiricalPmf) -> dict:
    return {"place": place, "support": pmf.support.tolist(), "mass": pmf.mass.tolist()}


def json_text(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"
