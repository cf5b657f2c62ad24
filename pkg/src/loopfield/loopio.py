"""Reading and writing loops, oracle tables, patterns, and reports.

Loop files are JSON:

    { "space": {"kind": "finite", "labels": ["x","y"], "dist": [[0,1],[1,0]]}
               | {"kind": "euclidean", "dim": 2},
      "word":  [ {"state": "x", "hold": 1.0}, ... ],
      "phase": 0.5 }

Euclidean states are arrays of dim numbers; "dist" defaults to the discrete
metric; "phase" is optional and promotes the loop to a based loop.  Every
invariant violation is rejected with the offending field named.  Output
files are written to a temporary name and renamed on success, so failures
leave nothing behind.
"""

from __future__ import annotations

import json
import os
import tempfile

from .errors import DomainError, ValidationError
from .loops import BasedLoop, Loop, Segment
from .occupation import Box, Pattern
from .spaces import StateSpace


def _fail(field: str, message: str):
    raise ValidationError(f"{field}: {message}")


def space_from_json(obj, field: str = "space") -> StateSpace:
    if not isinstance(obj, dict):
        _fail(field, "must be an object")
    kind = obj.get("kind")
    if kind == "finite":
        labels = obj.get("labels")
        if not isinstance(labels, list) or not all(isinstance(s, str) for s in labels):
            _fail(f"{field}.labels", "must be a list of strings")
        dist = obj.get("dist")
        if dist is not None:
            if not isinstance(dist, list) or not all(
                isinstance(row, list) and all(isinstance(x, (int, float)) for x in row)
                for row in dist
            ):
                _fail(f"{field}.dist", "must be a square matrix of numbers")
        try:
            return StateSpace.finite(labels, dist)
        except DomainError as e:
            _fail(f"{field}.dist", str(e))
    elif kind == "euclidean":
        dim = obj.get("dim")
        if not isinstance(dim, int) or dim < 1:
            _fail(f"{field}.dim", "must be a positive integer")
        return StateSpace.euclidean(dim)
    _fail(f"{field}.kind", f"must be 'finite' or 'euclidean', got {kind!r}")


def space_to_json(space: StateSpace) -> dict:
    if space.kind == "finite":
        return {
            "kind": "finite",
            "labels": list(space.labels),
            "dist": [list(row) for row in space.dist],
        }
    return {"kind": "euclidean", "dim": space.dim}


def _state_from_json(space: StateSpace, obj, field: str):
    if space.kind == "finite":
        if not isinstance(obj, str):
            _fail(field, "finite states are label strings")
        if obj not in space.labels:
            _fail(field, f"unknown label {obj!r}")
        return obj
    if not isinstance(obj, list) or len(obj) != space.dim or not all(
        isinstance(x, (int, float)) for x in obj
    ):
        _fail(field, f"euclidean states are arrays of {space.dim} numbers")
    return tuple(float(x) for x in obj)


def loop_from_json(obj) -> Loop | BasedLoop:
    if not isinstance(obj, dict):
        _fail("$", "loop file must be a JSON object")
    space = space_from_json(obj.get("space"))
    word = obj.get("word")
    if not isinstance(word, list) or not word:
        _fail("word", "must be a nonempty array of segments")
    segments = []
    for i, seg in enumerate(word):
        if not isinstance(seg, dict):
            _fail(f"word[{i}]", "must be an object with state and hold")
        state = _state_from_json(space, seg.get("state"), f"word[{i}].state")
        hold = seg.get("hold")
        if not isinstance(hold, (int, float)) or not hold > 0:
            _fail(f"word[{i}].hold", f"must be a positive number, got {hold!r}")
        segments.append(Segment(state, float(hold)))
    try:
        loop = Loop(space, tuple(segments))
    except DomainError as e:
        _fail("word", str(e))
    phase = obj.get("phase")
    if phase is None:
        return loop
    if not isinstance(phase, (int, float)):
        _fail("phase", f"must be a number, got {phase!r}")
    try:
        return BasedLoop(loop, float(phase))
    except DomainError as e:
        _fail("phase", str(e))


def loop_to_json(l: Loop | BasedLoop) -> dict:
    based = isinstance(l, BasedLoop)
    loop = l.loop if based else l
    out = {
        "space": space_to_json(loop.space),
        "word": [
            {
                "state": seg.state if loop.space.kind == "finite" else list(seg.state),
                "hold": seg.hold,
            }
            for seg in loop.word
        ],
    }
    if based:
        out["phase"] = l.phase
    return out


def read_loop(path: str) -> Loop | BasedLoop:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as e:
        raise ValidationError(f"{path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}") from e
    return loop_from_json(obj)


def atomic_write_text(path: str, text: str):
    """Write via a sibling temp file and rename, so failures leave no output."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_loop(path: str, l: Loop | BasedLoop):
    atomic_write_text(path, dump_json(loop_to_json(l)))


def read_oracle_table(path: str) -> list[tuple[tuple[str, ...], float]]:
    """Recorded oracle file: JSON array of {"pattern": ["x","y"], "value": v}."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as e:
        raise ValidationError(f"{path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}:{e.lineno}:{e.colno}: invalid JSON: {e.msg}") from e
    if not isinstance(obj, list):
        _fail("$", "oracle table must be a JSON array")
    entries = []
    for i, row in enumerate(obj):
        if not isinstance(row, dict):
            _fail(f"[{i}]", "must be an object with pattern and value")
        pattern = row.get("pattern")
        if not isinstance(pattern, list) or not pattern or not all(
            isinstance(x, str) for x in pattern
        ):
            _fail(f"[{i}].pattern", "must be a nonempty array of labels")
        value = row.get("value")
        if not isinstance(value, (int, float)) or value < 0:
            _fail(f"[{i}].value", f"must be a nonnegative number, got {value!r}")
        entries.append((tuple(pattern), float(value)))
    return entries


def parse_pattern(text: str, space: StateSpace) -> Pattern:
    """CLI pattern syntax: labels "x,y,x" or boxes "0,0:1,1; 2,0:3,1"."""
    text = text.strip()
    if not text:
        raise ValidationError("pattern: empty")
    if space.kind == "finite":
        cells = tuple(part.strip() for part in text.split(","))
        for c in cells:
            if c not in space.labels:
                raise ValidationError(f"pattern: unknown label {c!r}")
        return Pattern(cells)
    boxes = []
    for i, part in enumerate(text.split(";")):
        part = part.strip()
        if ":" not in part:
            raise ValidationError(f"pattern[{i}]: boxes need a 'min:max' form")
        lo_text, hi_text = part.split(":", 1)
        try:
            lo = tuple(float(x) for x in lo_text.split(","))
            hi = tuple(float(x) for x in hi_text.split(","))
        except ValueError as e:
            raise ValidationError(f"pattern[{i}]: {e}") from e
        if len(lo) != space.dim or len(hi) != space.dim:
            raise ValidationError(
                f"pattern[{i}]: expected {space.dim} coordinates per corner"
            )
        try:
            boxes.append(Box(lo, hi))
        except DomainError as e:
            raise ValidationError(f"pattern[{i}]: {e}") from e
    return Pattern(tuple(boxes))
