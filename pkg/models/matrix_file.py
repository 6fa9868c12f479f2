"""
Line-oriented `key = value` text files for systems, controllers,
certificates and run configurations.

    # comment lines start with '#'
    name = HE1
    A = [0.5 0.1; 0.0 0.9]      # rows separated by ';', entries by whitespace
    R = [1.0]

A bracketed matrix may continue over several lines until its closing ']'.
`[]` is an empty (zero-state) block. Numbers are written with 17
significant digits so that save/load is exact.
"""
import os
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Union

import numpy as np

from models.lti_system import LtiSystem
from models.realization import ControllerRealization
from utils.exceptions import DimensionMismatch, ParseError

logger = logging.getLogger(__name__)

Value = Union[np.ndarray, str]

SYSTEM_KEYS = ("A", "B_u", "B_w", "Q", "R")
FEEDBACK_KEYS = ("Ac", "Bc", "Cc", "Dx")
TRANSFER_KEYS = ("Ak", "Bk", "Ck")


@dataclass
class Entry:
    value: Value
    line: int
    column: int


def _strip_comment(text: str) -> str:
    depth = 0
    for i, ch in enumerate(text):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        elif ch == "#" and depth <= 0:
            return text[:i]
    return text


def _parse_matrix(body: str, line: int, column: int, path: Optional[str]) -> np.ndarray:
    inner = body.strip()[1:-1]
    if not inner.strip():
        return np.zeros((0, 0))
    rows: List[List[float]] = []
    offset = column + body.index("[") + 1
    for raw_row in inner.split(";"):
        tokens = raw_row.replace(",", " ").split()
        row = []
        for token in tokens:
            try:
                row.append(float(token))
            except ValueError:
                col = offset + max(raw_row.find(token), 0)
                raise ParseError(f"invalid number {token!r}", line, col, path) from None
        if not row:
            raise ParseError("empty matrix row", line, offset, path)
        rows.append(row)
        offset += len(raw_row) + 1
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(f"row {i + 1} has {len(row)} entries, expected {width}", line, column, path)
    return np.array(rows, dtype=float)


def parse_text(text: str, path: Optional[str] = None) -> Dict[str, Entry]:
    """Parse the key = value dialect into entries that remember their position"""
    entries: Dict[str, Entry] = {}
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line_no = i + 1
        content = _strip_comment(lines[i])
        i += 1
        if not content.strip():
            continue
        if "=" not in content:
            col = len(content) - len(content.lstrip()) + 1
            raise ParseError("expected 'key = value'", line_no, col, path)
        key_part, value_part = content.split("=", 1)
        key = key_part.strip()
        if not key or not key.replace("_", "").replace(".", "").isalnum():
            raise ParseError(f"invalid key {key!r}", line_no, 1, path)
        value_col = len(key_part) + 2 + len(value_part) - len(value_part.lstrip())
        value_text = value_part.strip()
        if value_text.startswith("["):
            while value_text.count("[") > value_text.count("]"):
                if i >= len(lines):
                    raise ParseError("unterminated matrix", line_no, value_col, path)
                value_text += " " + _strip_comment(lines[i]).strip()
                i += 1
            if not value_text.endswith("]") or value_text.count("[") != 1:
                raise ParseError("malformed matrix literal", line_no, value_col, path)
            value: Value = _parse_matrix(value_text, line_no, value_col, path)
        else:
            value = value_text
        if key in entries:
            raise ParseError(f"duplicate key {key}", line_no, 1, path)
        entries[key] = Entry(value, line_no, value_col)
    return entries


def read_entries(path: str) -> Dict[str, Entry]:
    logger.info(f"Reading matrix file: {path}")
    if not os.path.exists(path):
        raise ParseError(f"file not found: {path}", path=path)
    with open(path, "r", encoding="utf-8") as handle:
        return parse_text(handle.read(), path)


def _require_matrix(entries: Dict[str, Entry], key: str, path: Optional[str]) -> np.ndarray:
    if key not in entries:
        raise ParseError(f"missing key {key}", path=path)
    entry = entries[key]
    value = entry.value
    if isinstance(value, str):
        try:
            return np.array([[float(value)]])
        except ValueError:
            raise ParseError(f"{key} must be a matrix", entry.line, entry.column, path) from None
    return value


def format_number(x: float) -> str:
    return format(float(x), ".17g")


def format_matrix(X) -> str:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.size == 0:
        return "[]"
    rows = [" ".join(format_number(v) for v in row) for row in X]
    return "[" + "; ".join(rows) + "]"


def write_entries(path: str, entries: Mapping[str, Union[str, float, int, np.ndarray]],
                  header: Optional[str] = None) -> None:
    lines = []
    if header:
        lines.extend(f"# {h}" for h in header.splitlines())
    for key, value in entries.items():
        if isinstance(value, np.ndarray):
            text = format_matrix(value)
        elif isinstance(value, float):
            text = format_number(value)
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")
    logger.info(f"Wrote {len(entries)} entries to {path}")


def load_system(path: str) -> LtiSystem:
    entries = read_entries(path)
    matrices = {key: _require_matrix(entries, key, path) for key in SYSTEM_KEYS}
    name_entry = entries.get("name")
    name = name_entry.value if name_entry is not None and isinstance(name_entry.value, str) \
        else os.path.splitext(os.path.basename(path))[0]
    try:
        return LtiSystem(name=name, **matrices)
    except DimensionMismatch as e:
        raise DimensionMismatch(e.message, {**e.context, "path": path}) from e


def save_system(sys: LtiSystem, path: str) -> None:
    entries = {"name": sys.name}
    entries.update({key: getattr(sys, key) for key in SYSTEM_KEYS})
    write_entries(path, entries, header=f"plant {sys.name}: n={sys.n} p={sys.p} m={sys.m}")


def load_controller(path: str, system: Optional[LtiSystem] = None) -> ControllerRealization:
    """
    Load a controller file. Feedback-form controllers need the plant to
    rebuild their transfer form.
    """
    entries = read_entries(path)
    kind_entry = entries.get("kind")
    if kind_entry is None:
        raise ParseError("missing key kind", path=path)
    kind = str(kind_entry.value).strip()
    method = str(entries["method"].value) if "method" in entries else ""

    if kind == "feedback":
        Ac, Bc, Cc, Dx = (_require_matrix(entries, key, path) for key in FEEDBACK_KEYS)
        if system is None:
            raise ParseError("feedback controllers require the plant", kind_entry.line, kind_entry.column, path)
        p, n = Dx.shape
        if (p, n) != (system.p, system.n):
            raise DimensionMismatch("Dx does not match the plant", {"Dx": Dx.shape, "path": path})
        nc = Ac.shape[0]
        Bc = Bc.reshape(nc, n) if Bc.size or nc == 0 else Bc
        Cc = Cc.reshape(p, nc) if Cc.size or nc == 0 else Cc
        controller = ControllerRealization.from_feedback(system.A, system.B_u, system.B_w,
                                                         Ac, Bc, Cc, Dx, method)
    elif kind == "transfer":
        Ak, Bk, Ck = (_require_matrix(entries, key, path) for key in TRANSFER_KEYS)
        p = int(entries["p"].value) if "p" in entries else (system.p if system is not None else None)
        m = int(entries["m"].value) if "m" in entries else (system.m if system is not None else None)
        controller = ControllerRealization.from_transfer(Ak, Bk, Ck, method, p=p, m=m)
    else:
        raise ParseError(f"kind must be feedback or transfer, got {kind!r}",
                         kind_entry.line, kind_entry.column, path)
    logger.info(f"Loaded {kind} controller ({controller.n_states} states) from {path}")
    return controller


def save_controller(controller: ControllerRealization, path: str) -> None:
    entries: Dict[str, Union[str, np.ndarray]] = {"kind": controller.kind}
    if controller.method:
        entries["method"] = controller.method
    if controller.kind == "feedback":
        for key in FEEDBACK_KEYS:
            entries[key] = getattr(controller, key)
    else:
        entries["p"] = str(controller.p)
        entries["m"] = str(controller.m)
        for key in TRANSFER_KEYS:
            entries[key] = getattr(controller, key)
    write_entries(path, entries, header=f"{controller.method or 'controller'} ({controller.kind} form)")


def save_certificate(certificate, path: str) -> None:
    """Write a synthesis certificate as a key = value report"""
    write_entries(path, certificate.to_entries(), header=certificate.summary())


def load_key_values(path: str) -> Dict[str, str]:
    """Plain string map for run-configuration files"""
    out = {}
    for key, entry in read_entries(path).items():
        if isinstance(entry.value, np.ndarray):
            raise ParseError(f"{key}: matrices are not allowed in run configs", entry.line, entry.column, path)
        out[key] = entry.value
    return out

