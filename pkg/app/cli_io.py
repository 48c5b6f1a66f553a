"""
Configuration parsing and output formats.

Config files are flat `section.key = value` text with `#` comments. Values in
brackets are JSON lists, `true`/`false` are booleans, numbers are numbers and
anything else is a string. The parsed mapping is validated by RunConfig.
"""
import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
from pydantic import ValidationError

from app.errors import ConfigurationError
from app.flow_verify import FlowField, euler_residual
from app.models import NodeClass
from app.schemas import RunConfig
from app.stream_solver import StreamField

logger = logging.getLogger(__name__)

FIELD_COLUMNS = ("x", "r", "psi", "rho", "u", "v", "mach")


# ============= Configuration =============

def _parse_value(text: str) -> Any:
    text = text.strip()
    if text.startswith("["):
        try:
            return json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"malformed list value {text!r}: {e}")
    lowered = text.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    return text


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    """Parse flat key-value text into a validated RunConfig."""
    tree: Dict[str, Any] = {}
    seen = set()
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{number}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigurationError(f"{source}:{number}: empty key")
        if key in seen:
            raise ConfigurationError(f"{source}:{number}: duplicate key {key}")
        seen.add(key)

        node = tree
        *sections, leaf = key.split(".")
        for section in sections:
            child = node.setdefault(section, {})
            if not isinstance(child, dict):
                raise ConfigurationError(f"{source}:{number}: {key} conflicts with a scalar key")
            node = child
        if isinstance(node.get(leaf), dict):
            raise ConfigurationError(f"{source}:{number}: {key} conflicts with a section")
        node[leaf] = _parse_value(value)

    try:
        return RunConfig.model_validate(tree)
    except ValidationError as e:
        messages = []
        for err in e.errors():
            path = ".".join(str(p) for p in err["loc"])
            msg = err["msg"].removeprefix("Value error, ")
            messages.append(f"{path}: {msg}" if path else msg)
        raise ConfigurationError("; ".join(messages), context={"source": source})


def parse_config(path: Union[str, Path]) -> RunConfig:
    """Read and validate a config file."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    return parse_config_text(path.read_text(), source=str(path))


def _flatten(prefix: str, value: Any, out: Dict[str, Any]) -> None:
    if isinstance(value, dict):
        for key, child in value.items():
            _flatten(f"{prefix}.{key}" if prefix else key, child, out)
    elif value is not None:
        out[prefix] = value


def config_echo(config: RunConfig) -> str:
    """Canonical key-value rendering with defaults filled; parses back to the same config."""
    flat: Dict[str, Any] = {}
    _flatten("", config.model_dump(mode="json"), flat)
    lines = []
    for key in sorted(flat):
        value = flat[key]
        if isinstance(value, bool):
            text = str(value).lower()
        elif isinstance(value, (list, tuple)):
            text = json.dumps(value)
        elif isinstance(value, float):
            text = repr(value)
        else:
            text = str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def config_hash(config: RunConfig) -> str:
    return hashlib.sha256(config_echo(config).encode("utf-8")).hexdigest()


# ============= Field tables =============

def field_rows(flow: FlowField, field: StreamField) -> np.ndarray:
    """Rows (x, r, psi, rho, u, v, mach) for every non-masked node, x fastest."""
    grid = field.grid
    keep = grid.node_class != NodeClass.SOLID
    # transpose so that r is the slow index and x the fast one
    mask = keep.T
    X, R = np.meshgrid(grid.x, grid.r)
    columns = [X, R, field.psi.T, flow.rho.T, flow.u.T, flow.v.T, flow.mach.T]
    return np.column_stack([c[mask] for c in columns])


def write_field(flow: FlowField, field: StreamField, path: Union[str, Path],
                config_digest: str = "") -> Path:
    """
    Field table "x,r,psi,rho,u,v,mach" at 17 significant digits plus a
    companion .summary file (m_L, Q, iterations, residuals, config hash).
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            fh.write(",".join(FIELD_COLUMNS) + "\n")
            np.savetxt(fh, field_rows(flow, field), fmt="%.17g", delimiter=",")
    except OSError as e:
        raise ConfigurationError(f"cannot write field file {path}: {e}")

    mass, axial, radial = euler_residual(flow)
    summary = {
        "m_L": repr(field.m_L),
        "Q": repr(field.q),
        "picard_iterations": field.picard_iterations,
        "linear_iterations": field.linear_iterations,
        "final_update": repr(field.residual_history[-1]) if field.residual_history else "nan",
        "euler_mass": repr(mass),
        "euler_axial": repr(axial),
        "euler_radial": repr(radial),
        "flagged_nodes": flow.flagged_count,
        "config_hash": config_digest,
    }
    summary_path = path.with_suffix(".summary")
    summary_path.write_text("".join(f"{k} = {v}\n" for k, v in summary.items()))
    logger.info(f"Wrote field table {path} ({summary_path.name})")
    return path


def read_field(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    """Column arrays of a field table, keyed by header name."""
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"field file not found: {path}")
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size and data.shape[1] != len(header):
        raise ConfigurationError(f"field file {path} has {data.shape[1]} columns for {len(header)} names")
    return {name: data[:, i] for i, name in enumerate(header)}


def read_summary(path: Union[str, Path]) -> Dict[str, str]:
    path = Path(path)
    out = {}
    for line in path.read_text().splitlines():
        key, _, value = line.partition(" = ")
        out[key] = value
    return out
