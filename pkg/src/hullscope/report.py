"""Scenario files, run records and report emission (JSON, CSV, SVG)."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .errors import SchemaError
from .families import REGISTRY, build, sample_conjugate_symmetry
from .fiber import FiberScenario

SCHEMA_VERSION = 1
SYMMETRY_TOL = 1e-10

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["family", "n", "level"],
    "properties": {
        "schema_version": {"type": ["integer", "string"]},
        "family": {"type": "string"},
        "n": {"type": "integer"},
        "level": {"type": "number"},
        "parameters": {"type": "object"},
        "conjugate_symmetric": {"type": "boolean"},
    },
}

_RESERVED = set(SCENARIO_SCHEMA["properties"])


@dataclass(frozen=True, eq=False)
class ScenarioFile:
    """A validated scenario document and the scenario built from it."""

    document: dict
    scenario: FiberScenario
    symmetry_residual: float | None = None

    @property
    def family(self) -> str:
        return self.document["family"]


def parse_scenario(doc: dict) -> ScenarioFile:
    """Validate ``doc`` and build its scenario.

    Family parameters may sit under ``"parameters"`` or at top level.  A
    declared ``conjugate_symmetric: true`` is checked at 100 random probes.

    Raises
    ------
    SchemaError, UnknownFamily, DimensionError
    """
    try:
        jsonschema.validate(doc, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise SchemaError(f"scenario: {exc.message}") from None
    version = doc.get("schema_version", SCHEMA_VERSION)
    if int(version) != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {version}")
    params = {k: v for k, v in doc.items() if k not in _RESERVED}
    params.update(doc.get("parameters", {}))
    try:
        scenario = build(doc["family"], doc["n"], doc["level"], params)
    except (TypeError, ValueError, KeyError, IndexError) as exc:
        raise SchemaError(f"bad parameters for {doc['family']!r}: {exc}") from None
    residual = None
    if doc.get("conjugate_symmetric"):
        residual = sample_conjugate_symmetry(scenario, probes=100)
        if residual > SYMMETRY_TOL:
            raise SchemaError(f"declared conjugate-symmetric but mismatch is {residual:.3g}")
    return ScenarioFile(doc, scenario, residual)


def load_scenario_file(path) -> ScenarioFile:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from None
    return parse_scenario(doc)


def load_scenario(path) -> FiberScenario:
    """Read, validate and build the scenario stored at ``path``."""
    return load_scenario_file(path).scenario


def known_families() -> list:
    return sorted(REGISTRY)


# ---------------------------------------------------------------------------
# run records


def _plain(obj):
    """Convert numpy scalars/arrays and tuples to JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    return obj


def content_hash(inputs: dict) -> str:
    """Git-style object hash (``blob <len>\\0`` header) of canonical JSON, using SHA-256."""
    body = json.dumps(_plain(inputs), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(b"blob %d\0" % len(body) + body).hexdigest()


@dataclass
class Table:
    header: list
    rows: list


@dataclass
class RunRecord:
    """Provenance and outputs of one command.

    ``tables`` and ``plot`` feed CSV/SVG emission and are not part of the JSON
    document; equality ignores them.
    """

    command: list
    config: dict
    inputs_hash: str
    outputs: dict
    wall_time: float | None = None
    stability: dict = field(default_factory=dict)
    tables: Table | None = field(default=None, compare=False)
    plot: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        self.command = _plain(self.command)
        self.config = _plain(self.config)
        self.outputs = _plain(self.outputs)
        self.stability = _plain(self.stability)

    def to_json(self) -> dict:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": self.config,
            "inputs_hash": self.inputs_hash,
            "outputs": self.outputs,
            "stability": self.stability,
        }
        if self.wall_time is not None:
            doc["wall_time"] = self.wall_time
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, doc: dict) -> "RunRecord":
        return cls(command=doc["command"], config=doc["config"], inputs_hash=doc["inputs_hash"],
                   outputs=doc["outputs"], wall_time=doc.get("wall_time"),
                   stability=doc.get("stability", {}))


def emit_report(record: RunRecord, json_path, csv_path=None, svg_path=None) -> list:
    """Write the record as JSON, plus CSV when it carries a table and SVG when asked.

    Returns the written paths.
    """
    written = []
    json_path = Path(json_path)
    json_path.write_text(record.dumps())
    written.append(json_path)
    if csv_path is not None and record.tables is not None:
        csv_path = Path(csv_path)
        with csv_path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(record.tables.header)
            for row in record.tables.rows:
                writer.writerow([_cell(v) for v in row])
        written.append(csv_path)
    if svg_path is not None and record.plot is not None:
        svg_path = Path(svg_path)
        svg_path.write_text(render_svg(record.plot))
        written.append(svg_path)
    return written


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        return repr(complex(v))
    return v


# ---------------------------------------------------------------------------
# SVG

_W, _H, _PAD = 640, 400, 56


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def _axes(x0, x1, y0, y1, xlabel, ylabel) -> list:
    out = [
        f'<line x1="{_PAD}" y1="{_H - _PAD}" x2="{_W - _PAD / 2}" y2="{_H - _PAD}" stroke="black"/>',
        f'<line x1="{_PAD}" y1="{_PAD / 2}" x2="{_PAD}" y2="{_H - _PAD}" stroke="black"/>',
        f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle">{xlabel}</text>',
        f'<text x="16" y="{_H / 2}" text-anchor="middle" transform="rotate(-90 16 {_H / 2})">{ylabel}</text>',
        f'<text x="{_PAD}" y="{_H - _PAD + 16}" text-anchor="middle" font-size="11">{x0:.4g}</text>',
        f'<text x="{_W - _PAD / 2}" y="{_H - _PAD + 16}" text-anchor="middle" font-size="11">{x1:.4g}</text>',
        f'<text x="{_PAD - 4}" y="{_H - _PAD}" text-anchor="end" font-size="11">{y0:.6g}</text>',
        f'<text x="{_PAD - 4}" y="{_PAD / 2 + 4}" text-anchor="end" font-size="11">{y1:.6g}</text>',
    ]
    return out


def _scale(v, lo, hi, a, b):
    span = hi - lo if hi > lo else 1.0
    return a + (v - lo) / span * (b - a)


def flatness_svg(angles, values, title="rho(z_k, phi(z_k))") -> str:
    """Polyline of ``values`` against ``angles`` with one vertex per grid node."""
    angles = np.asarray(angles, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = float(values.min()), float(values.max())
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5e-12 - abs(lo) * 1e-9, hi + 0.5e-12 + abs(hi) * 1e-9
    pts = " ".join(
        f"{_fmt(_scale(a, 0, 2 * math.pi, _PAD, _W - _PAD / 2))},"
        f"{_fmt(_scale(v, lo, hi, _H - _PAD, _PAD / 2))}"
        for a, v in zip(angles, values)
    )
    data = json.dumps({"arg_z": [repr(float(a)) for a in angles],
                       "value": [repr(float(v)) for v in values]})
    body = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f"<title>{title}</title>",
        f"<metadata>{data}</metadata>",
        *_axes(0.0, 2 * math.pi, lo, hi, "arg z", "rho"),
        f'<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{pts}"/>',
        "</svg>",
    ]
    return "\n".join(body) + "\n"


_COLORS = {"inside": "#2b8cbe", "boundary": "#fdae6b", "outside": "#f0f0f0"}


def slice_svg(zeta, verdicts, boundary=(), title="hull slice") -> str:
    """Verdict cells of a slice with boundary points overlaid."""
    zeta = np.asarray(zeta)
    verdicts = np.asarray(verdicts)
    res = zeta.shape[0]
    xs = zeta.real.ravel()
    ys = zeta.imag.ravel()
    x0, x1, y0, y1 = xs.min(), xs.max(), ys.min(), ys.max()
    cw = (_W - 1.5 * _PAD) / res
    ch = (_H - 1.5 * _PAD) / res
    cells = []
    for i in range(res):
        for j in range(res):
            z = zeta[i, j]
            cx = _scale(z.real, x0, x1, _PAD + cw / 2, _W - _PAD / 2 - cw / 2)
            cy = _scale(z.imag, y0, y1, _H - _PAD - ch / 2, _PAD / 2 + ch / 2)
            cells.append(f'<rect x="{_fmt(cx - cw / 2)}" y="{_fmt(cy - ch / 2)}" width="{_fmt(cw)}" '
                         f'height="{_fmt(ch)}" fill="{_COLORS.get(str(verdicts[i, j]), "#999")}"/>')
    dots = []
    for z in np.asarray(boundary).ravel():
        cx = _scale(z.real, x0, x1, _PAD + cw / 2, _W - _PAD / 2 - cw / 2)
        cy = _scale(z.imag, y0, y1, _H - _PAD - ch / 2, _PAD / 2 + ch / 2)
        dots.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="1.5" fill="black"/>')
    counts = {k: int(np.sum(verdicts == k)) for k in ("inside", "boundary", "outside")}
    body = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f"<title>{title}</title>",
        f"<metadata>{json.dumps(counts, sort_keys=True)}</metadata>",
        *cells,
        *dots,
        *_axes(float(x0), float(x1), float(y0), float(y1), "Re zeta", "Im zeta"),
        "</svg>",
    ]
    return "\n".join(body) + "\n"


def render_svg(plot: dict) -> str:
    kind = plot.get("kind")
    if kind == "flatness":
        return flatness_svg(plot["angles"], plot["values"])
    if kind == "slice":
        return slice_svg(plot["zeta"], plot["verdicts"], plot.get("boundary", ()))
    raise ValueError(f"unknown plot kind {kind!r}")
