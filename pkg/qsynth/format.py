"""
Circuit export and import.

Two formats are supported:

text
    A header line followed by one gate per line: ``cx c,t``,
    ``u3(theta,phi,lam) q``, ``ry(a) q``, ``rz(a) q`` or ``x q``. Angles are
    written with full float precision. Meant for reading, but parseable.
json
    ``{"format": "qsynth-circuit", "version": 1, "n_qubits", "n_params",
    "ops", "params"}`` with sorted keys and two-space indentation; each op is
    ``{"gate", "qubits"}`` plus ``"slot"`` for parameterized gates. Exporting
    an imported file reproduces it byte for byte.

CNOT sequences are written in "control-target" notation: ``0-1, 1-2``.
"""

import json
import re

import numpy as np

from qsynth.circuit import check_circuit
from qsynth.core import Circuit, GateOp
from qsynth.errors import CheckpointError
from qsynth.qcore import CX, NUM_PARAMS

_FORMAT_NAME = "qsynth-circuit"
_FORMAT_VERSION = 1

_HEADER_PATTERN = re.compile(
    r"""
    \A\#\ qsynth\ circuit:
    \ (?P<n_qubits>\d+)\ qubits,
    \ (?P<n_params>\d+)\ params\Z
    """,
    re.VERBOSE,
)

_LINE_PATTERN = re.compile(
    r"""
    \A(?P<gate>cx|u3|ry|rz|x)
    (?:\((?P<angles>[^)]*)\))?
    \ (?P<qubits>\d+(?:,\d+)?)\Z
    """,
    re.VERBOSE,
)

_PAIR_PATTERN = re.compile(r"\A\s*(\d+)\s*-\s*(\d+)\s*\Z")


def _export_text(circuit, params):
    lines = [f"# qsynth circuit: {circuit.n_qubits} qubits, {circuit.n_params} params"]
    for op in circuit.ops:
        qubits = ",".join(str(q) for q in op.qubits)
        k = NUM_PARAMS[op.kind]
        if k:
            angles = ",".join(repr(float(a)) for a in params[op.slot : op.slot + k])
            lines.append(f"{op.kind}({angles}) {qubits}")
        else:
            lines.append(f"{op.kind} {qubits}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def _export_json(circuit, params):
    ops = []
    for op in circuit.ops:
        entry = {"gate": op.kind, "qubits": list(op.qubits)}
        if op.slot is not None:
            entry["slot"] = op.slot
        ops.append(entry)
    record = {
        "format": _FORMAT_NAME,
        "version": _FORMAT_VERSION,
        "n_qubits": circuit.n_qubits,
        "n_params": circuit.n_params,
        "ops": ops,
        "params": [float(p) for p in params],
    }
    return (json.dumps(record, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _import_text(data):
    lines = data.decode("utf-8").splitlines()
    header = _HEADER_PATTERN.match(lines[0]) if lines else None
    if header is None:
        raise CheckpointError("text circuit must start with a qsynth header line")
    n_params = int(header.group("n_params"))
    ops, params = [], []
    for line in lines[1:]:
        match = _LINE_PATTERN.match(line)
        if match is None:
            raise CheckpointError(f"invalid circuit line: {line!r}")
        kind = match.group("gate")
        qubits = tuple(int(q) for q in match.group("qubits").split(","))
        angles = match.group("angles")
        if NUM_PARAMS[kind]:
            values = [float(a) for a in (angles or "").split(",") if a]
            if len(values) != NUM_PARAMS[kind]:
                raise CheckpointError(f"wrong number of angles: {line!r}")
            ops.append(GateOp(kind, qubits, len(params)))
            params.extend(values)
        else:
            ops.append(GateOp(kind, qubits, None))
    if len(params) != n_params:
        raise CheckpointError(f"header declares {n_params} params; found {len(params)}")
    circuit = Circuit(int(header.group("n_qubits")), tuple(ops), n_params)
    try:
        check_circuit(circuit)
    except ValueError as exc:
        raise CheckpointError(f"inconsistent circuit: {exc}") from None
    return circuit, np.array(params, dtype=float)


def _import_json(data):
    try:
        record = json.loads(data.decode("utf-8"))
    except ValueError as exc:
        raise CheckpointError(f"circuit file is not valid json: {exc}") from None
    if not isinstance(record, dict) or record.get("format") != _FORMAT_NAME:
        raise CheckpointError("not a qsynth circuit file")
    if record.get("version") != _FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported circuit file version; got {record.get('version')!r}"
        )
    try:
        ops = tuple(
            GateOp(entry["gate"], tuple(entry["qubits"]), entry.get("slot"))
            for entry in record["ops"]
        )
        circuit = Circuit(record["n_qubits"], ops, record["n_params"])
        params = np.array(record["params"], dtype=float)
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"malformed circuit file: {exc!r}") from None
    try:
        check_circuit(circuit)
    except ValueError as exc:
        raise CheckpointError(f"inconsistent circuit: {exc}") from None
    if params.shape != (circuit.n_params,):
        raise CheckpointError("parameter list does not match n_params")
    return circuit, params


_EXPORTERS = {"text": _export_text, "json": _export_json}
_IMPORTERS = {"text": _import_text, "json": _import_json}


def export(circuit, params, format="text"):
    """
    Serialize a circuit with bound parameters.

    Parameters
    ----------
    circuit : Circuit
    params : sequence of float
        One value per parameter slot.
    format : {"text", "json"}

    Returns
    -------
    data : bytes
    """
    if format not in _EXPORTERS:
        raise ValueError(f"unknown circuit format; got {format!r}")
    params = np.asarray(params, dtype=float)
    if params.shape != (circuit.n_params,):
        raise ValueError(
            f"circuit takes {circuit.n_params} parameters; got shape {params.shape}"
        )
    return _EXPORTERS[format](circuit, params)


def import_circuit(data, format="json"):
    """
    Inverse of export: returns (circuit, params).

    Raises
    ------
    CheckpointError
        If the data is not a circuit of the given format.
    """
    if format not in _IMPORTERS:
        raise ValueError(f"unknown circuit format; got {format!r}")
    return _IMPORTERS[format](data)


def format_sequence(sequence):
    """
    CNOT pairs in "control-target" notation, e.g. "0-1, 1-2".
    """
    return ", ".join(f"{c}-{t}" for c, t in sequence)


def parse_sequence(text):
    """
    Inverse of format_sequence. An empty or blank string is the empty
    sequence.
    """
    if not text.strip():
        return []
    pairs = []
    for part in text.split(","):
        match = _PAIR_PATTERN.match(part)
        if match is None:
            raise ValueError(f"invalid control-target pair; got {part!r}")
        pairs.append((int(match.group(1)), int(match.group(2))))
    return pairs


def circuit_sequence(circuit):
    """
    The circuit's CNOTs in "control-target" notation.
    """
    return format_sequence(op.qubits for op in circuit.ops if op.kind == CX)
