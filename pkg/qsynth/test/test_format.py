"""
Tests for circuit export and import.
"""

import json

import numpy as np

from qsynth import CheckpointError, export, import_circuit, initial_circuit
from qsynth.circuit import append_action, append_basis_correction, append_gate
from qsynth.format import circuit_sequence, format_sequence, parse_sequence
from qsynth.qcore import RY
from qsynth.test.arrays import ArrayTestCase


def sample_circuit():
    circuit = initial_circuit(2)
    circuit = append_action(circuit, (1, 0))
    circuit = append_gate(circuit, RY, (1,))
    circuit = append_basis_correction(circuit, 0b10)
    params = np.linspace(-1.0, 1.0, circuit.n_params) / 3.0
    return circuit, params


class TestExport(ArrayTestCase):
    def test_text_layout(self):
        circuit, params = sample_circuit()
        lines = export(circuit, params).decode("utf-8").splitlines()
        self.assertEqual(lines[0], "# qsynth circuit: 2 qubits, 13 params")
        self.assertEqual(lines[3], "cx 1,0")
        self.assertTrue(lines[1].startswith("u3(") and lines[1].endswith(") 0"))
        self.assertEqual(lines[-1], "x 0")
        self.assertEqual(lines[-2], f"ry({float(params[12])!r}) 1")

    def test_json_layout(self):
        circuit, params = sample_circuit()
        record = json.loads(export(circuit, params, "json"))
        self.assertEqual(record["format"], "qsynth-circuit")
        self.assertEqual(record["version"], 1)
        self.assertEqual(record["n_qubits"], 2)
        self.assertEqual(record["ops"][2], {"gate": "cx", "qubits": [1, 0]})
        self.assertEqual(record["ops"][3], {"gate": "u3", "qubits": [1], "slot": 6})
        self.assertEqual(len(record["params"]), 13)

    def test_import_inverts_export(self):
        circuit, params = sample_circuit()
        for format in ["text", "json"]:
            with self.subTest(format=format):
                data = export(circuit, params, format)
                imported, values = import_circuit(data, format)
                self.assertEqual(imported, circuit)
                self.assertArraysClose(values, params, atol=0.0)

    def test_json_reexport_is_identical(self):
        circuit, params = sample_circuit()
        data = export(circuit, params, "json")
        self.assertEqual(export(*import_circuit(data), "json"), data)

    def test_export_errors(self):
        circuit, params = sample_circuit()
        with self.assertRaises(ValueError):
            export(circuit, params[:-1])
        with self.assertRaises(ValueError):
            export(circuit, params, "qasm")


class TestImportErrors(ArrayTestCase):
    def test_bad_json(self):
        circuit, params = sample_circuit()
        good = json.loads(export(circuit, params, "json"))
        test_cases = [
            b"not json",
            b"[1, 2]",
            json.dumps(dict(good, format="other")).encode(),
            json.dumps(dict(good, version=2)).encode(),
            json.dumps(dict(good, n_params=12)).encode(),
            json.dumps(dict(good, params=good["params"][:-1])).encode(),
            json.dumps({k: v for k, v in good.items() if k != "ops"}).encode(),
        ]
        for data in test_cases:
            with self.subTest(data=data):
                with self.assertRaises(CheckpointError):
                    import_circuit(data)

    def test_bad_text(self):
        test_cases = [
            b"",
            b"cx 0,1\n",
            b"# qsynth circuit: 2 qubits, 0 params\nswap 0,1\n",
            b"# qsynth circuit: 2 qubits, 0 params\ncx 0,0\n",
            b"# qsynth circuit: 1 qubits, 3 params\nu3(0.1,0.2) 0\n",
            b"# qsynth circuit: 1 qubits, 2 params\nry(0.5) 0\n",
        ]
        for data in test_cases:
            with self.subTest(data=data):
                with self.assertRaises(CheckpointError):
                    import_circuit(data, "text")

    def test_checkpoint_error_is_a_value_error(self):
        with self.assertRaises(ValueError):
            import_circuit(b"{}")


class TestSequences(ArrayTestCase):
    def test_format_sequence(self):
        self.assertEqual(format_sequence([(0, 1), (2, 1)]), "0-1, 2-1")
        self.assertEqual(format_sequence([]), "")

    def test_parse_sequence(self):
        test_cases = [
            ("0-1, 2-1", [(0, 1), (2, 1)]),
            ("3 - 4", [(3, 4)]),
            ("", []),
            ("   ", []),
        ]
        for text, expected in test_cases:
            with self.subTest(text=text):
                self.assertEqual(parse_sequence(text), expected)
        for text in ["0-1,", "0+1", "a-b"]:
            with self.subTest(text=text):
                with self.assertRaises(ValueError):
                    parse_sequence(text)

    def test_circuit_sequence(self):
        circuit, _ = sample_circuit()
        self.assertEqual(circuit_sequence(circuit), "1-0")
