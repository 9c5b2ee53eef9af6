"""Command-line front end and the text circuit format.

Circuit grammar (one statement per line, ``#`` starts a comment)::

    qubits N
    cbits M
    gate NAME q...
    gate matrix [[a, b], [c, d]] q...
    measure q -> cK
    bell q1 q2 -> cX cZ
    cif EXPR gate NAME q...
    reset q

EXPR combines classical bits ``c0, c1, ...`` and constants ``0``/``1`` with
``!`` (tightest), ``==``, ``&`` and ``|`` (loosest), parentheses, and
``maj(c0, c1, c2)``.  ``render_circuit`` emits the canonical form, which
``parse_circuit`` reads back to the same text.
"""

from __future__ import annotations

import argparse
import ast
import json
import re
import sys
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import __version__
from .circuit import (
    BellOp,
    Binary,
    Bit,
    Circuit,
    CondGateOp,
    Condition,
    Const,
    GateOp,
    Majority,
    MeasureOp,
    Not,
    ResetOp,
)
from .gates import GateUnitary, resolve

SCHEMA_VERSION = 1
DIGITS = 12


class CircuitParseError(ValueError):
    kind = "parse"

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


class CircuitSyntaxError(CircuitParseError):
    kind = "syntax"


class CircuitRangeError(CircuitParseError):
    kind = "range"


# condition expressions

_EXPR_TOKEN = re.compile(r"\s*(?:(c\d+)|(maj)\b|([01])(?!\d)|(==)|([&|!(),]))")


@dataclass
class _Tok:
    kind: str
    text: str
    col: int


def _tokenize_expr(text: str, line: int, col0: int) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _EXPR_TOKEN.match(text, pos)
        if not m:
            j = len(text) - len(text[pos:].lstrip())
            raise CircuitSyntaxError(f"unexpected {text[j:].split()[0]!r} in condition", line, col0 + j)
        kinds = ("bit", "maj", "const", "==", "sym")
        for kind, g in zip(kinds, m.groups()):
            if g is not None:
                start = m.start(m.lastindex)
                toks.append(_Tok(g if kind == "sym" else kind, g, col0 + start))
        pos = m.end()
    return toks


class _ExprParser:
    def __init__(self, toks: list[_Tok], line: int, end_col: int):
        self.toks = toks
        self.i = 0
        self.line = line
        self.end_col = end_col

    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def fail(self, msg: str):
        tok = self.peek()
        raise CircuitSyntaxError(msg, self.line, tok.col if tok else self.end_col)

    def take(self, kind: str) -> _Tok:
        tok = self.peek()
        if tok is None or tok.kind != kind:
            self.fail(f"expected {kind!r}")
        self.i += 1
        return tok

    def parse(self) -> Condition:
        if not self.toks:
            self.fail("empty condition")
        c = self.disj()
        if self.peek() is not None:
            self.fail(f"unexpected {self.peek().text!r} in condition")
        return c

    def _chain(self, op: str, sub) -> Condition:
        left = sub()
        while self.peek() is not None and self.peek().kind == op:
            self.i += 1
            left = Binary(op, left, sub())
        return left

    def disj(self):
        return self._chain("|", self.conj)

    def conj(self):
        return self._chain("&", self.equality)

    def equality(self):
        return self._chain("==", self.unary)

    def unary(self) -> Condition:
        tok = self.peek()
        if tok is not None and tok.kind == "!":
            self.i += 1
            return Not(self.unary())
        return self.atom()

    def atom(self) -> Condition:
        tok = self.peek()
        if tok is None:
            self.fail("condition ends early")
        if tok.kind == "bit":
            self.i += 1
            return Bit(int(tok.text[1:]))
        if tok.kind == "const":
            self.i += 1
            return Const(int(tok.text))
        if tok.kind == "maj":
            self.i += 1
            self.take("(")
            idx = [int(self.take("bit").text[1:])]
            while self.peek() is not None and self.peek().kind == ",":
                self.i += 1
                idx.append(int(self.take("bit").text[1:]))
            self.take(")")
            return Majority(tuple(idx))
        if tok.kind == "(":
            self.i += 1
            c = self.disj()
            self.take(")")
            return c
        self.fail(f"unexpected {tok.text!r} in condition")


def parse_condition(text: str, line: int = 1, col0: int = 1) -> Condition:
    return _ExprParser(_tokenize_expr(text, line, col0), line, col0 + len(text)).parse()


# statements

_QUBIT = re.compile(r"^q?(\d+)$")
_CBIT = re.compile(r"^c?(\d+)$")


def _words(text: str, col0: int) -> list[tuple[str, int]]:
    return [(m.group(), col0 + m.start()) for m in re.finditer(r"\S+", text)]


def _index(tok: tuple[str, int], pattern: re.Pattern, what: str, line: int) -> tuple[int, int]:
    m = pattern.match(tok[0])
    if not m:
        raise CircuitSyntaxError(f"expected a {what} index, got {tok[0]!r}", line, tok[1])
    return int(m.group(1)), tok[1]


def _parse_gate(text: str, col0: int, line: int) -> tuple[GateUnitary, list[tuple[int, int]]]:
    """``NAME q...`` or ``matrix [[...]] q...`` (text after the ``gate`` keyword)."""
    stripped = text.lstrip()
    col = col0 + len(text) - len(stripped)
    if not stripped:
        raise CircuitSyntaxError("gate needs a name", line, col)
    if stripped.startswith("matrix"):
        rest = stripped[len("matrix") :]
        start = rest.find("[")
        if start < 0 or rest[:start].strip():
            raise CircuitSyntaxError("expected a matrix literal after 'matrix'", line, col + len("matrix"))
        depth = 0
        end = None
        for j in range(start, len(rest)):
            if rest[j] == "[":
                depth += 1
            elif rest[j] == "]":
                depth -= 1
                if depth == 0:
                    end = j + 1
                    break
        lit_col = col + len("matrix") + start
        if end is None:
            raise CircuitSyntaxError("unbalanced brackets in matrix literal", line, lit_col)
        try:
            m = np.array(ast.literal_eval(rest[start:end]), dtype=complex)
            g = GateUnitary(m)
        except (ValueError, SyntaxError, TypeError) as exc:
            raise CircuitSyntaxError(f"bad matrix literal: {exc}", line, lit_col) from None
        qtoks = _words(rest[end:], col + len("matrix") + end)
    else:
        words = _words(stripped, col)
        name, ncol = words[0]
        try:
            g = resolve(name)
        except (KeyError, ValueError):
            raise CircuitSyntaxError(f"unknown gate {name!r}", line, ncol) from None
        qtoks = words[1:]
    qubits = [_index(t, _QUBIT, "qubit", line) for t in qtoks]
    if len(qubits) != g.n:
        raise CircuitSyntaxError(f"gate {g.label} acts on {g.n} qubit(s), got {len(qubits)}", line, col)
    return g, qubits


def _check_range(idx: list[tuple[int, int]], limit: int, what: str, line: int) -> None:
    for i, col in idx:
        if i >= limit:
            raise CircuitRangeError(f"{what} {i} out of range (have {limit})", line, col)
    seen = set()
    for i, col in idx:
        if what == "qubit" and i in seen:
            raise CircuitRangeError(f"qubit {i} used twice in one statement", line, col)
        seen.add(i)


def parse_circuit(text: str) -> Circuit:
    n_qubits = None
    n_cbits = 0
    ops = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].rstrip()
        if not body.strip():
            continue
        words = _words(body, 1)
        key, kcol = words[0]
        after = body[kcol - 1 + len(key) :]
        acol = kcol + len(key)
        if key in ("qubits", "cbits"):
            if ops or (key == "qubits" and n_qubits is not None) or (key == "cbits" and n_qubits is None):
                raise CircuitSyntaxError(f"'{key}' is out of place (header is 'qubits' then 'cbits')", lineno, kcol)
            if len(words) != 2 or not words[1][0].isdigit():
                raise CircuitSyntaxError(f"'{key}' needs one non-negative integer", lineno, kcol)
            value = int(words[1][0])
            if key == "qubits":
                if value < 1:
                    raise CircuitSyntaxError("need at least one qubit", lineno, words[1][1])
                n_qubits = value
            else:
                n_cbits = value
            continue
        if n_qubits is None:
            raise CircuitSyntaxError("circuit must start with 'qubits N'", lineno, kcol)
        if key == "gate":
            g, qs = _parse_gate(after, acol, lineno)
            _check_range(qs, n_qubits, "qubit", lineno)
            ops.append(GateOp(g, tuple(q for q, _ in qs)))
        elif key == "reset":
            if len(words) != 2:
                raise CircuitSyntaxError("reset takes one qubit", lineno, kcol)
            q = _index(words[1], _QUBIT, "qubit", lineno)
            _check_range([q], n_qubits, "qubit", lineno)
            ops.append(ResetOp(q[0]))
        elif key in ("measure", "bell"):
            arity = 1 if key == "measure" else 2
            toks = words[1:]
            arrow = [j for j, t in enumerate(toks) if t[0] == "->"]
            if len(arrow) != 1 or arrow[0] != arity or len(toks) != 2 * arity + 1:
                form = "measure q -> c" if key == "measure" else "bell q1 q2 -> c1 c2"
                raise CircuitSyntaxError(f"expected '{form}'", lineno, kcol)
            qs = [_index(t, _QUBIT, "qubit", lineno) for t in toks[:arity]]
            cs = [_index(t, _CBIT, "classical bit", lineno) for t in toks[arity + 1 :]]
            _check_range(qs, n_qubits, "qubit", lineno)
            _check_range(cs, n_cbits, "classical bit", lineno)
            if key == "measure":
                ops.append(MeasureOp(qs[0][0], cs[0][0]))
            else:
                if cs[0][0] == cs[1][0]:
                    raise CircuitRangeError("bell needs two distinct classical bits", lineno, cs[1][1])
                ops.append(BellOp(qs[0][0], qs[1][0], cs[0][0], cs[1][0]))
        elif key == "cif":
            m = re.search(r"(?<!\S)gate(?!\S)", after)
            if not m:
                raise CircuitSyntaxError("cif needs 'gate' after its condition", lineno, acol)
            cond = parse_condition(after[: m.start()], lineno, acol)
            for b in sorted(cond.bits_used()):
                if b >= n_cbits:
                    raise CircuitRangeError(f"classical bit {b} out of range (have {n_cbits})", lineno, acol)
            g, qs = _parse_gate(after[m.end() :], acol + m.end(), lineno)
            _check_range(qs, n_qubits, "qubit", lineno)
            ops.append(CondGateOp(cond, g, tuple(q for q, _ in qs)))
        else:
            raise CircuitSyntaxError(f"unknown statement {key!r}", lineno, kcol)
    if n_qubits is None:
        raise CircuitSyntaxError("empty circuit: expected 'qubits N'", 1, 1)
    return Circuit(n_qubits, n_cbits, ops)


def _render_gate(g: GateUnitary) -> str:
    if g.name is not None:
        try:
            if np.array_equal(resolve(g.name).matrix, g.matrix):
                return g.name
        except (KeyError, ValueError):
            pass
    rows = ", ".join("[" + ", ".join(repr(complex(v)) for v in row) + "]" for row in g.matrix)
    return f"matrix [{rows}]"


def render_circuit(circuit: Circuit) -> str:
    lines = [f"qubits {circuit.n_qubits}", f"cbits {circuit.n_cbits}"]
    for op in circuit.ops:
        if isinstance(op, GateOp):
            lines.append(f"gate {_render_gate(op.gate)} " + " ".join(map(str, op.targets)))
        elif isinstance(op, MeasureOp):
            lines.append(f"measure {op.qubit} -> c{op.cbit}")
        elif isinstance(op, BellOp):
            lines.append(f"bell {op.q1} {op.q2} -> c{op.cbit_x} c{op.cbit_z}")
        elif isinstance(op, CondGateOp):
            lines.append(f"cif {op.condition.render()} gate {_render_gate(op.gate)} " + " ".join(map(str, op.targets)))
        elif isinstance(op, ResetOp):
            lines.append(f"reset {op.qubit}")
    return "\n".join(lines) + "\n"


# JSON helpers


def _num(x: float) -> float:
    return round(float(x), DIGITS) + 0.0


def amplitudes(state) -> list[dict]:
    return [{"index": i, "re": _num(a.real), "im": _num(a.imag)} for i, a in enumerate(state.amps)]


def _emit(payload: dict) -> str:
    return json.dumps({"schema_version": SCHEMA_VERSION, **payload}, sort_keys=True, default=_plain)


def _plain(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def parse_state(spec: str, n: int | None, seed: int | None):
    """``random``, ``+``/``-`` strings, bit strings like ``010``, or a JSON list of amplitudes."""
    state = _read_state(spec.strip(), n, seed)
    if n is not None and state.n != n:
        raise ValueError(f"state spec {spec!r} has {state.n} qubits, expected {n}")
    return state


def _read_state(spec: str, n: int | None, seed: int | None):
    from .statevector import StateVector

    if spec == "random":
        if n is None:
            raise ValueError("--input random needs a qubit count")
        return StateVector.random(n, np.random.default_rng(seed))
    if spec.startswith("["):
        vals = json.loads(spec)
        amps = np.array([complex(v[0], v[1]) if isinstance(v, list) else complex(v) for v in vals])
        return StateVector.from_amplitudes(amps / np.linalg.norm(amps))
    if re.fullmatch(r"[01+\-]+", spec):
        factors = {
            "0": np.array([1, 0]),
            "1": np.array([0, 1]),
            "+": np.array([1, 1]) / np.sqrt(2),
            "-": np.array([1, -1]) / np.sqrt(2),
        }
        amps = np.array([1.0 + 0j])
        for ch in spec:  # character j is qubit j
            amps = np.kron(factors[ch], amps)
        return StateVector.from_amplitudes(amps)
    raise ValueError(f"cannot read state spec {spec!r}")


# subcommands


def cmd_simulate(args) -> dict:
    from .statevector import run_circuit

    with open(args.file, encoding="utf-8") as fh:
        circuit = parse_circuit(fh.read())
    initial = parse_state(args.input, circuit.n_qubits, args.seed) if args.input else None
    result = run_circuit(circuit, initial, args.mode, args.seed)
    return {
        "command": "simulate",
        "mode": args.mode,
        "n_qubits": circuit.n_qubits,
        "n_cbits": circuit.n_cbits,
        "warnings": circuit.lint(),
        "branches": [
            {"bits": list(b.bits), "probability": _num(b.probability), "amplitudes": amplitudes(b.state)}
            for b in result
        ],
    }


def cmd_classify(args) -> dict:
    from .clifford import hierarchy_level

    g = resolve(args.gate)
    h = hierarchy_level(g, args.kmax)
    return {
        "command": "classify",
        "gate": g.label,
        "n": g.n,
        "k_max": args.kmax,
        "level": h.level,
        "above_k_max": h.above_k_max,
        "witness": None if h.witness is None else str(h.witness),
    }


def cmd_teleport(args) -> dict:
    from .statevector import apply_gate, equal_up_to_global_phase
    from .teleport import correction_table, teleport, teleport_gate

    if args.gate is None:
        state = parse_state(args.input, args.n or 1, args.seed)
        branches = teleport(state, args.mode, args.seed)
        want, table = state, None
        label = "teleport"
    else:
        g = resolve(args.gate)
        n = args.n or g.n
        state = parse_state(args.input, n, args.seed)
        table = correction_table(g, n)
        branches = teleport_gate(table.gate, state, args.mode, args.seed, table)
        want = apply_gate(state, table.gate, list(range(n)))
        label = table.gate.label
    rows = []
    for b in branches:
        row = {
            "outcome": list(b.bits),
            "probability": _num(b.probability),
            "fidelity": _num(b.state.fidelity(want)),
            "matches": equal_up_to_global_phase(b.state, want),
        }
        if table is not None:
            entry = table[b.bits]
            row["correction_level"] = entry.level
            row["correction"] = entry.describe()
        rows.append(row)
    return {
        "command": "teleport",
        "gate": label,
        "n": state.n,
        "input": amplitudes(state),
        "branches": rows,
        "all_match": all(r["matches"] for r in rows),
    }


def cmd_prepare_ancilla(args) -> dict:
    from .statevector import expectation
    from .teleport import make_chi, prepare_psi_u, stabilizer_conditions

    if args.chi:
        res = make_chi(args.chi)
        return {
            "command": "prepare-ancilla",
            "kind": "chi",
            "source": args.chi,
            "roles": {k: list(v) for k, v in res.roles.items()},
            "amplitudes": amplitudes(res.state),
        }
    res = prepare_psi_u(args.gate, args.n, args.method, args.mode, args.seed)
    conds = stabilizer_conditions(_widen(args.gate, args.n))
    report = {c.label: _num(expectation(res.state, c.matrix).real) for c in conds}
    payload = {
        "command": "prepare-ancilla",
        "kind": "psi_u",
        "gate": args.gate,
        "n": len(res.roles["upper"]),
        "method": args.method,
        "roles": {k: list(v) for k, v in res.roles.items()},
        "amplitudes": amplitudes(res.state),
        "stabilizer_eigenvalues": report,
    }
    if res.branches is not None:
        payload["measurement_branches"] = [
            {
                "bits": list(b.bits),
                "probability": _num(b.probability),
                "stabilizer_eigenvalues": {c.label: _num(expectation(b.state, c.matrix).real) for c in conds},
            }
            for b in res.branches
        ]
    return payload


def _widen(name: str, n: int) -> GateUnitary:
    from .teleport import _as_gate

    return _as_gate(name, n)


def _protocol_from_args(args):
    from .ftmeasure import BlockSpec, MeasurableOperator, ft_measure_protocol, nested_protocol

    op = MeasurableOperator.from_pauli(args.inner if args.nested else args.operator)
    block = BlockSpec.parse(args.block) if args.block else BlockSpec(op.n)
    state = parse_state(args.input, op.n, args.seed) if args.input else _default_data(op)
    if args.nested:
        outer = len(args.operator)
        from .ftmeasure import eigen_split

        alpha, beta, _, _ = eigen_split(op, state)
        return nested_protocol(state, op, outer, alpha, beta, block, args.r), op, state
    return ft_measure_protocol(state, op, block, args.r), op, state


def _default_data(op):
    from .statevector import StateVector

    return StateVector.zero(op.n) if "X" in op.name or "Y" in op.name else StateVector.plus(op.n)


def _parse_fault(text: str):
    from .ftmeasure import FaultSpec

    parts = text.split(",")
    if len(parts) != 3:
        raise ValueError(f"fault must look like OP,QUBIT,PAULI, got {text!r}")
    return FaultSpec(int(parts[0]), int(parts[1]), parts[2].strip().upper())


def cmd_ft_demo(args) -> dict:
    from .ftmeasure import BlockSpec, MeasurableOperator, ft_measure, nested_measure

    faults = [_parse_fault(f) for f in args.fault]
    if args.nested:
        op = MeasurableOperator.from_pauli(args.inner)
        block = BlockSpec.parse(args.block) if args.block else BlockSpec(op.n)
        state = parse_state(args.input, op.n, args.seed) if args.input else _default_data(op)
        res = nested_measure(state, op, len(args.operator), None, block, args.r, faults, args.mode, args.seed)
        rows = []
        for b in res.branches:
            inner_fid = res.inner_fidelity(b)
            row = {"bits": list(b.bits), "probability": _num(b.probability), "inner_zero_fidelity": _num(inner_fid)}
            if inner_fid > 1 - 1e-9:
                from .statevector import factor_out

                final = factor_out(b.state, res.protocol.roles["data"] + res.protocol.roles["outer"])
                row["final_fidelity"] = _num(final.fidelity(res.expected_final))
                row["final_amplitudes"] = amplitudes(final)
            rows.append(row)
        after = [
            _num(abs(np.vdot(res.expected_after.amps, b.state.amps)) ** 2 / max(b.probability, 1e-300))
            for b in res.after_trials
        ]
        return {
            "command": "ft-demo",
            "nested": True,
            "outer_size": len(args.operator),
            "inner": op.name,
            "r": args.r,
            "alpha": [_num(complex(res.alpha).real), _num(complex(res.alpha).imag)],
            "beta": [_num(complex(res.beta).real), _num(complex(res.beta).imag)],
            "after_trials_overlap": after,
            "branches": rows,
        }
    op = MeasurableOperator.from_pauli(args.operator)
    block = BlockSpec.parse(args.block) if args.block else BlockSpec(op.n)
    state = parse_state(args.input, op.n, args.seed) if args.input else _default_data(op)
    res = ft_measure(state, op, block, args.r, faults, args.mode, args.seed)
    return {
        "command": "ft-demo",
        "nested": False,
        "operator": op.name,
        "block": {"n_block": block.n_block, "code": block.code},
        "r": args.r,
        "faults": [f.as_dict() for f in faults],
        "cat_preparations": res.cat_attempts,
        "branches": [
            {
                "majority": b.majority,
                "probability": _num(b.probability),
                "trials": [
                    {"trial": t.trial, "bit": t.decoded_bit, "probability": _num(t.probability), "fingerprint": t.fingerprint}
                    for t in b.trials
                ],
                "data_amplitudes": amplitudes(b.data_state),
            }
            for b in res.branches
        ],
    }


def cmd_fault_sweep(args) -> dict:
    from .ftmeasure import fault_sweep

    kind, _, rest = args.protocol.partition(":")
    if kind == "ft":
        args.nested, args.operator, args.inner = False, rest, None
    elif kind == "nested":
        outer, _, inner = rest.partition(":")
        if not outer.isdigit():
            raise ValueError("nested protocol spec is nested:OUTER_SIZE:OPERATOR")
        args.nested, args.operator, args.inner = True, "Z" * int(outer), inner
    else:
        raise ValueError(f"protocol spec must start with 'ft:' or 'nested:', got {args.protocol!r}")
    protocol, op, _ = _protocol_from_args(args)
    reports = fault_sweep(protocol, args.paulis)
    confined = [r for r in reports if r.confined_to_one_trial]
    return {
        "command": "fault-sweep",
        "protocol": args.protocol,
        "r": args.r,
        "n_ops": len(protocol.ops),
        "n_faults": len(reports),
        "summary": {
            "max_data_weight": max((max(r.data_weight_per_block) for r in reports), default=0),
            "weight_bound_holds": all(max(r.data_weight_per_block) <= 1 for r in reports),
            "confined_faults": len(confined),
            "confined_majority_changes": sum(r.majority_changed for r in confined),
            "decoded_bit_flips": sum(r.decoded_bit_flipped for r in reports),
            "cat_rejections": sum(r.cat_rejected for r in reports),
            "outer_collapses": sum(r.outer_collapse for r in reports),
        },
        "reports": [r.as_dict() for r in reports],
    }


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="teleportal", description="Teleportation-based gate constructions, simulated exactly.")
    p.add_argument("--version", action="version", version=f"teleportal {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def run_opts(sp):
        sp.add_argument("--mode", choices=("enumerate", "sample"), default="enumerate")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("simulate", help="run a circuit file")
    sp.add_argument("file")
    sp.add_argument("--input", help="initial state spec (default |0...0>)")
    run_opts(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("classify", help="Clifford hierarchy level of a library gate")
    sp.add_argument("gate")
    sp.add_argument("--kmax", type=int, default=5)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("teleport", help="teleport a state, optionally through a gate")
    sp.add_argument("--gate")
    sp.add_argument("--input", default="random")
    sp.add_argument("--n", type=int)
    run_opts(sp)
    sp.set_defaults(func=cmd_teleport)

    sp = sub.add_parser("prepare-ancilla", help="build Psi_U or the chi resource")
    sp.add_argument("--gate", default="I")
    sp.add_argument("--n", type=int)
    sp.add_argument("--method", choices=("direct", "measurement"), default="direct")
    sp.add_argument("--chi", choices=("from_epr", "from_ghz", "direct"))
    run_opts(sp)
    sp.set_defaults(func=cmd_prepare_ancilla)

    def ft_opts(sp):
        sp.add_argument("--block", help="CODE:SIZE, e.g. unencoded:3 or repetition3:3")
        sp.add_argument("--r", type=int, default=3)
        sp.add_argument("--input", help="data state spec")

    sp = sub.add_parser("ft-demo", help="cat-controlled measurement, optionally nested")
    sp.add_argument("--operator", default="ZZZ", help="Pauli to measure, or the outer operator with --nested")
    sp.add_argument("--nested", action="store_true")
    sp.add_argument("--inner", default="Z")
    sp.add_argument("--fault", action="append", default=[], help="OP,QUBIT,PAULI")
    ft_opts(sp)
    run_opts(sp)
    sp.set_defaults(func=cmd_ft_demo)

    sp = sub.add_parser("fault-sweep", help="single-fault sweep over a protocol schedule")
    sp.add_argument("--protocol", default="ft:ZZZ", help="ft:OPERATOR or nested:OUTER_SIZE:OPERATOR")
    sp.add_argument("--paulis", default="XYZ")
    ft_opts(sp)
    run_opts(sp)
    sp.set_defaults(func=cmd_fault_sweep)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        payload = args.func(args)
    except CircuitParseError as exc:
        err = {"type": exc.kind, "message": exc.message, "line": exc.line, "column": exc.column}
        print(_emit({"error": err}))
        return 1
    except (ValueError, KeyError, IndexError, OSError, RuntimeError) as exc:
        print(_emit({"error": {"type": type(exc).__name__, "message": str(exc).strip("'\"")}}))
        return 1
    print(_emit(payload))
    return 0


if __name__ == "__main__":
    sys.exit(main())
