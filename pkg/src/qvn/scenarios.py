"""Scenario execution, reports and qubit-budget checks.

A scenario is a JSON document with programs to store and an ordered list of
steps. Every step reports the number of qubits its own operation keeps live
at once; the report's peak is the maximum over steps.
"""
from __future__ import annotations

import json
import logging
import time
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import gates
from .core import (PureState, PVM, QuantumError, RandomSource, Unitary, fidelity,
                   haar_random_unitary)
from .duality import choi_of_unitary
from .jsonio import clean, matrix_from_json, vector_from_json
from .memory import (ACCEPT, MemoryUnit, ProgramSlot, parity_injection_gadget, read_out,
                     recover_probability, refresh, write_inject)
from .network import (ChannelModel, VerificationPlan, bb84_exchange, scheme1_send_bits,
                      scheme2_send_bits, scheme3_send_qubits, scheme4_send_via_ebits,
                      verify_program)
from .qcu import BlackBox, ControlSignal, FlagSpec, controlled_program, controlled_unknown, lcu_two
from .qpu import COMPOSERS, run_program_sequence
from .register import qubits_of
from .superchannel import apply_to_channel, apply_to_choi, random_superchannel

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
BUDGET_LIMIT = 19

EXPECTED_BUDGETS = {
    "store-qubit-gate": 2,
    "store-cz": 4,
    "compose-HT": 5,
    "superchannel-demo": 6,
    "superchannel-reduced": 4,
    "control-unknown": 5,
    "control-unknown-2q": 9,
    "download-ebit-qubit": 9,
    "download-ebit-2q": 17,
}


class ScenarioError(QuantumError):
    """Malformed or inconsistent scenario (exit code 2)."""


class ProtocolAbort(QuantumError):
    """A protocol aborted, e.g. on a high QBER (exit code 3)."""


# --------------------------------------------------------------------------- #
#                              loading / schemas                              #
# --------------------------------------------------------------------------- #

def _data(name: str):
    return resources.files("qvn") / "data" / name


def load_schema(kind: str) -> dict:
    return json.loads(_data(f"{kind}.schema.json").read_text())


def _schema_error(err: jsonschema.ValidationError) -> str:
    where = "/".join(str(p) for p in err.absolute_path) or "<root>"
    return f"field {where}: {err.message}"


def validate_scenario(data: dict) -> dict:
    try:
        jsonschema.validate(data, load_schema("scenario"))
    except jsonschema.ValidationError as err:
        raise ScenarioError(_schema_error(err)) from None
    labels = {p["label"] for p in data.get("programs", [])}
    if len(labels) != len(data.get("programs", [])):
        raise ScenarioError("field programs: duplicate labels")
    for i, step in enumerate(data["steps"]):
        for key in ("label", "earlier", "later", "claimed"):
            if key in step and step[key] not in labels:
                raise ScenarioError(f"field steps/{i}/{key}: undefined label {step[key]!r}")
        for key in ("labels", "sequence"):
            for entry in step.get(key, []):
                name = entry if isinstance(entry, str) else entry[0]
                if name not in labels:
                    raise ScenarioError(f"field steps/{i}/{key}: undefined label {name!r}")
        if "as" in step:
            labels.add(step["as"])
    return data


def load_scenario(path) -> dict:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as err:
        raise ScenarioError(f"line {err.lineno}, column {err.colno}: {err.msg}") from None
    return validate_scenario(data)


def list_scenarios() -> list[str]:
    folder = _data("scenarios")
    return sorted(p.name[:-5] for p in folder.iterdir() if p.name.endswith(".json"))


def builtin_scenario(name: str) -> dict:
    if name not in list_scenarios():
        raise ScenarioError(f"unknown demo {name!r}; available: {', '.join(list_scenarios())}")
    return validate_scenario(json.loads(_data(f"scenarios/{name}.json").read_text()))


# --------------------------------------------------------------------------- #
#                             state / basis specs                             #
# --------------------------------------------------------------------------- #

_KETS = {
    "0": np.array([1, 0]), "1": np.array([0, 1]),
    "+": np.array([1, 1]) / np.sqrt(2), "-": np.array([1, -1]) / np.sqrt(2),
    "r": np.array([1, 1j]) / np.sqrt(2), "l": np.array([1, -1j]) / np.sqrt(2),
}
_BASES = {"Z": np.eye(2), "X": gates.H.matrix,
          "Y": np.array([[1, 1], [1j, -1j]]) / np.sqrt(2)}


def parse_state(spec) -> PureState:
    """``"0+"``-style product strings (``r``/``l`` are the Y eigenstates) or amplitudes."""
    if isinstance(spec, str):
        v = np.ones(1, dtype=complex)
        for ch in spec:
            if ch not in _KETS:
                raise ScenarioError(f"unknown state symbol {ch!r}")
            v = np.kron(v, _KETS[ch])
        return PureState(v)
    return PureState.normalized(vector_from_json(spec))


def parse_readout(spec: str) -> PVM:
    b = np.ones((1, 1))
    for ch in spec:
        if ch not in _BASES:
            raise ScenarioError(f"unknown readout basis {ch!r}")
        b = np.kron(b, _BASES[ch])
    return PVM.from_basis(b.T)


# --------------------------------------------------------------------------- #
#                                  executor                                   #
# --------------------------------------------------------------------------- #

class Executor:
    def __init__(self, scenario: dict, rng: RandomSource, mode: str | None = None):
        self.scenario = scenario
        self.rng = rng
        self.mode = mode
        self.memory = MemoryUnit()
        self.channel = ChannelModel.from_dict(scenario.get("channel"))
        self.known: dict[str, Unitary] = {}
        self.gate_of: dict[str, list] = {}

    # programs ------------------------------------------------------------ #
    def _program(self, spec: dict) -> Unitary:
        if "gate" in spec:
            u = gates.gate(spec["gate"])
        elif "matrix" in spec:
            u = Unitary(matrix_from_json(spec["matrix"]))
        else:
            u = haar_random_unitary(int(spec["random"]), self.rng)
        return Unitary(u.matrix, spec["label"], u.dims)

    def store_programs(self):
        for spec in self.scenario.get("programs", []):
            self.known[spec["label"]] = self._program(spec)
            if "gate" in spec:
                self.gate_of[spec["label"]] = [spec["gate"]]

    def _slot(self, label: str) -> ProgramSlot:
        if label not in self.memory:
            self.memory.store(self.known[label], label)
        slot = self.memory[label]
        refresh(slot)
        return slot

    def _mode(self, step) -> str:
        return self.mode or step.get("mode", "deterministic")

    # steps --------------------------------------------------------------- #
    def run(self) -> list[dict]:
        """Run every step; on abort the completed steps stay in ``self.steps``."""
        self.store_programs()
        self.steps = []
        for i, step in enumerate(self.scenario["steps"]):
            rec = getattr(self, "_op_" + step["op"])(step)
            rec = {"step": i, "op": step["op"], **rec}
            log.info("step %d %s: %d qubits", i, step["op"], rec["qubits"])
            self.steps.append(rec)
        return self.steps

    def _op_store(self, step):
        slot = self._slot(step["label"])
        return {"label": step["label"], "qubits": slot.qubits}

    def _op_write(self, step):
        slot = self._slot(step["label"])
        psi = parse_state(step.get("input", "0" * qubits_of(slot.d_in)))
        readout = parse_readout(step.get("readout", "Z" * qubits_of(slot.d_out)))
        gadget = parity_injection_gadget(slot, psi)
        branches = write_inject(slot, psi)
        k = self.rng.choice([b.probability for b in branches])
        probs = [recover_probability(k, q, psi.dim) for q in
                 read_out(branches[k].head_state, readout)]
        u = self.known[step["label"]].matrix
        oracle = read_out(PureState(u @ psi.amplitudes), readout)
        refresh(slot)
        return {"branch": "accept" if k == ACCEPT else "complement",
                "probabilities": probs, "max_error": float(np.abs(probs - oracle).max()),
                "qubits": gadget.qubits_total}

    def _op_compose(self, step):
        mode = self._mode(step)
        earlier, later = self._slot(step["earlier"]), self._slot(step["later"])
        res = COMPOSERS[mode](earlier, later, self.rng)
        target = self.known[step["later"]] @ self.known[step["earlier"]]
        if not res.corrected:
            target = Unitary(self.known[step["later"]].matrix @ res.byproduct.matrix
                             @ self.known[step["earlier"]].matrix)
        fid = fidelity(res.choi.vector, choi_of_unitary(target).vector)
        if "as" in step:
            self.known[step["as"]] = Unitary(target.matrix, step["as"])
            self.memory.put(ProgramSlot(res.choi, step["as"], self.known[step["as"]]))
        refresh(earlier)
        refresh(later)
        return {"mode": mode, "outcome": res.outcome, "corrected": res.corrected,
                "outcome_bits": res.ancilla_bits_used, "fidelity": fid,
                "qubits": res.qubits_used}

    def _sequence(self, entries, mode, step):
        psi = parse_state(step.get("input", "0"))
        readout = parse_readout(step.get("readout", "Z"))
        res = run_program_sequence(self.memory, entries, psi, readout, mode, self.rng)
        total = np.eye(psi.dim, dtype=complex)
        for e in entries:
            name, on = (e, True) if isinstance(e, str) else e
            if on:
                total = self.known[name].matrix @ total
        oracle = read_out(PureState(total @ psi.amplitudes), readout)
        return {"mode": mode, "probabilities": res.probabilities,
                "max_error": float(np.abs(res.probabilities - oracle).max()),
                "fidelity": fidelity(res.choi.operator, choi_of_unitary(Unitary(total)).vector),
                "transcript": res.transcript, "qubits": res.peak_qubits}

    def _op_sequence(self, step):
        for name in step["labels"]:
            self._slot(name)
        return self._sequence(step["labels"], self._mode(step), step)

    def _op_switch(self, step):
        entries = [tuple(e) for e in step["sequence"]]
        for name, _ in entries:
            self._slot(name)
        return self._sequence(entries, "switch", step)

    def _flag(self, u: Unitary, step) -> FlagSpec:
        return FlagSpec.from_unitary(u, int(step.get("flag", 0)))

    def _control_signal(self, step) -> ControlSignal:
        c = step.get("control", [1, 1])
        a, b = complex(c[0]), complex(c[1])
        n = np.sqrt(abs(a) ** 2 + abs(b) ** 2)
        return ControlSignal.qubit(a / n, b / n)

    def _op_control(self, step):
        u = self.known[step["label"]]
        flag = self._flag(u, step)
        signal = self._control_signal(step)
        psi = parse_state(step["input"]) if "input" in step else \
            PureState(np.eye(u.dim)[0])
        lam = np.kron(np.diag([1, 0]), np.eye(u.dim)) + np.kron(np.diag([0, 1]), u.matrix)
        oracle = PureState(lam @ np.kron(signal.state.amplitudes, psi.amplitudes))
        if step.get("via", "program") == "blackbox":
            res = controlled_unknown(BlackBox(u), flag, signal, psi)
            attempts = 1
        else:
            for attempts in range(1, 65):
                slot = self._slot(step["label"])
                res = controlled_program(slot, flag, signal, psi, self.rng)
                if res.success:
                    break
            refresh(slot)
        return {"success": bool(res.success), "attempts": attempts,
                "fidelity": fidelity(res.state, oracle) if res.success else None,
                "flag_purity": res.flag_purity, "qubits": res.qubits_used}

    def _op_lcu(self, step):
        u1, u2 = (self.known[name] for name in step["labels"])
        signal = self._control_signal(step)
        psi = parse_state(step.get("input", "0"))
        branches = lcu_two(BlackBox(u1), BlackBox(u2), signal, psi,
                           self._flag(u1, step), self._flag(u2, step))
        ok = branches[0]
        target = signal.alpha * u1.matrix @ psi.amplitudes + signal.beta * u2.matrix @ psi.amplitudes
        oracle_p = float(np.vdot(target, target).real / 2)
        fid = fidelity(ok.state, PureState.normalized(target)) if ok.state is not None else None
        return {"success_probability": ok.probability,
                "probability_error": abs(ok.probability - oracle_p), "fidelity": fid,
                "qubits": 1 + 3 * qubits_of(u1.dim)}

    def _op_superchannel(self, step):
        u = self.known[step["label"]]
        d = u.dim
        d_a = d if step.get("reduced", False) else d * d
        s = random_superchannel(d, d_a, self.rng)
        psi = parse_state(step.get("input", "0"))
        a = apply_to_channel(s, u, psi.density())
        b = apply_to_choi(s, choi_of_unitary(u), psi.density())
        return {"ancilla_dim": d_a, "reduced": bool(step.get("reduced", False)),
                "max_error": float(np.abs(a.matrix - b.matrix).max()),
                "qubits": s.choi_form_qubits()}

    def _op_download(self, step):
        scheme = int(step["scheme"])
        host = self._slot(step["label"])
        u = self.known[step["label"]]
        as_label = step.get("as", f"{step['label']}@user")
        if scheme in (1, 2):
            fn = scheme1_send_bits if scheme == 1 else scheme2_send_bits
            program = step.get("gates") or self.gate_of.get(step["label"])
            if not program:
                raise ScenarioError(f"scheme {scheme} needs a gate list for {step['label']!r}")
            tape, rec = fn(program, self.channel, self.rng)
            if tape is None:
                raise ProtocolAbort(f"scheme {scheme} aborted: QBER {rec.qber:.3f}")
            slot = tape.install(self.memory, as_label)
            qubits = slot.qubits
        else:
            fn = scheme3_send_qubits if scheme == 3 else scheme4_send_via_ebits
            slot, rec = fn(host, self.channel, self.rng, memory=self.memory, label=as_label)
            if slot is None:
                raise ProtocolAbort(f"scheme {scheme} aborted after {rec.details}")
            qubits = rec.details["peak_qubits"]
        self.known[as_label] = Unitary(u.matrix, as_label)
        fid = fidelity(slot.choi.operator, choi_of_unitary(u).vector)
        refresh(host)
        return {"scheme": scheme, "transcript": rec.to_dict(), "fidelity": fid,
                "qber": rec.qber, "qubits": qubits}

    def _op_verify(self, step):
        plan = VerificationPlan(float(step.get("epsilon", 0.1)), float(step.get("delta", 0.05)))
        host = self.known[step["label"]]
        claimed = self.known[step.get("claimed", step["label"])]
        samples, peak = [], 0
        tmp = MemoryUnit()
        src = tmp.store(host, "host")
        for _ in range(plan.n_samples):
            refresh(src)
            slot, rec = scheme3_send_qubits(src, self.channel, self.rng)
            peak = max(peak, rec.details["peak_qubits"])
            samples.append(slot)
        res = verify_program(samples, plan, claimed, self.rng)
        return {"accepted": res.accepted, "failures": res.failures, "tests": res.tests,
                "fidelity_bound": res.fidelity_bound, "qubits": peak}

    def _op_bb84(self, step):
        res = bb84_exchange(int(step.get("n_raw", 1000)), self.channel, self.rng)
        if res.abort:
            raise ProtocolAbort(f"BB84 aborted: QBER {res.qber:.3f}")
        return {"qber": res.qber, "key_bits": int(len(res.key)), "abort": res.abort,
                "qubits": 1}


# --------------------------------------------------------------------------- #
#                                  reports                                    #
# --------------------------------------------------------------------------- #

def run_scenario(scenario: dict, seed: int | None = None, trials: int | None = None,
                 mode: str | None = None) -> dict:
    """Execute ``trials`` independent runs; trial ``k`` uses the ``k``-th spawned stream."""
    seed = int(scenario.get("seed", 0) if seed is None else seed)
    trials = int(scenario.get("trials", 1) if trials is None else trials)
    if trials < 1:
        raise ScenarioError("field trials: must be at least 1")
    start = time.perf_counter()
    streams = RandomSource(seed).spawn(trials)
    runs, status, reason = [], "success", None
    for k, rng in enumerate(streams):
        ex = Executor(scenario, rng, mode)
        try:
            ex.run()
        except ProtocolAbort as err:
            status, reason = "abort", str(err)
        runs.append({"trial": k, "steps": ex.steps})
        if status == "abort":
            break
    n_steps = min(len(r["steps"]) for r in runs)
    per_step = [max(r["steps"][i]["qubits"] for r in runs) for i in range(n_steps)]
    first = runs[0]["steps"]
    report = {
        "schema_version": SCHEMA_VERSION,
        "scenario": scenario["name"],
        "seed": seed,
        "mode": mode,
        "trials": runs,
        "probabilities": {str(s["step"]): s["probabilities"] for s in first
                          if "probabilities" in s},
        "fidelities": {str(s["step"]): s["fidelity"] for s in first
                       if s.get("fidelity") is not None},
        "qubit_budget": {"peak": max(per_step) if per_step else 0, "per_step": per_step},
        "status": status,
        "wall_time": time.perf_counter() - start,
    }
    if reason:
        report["abort_reason"] = reason
    return clean(report)


def validate_report(report: dict):
    try:
        jsonschema.validate(report, load_schema("report"))
    except jsonschema.ValidationError as err:
        raise ScenarioError(_schema_error(err)) from None
    steps = report["trials"][0]["steps"] if report["trials"] else []
    if steps and report["qubit_budget"]["peak"] != max(report["qubit_budget"]["per_step"]):
        raise ScenarioError("field qubit_budget/peak: not the maximum of per_step")


def budget_check(reports, expected: dict | None = None) -> dict:
    """Compare report peaks to the expected table; every peak must also stay below 20."""
    expected = EXPECTED_BUDGETS if expected is None else expected
    if isinstance(reports, dict):
        reports = [reports]
    out = {}
    for r in reports:
        name, peak = r["scenario"], r["qubit_budget"]["peak"]
        want = expected.get(name)
        ok = peak <= BUDGET_LIMIT and (want is None or peak == want)
        out[name] = {"peak": peak, "expected": want, "pass": ok}
    return out


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"
