"""Problem files: a strict JSON schema for Bolza problem data.

Matrices are nested row-major arrays; set variants are tagged by a "type"
field in {"all", "box", "poly"}.  Box bounds accept numbers, the strings
"inf"/"-inf", or null for an unbounded side.  Unknown fields anywhere are
rejected.  Black-box (callable) mixed terms are not serializable and only
exist in code.
"""

import json
import math

import numpy as np

from .errors import ProblemFileError
from .model import (BolzaProblem, MixedConstraintSpec, QuadraticAffine,
                    StageSpec, TerminalCost)
from .sets import Box, Polyhedron, WholeSpace

__all__ = ["load_problem", "save_problem", "problem_from_dict",
           "problem_to_dict"]


def _require(d, keys, where, optional=()):
    unknown = set(d) - set(keys) - set(optional)
    if unknown:
        raise ProblemFileError(f"{where}: unknown fields {sorted(unknown)}")
    missing = [k for k in keys if k not in d]
    if missing:
        raise ProblemFileError(f"{where}: missing fields {missing}")


def _bound(v, where):
    if v is None:
        return math.inf
    if isinstance(v, str):
        if v == "inf":
            return math.inf
        if v == "-inf":
            return -math.inf
        raise ProblemFileError(f"{where}: bad bound string {v!r}")
    return float(v)


def _set_from_dict(d, where):
    if not isinstance(d, dict) or "type" not in d:
        raise ProblemFileError(f"{where}: set needs a 'type' tag")
    kind = d["type"]
    try:
        if kind == "all":
            _require(d, ["type", "dim"], where)
            return WholeSpace(int(d["dim"]))
        if kind == "box":
            _require(d, ["type", "lower", "upper"], where)
            lower = [_bound(v, where) for v in d["lower"]]
            upper = [_bound(v, where) for v in d["upper"]]
            return Box(lower, upper)
        if kind == "poly":
            _require(d, ["type", "C", "d"], where)
            return Polyhedron(np.asarray(d["C"], dtype=float),
                              np.asarray(d["d"], dtype=float))
    except ProblemFileError:
        raise
    except Exception as exc:
        raise ProblemFileError(f"{where}: {exc}") from exc
    raise ProblemFileError(f"{where}: unknown set type {kind!r}")


def _quad_from_dict(d, where):
    _require(d, ["type", "P", "q"], where, optional=("r",))
    if d["type"] != "quad":
        raise ProblemFileError(f"{where}: only 'quad' mixed terms are file-representable")
    return QuadraticAffine(P=np.asarray(d["P"], dtype=float),
                           q=np.asarray(d["q"], dtype=float),
                           r=float(d.get("r", 0.0)))


def problem_from_dict(data):
    _require(data, ["horizon", "stages", "terminal"], "problem")
    horizon = int(data["horizon"])
    raw_stages = data["stages"]
    if len(raw_stages) != horizon:
        raise ProblemFileError(
            f"problem: horizon {horizon} but {len(raw_stages)} stages")
    stages = []
    for t, sd in enumerate(raw_stages):
        where = f"stages[{t}]"
        _require(sd, ["A", "B", "phi", "Q", "R", "stateSet", "controlSet"],
                 where, optional=("mixed",))
        mixed = None
        if "mixed" in sd and sd["mixed"] is not None:
            md = sd["mixed"]
            _require(md, ["constraint", "runningCost"], f"{where}.mixed")
            mixed = MixedConstraintSpec(
                constraint=_quad_from_dict(md["constraint"],
                                           f"{where}.mixed.constraint"),
                running_cost=_quad_from_dict(md["runningCost"],
                                             f"{where}.mixed.runningCost"))
        try:
            stages.append(StageSpec(
                A=np.asarray(sd["A"], dtype=float),
                B=np.asarray(sd["B"], dtype=float),
                phi=np.asarray(sd["phi"], dtype=float),
                Q=np.asarray(sd["Q"], dtype=float),
                R=np.asarray(sd["R"], dtype=float),
                state_set=_set_from_dict(sd["stateSet"], f"{where}.stateSet"),
                control_set=_set_from_dict(sd["controlSet"],
                                           f"{where}.controlSet"),
                mixed=mixed))
        except ProblemFileError:
            raise
        except Exception as exc:
            raise ProblemFileError(f"{where}: {exc}") from exc
    td = data["terminal"]
    _require(td, ["Qf", "set"], "terminal")
    try:
        terminal = TerminalCost(Qf=np.asarray(td["Qf"], dtype=float),
                                set_=_set_from_dict(td["set"], "terminal.set"))
        return BolzaProblem(stages, terminal)
    except ProblemFileError:
        raise
    except Exception as exc:
        raise ProblemFileError(f"terminal: {exc}") from exc


def load_problem(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ProblemFileError(f"{path}: {exc}") from exc
    return problem_from_dict(data)


def _set_to_dict(s):
    if isinstance(s, WholeSpace):
        return {"type": "all", "dim": s.dim}
    if isinstance(s, Box):
        def enc(v):
            if v == math.inf:
                return "inf"
            if v == -math.inf:
                return "-inf"
            return v
        return {"type": "box", "lower": [enc(v) for v in s.lower],
                "upper": [enc(v) for v in s.upper]}
    if isinstance(s, Polyhedron):
        return {"type": "poly", "C": s.C.tolist(), "d": s.d.tolist()}
    raise ProblemFileError(f"set {s!r} is not file-representable")


def problem_to_dict(problem: BolzaProblem):
    stages = []
    for st in problem.stages:
        sd = {"A": st.A.tolist(), "B": st.B.tolist(), "phi": st.phi.tolist(),
              "Q": st.Q.tolist(), "R": st.R.tolist(),
              "stateSet": _set_to_dict(st.state_set),
              "controlSet": _set_to_dict(st.control_set)}
        if st.mixed is not None:
            if not st.mixed.is_quadratic():
                raise ProblemFileError("callable mixed terms are not serializable")
            sd["mixed"] = {
                "constraint": {"type": "quad",
                               "P": st.mixed.constraint.P.tolist(),
                               "q": st.mixed.constraint.q.tolist(),
                               "r": st.mixed.constraint.r},
                "runningCost": {"type": "quad",
                                "P": st.mixed.running_cost.P.tolist(),
                                "q": st.mixed.running_cost.q.tolist(),
                                "r": st.mixed.running_cost.r}}
        stages.append(sd)
    return {"horizon": problem.horizon, "stages": stages,
            "terminal": {"Qf": problem.terminal.Qf.tolist(),
                         "set": _set_to_dict(problem.terminal.set)}}


def save_problem(problem, path):
    with open(path, "w") as fh:
        json.dump(problem_to_dict(problem), fh, indent=2, sort_keys=True)
        fh.write("\n")
