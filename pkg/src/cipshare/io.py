"""Instance files, trace dumps and report files.

Instances are JSON documents::

    {"n": 2, "m": 1, "costs": [...], "requirements": [...],
     "contributions": [[...], [...]], "meta": {...}}

``contributions`` is row-major with one row per facility.  Python's ``json``
writes floats with ``repr`` so values round-trip exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import CostShares, DualSolution, Instance, InvalidInstance, Selection

FORMAT = "cip-instance/1"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def instance_to_dict(inst: Instance) -> dict:
    return {
        "format": FORMAT,
        "n": inst.n,
        "m": inst.m,
        "costs": inst.facility_costs.tolist(),
        "requirements": inst.requirements.tolist(),
        "contributions": inst.contributions.tolist(),
        "meta": _plain(dict(inst.meta)),
    }


def instance_from_dict(doc: dict) -> Instance:
    try:
        n, m = int(doc["n"]), int(doc["m"])
        costs, reqs, contrib = doc["costs"], doc["requirements"], doc["contributions"]
    except KeyError as exc:
        raise InvalidInstance(f"instance document missing field {exc}") from None
    if len(costs) != n or len(reqs) != m:
        raise InvalidInstance("n/m do not match costs/requirements lengths")
    a = np.array(contrib, dtype=float)
    if n and a.shape != (n, m):
        raise InvalidInstance(f"contributions must be {n}x{m}")
    return Instance(costs, reqs, a.reshape(n, m), doc.get("meta") or {})


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=1)


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(dumps_instance(inst) + "\n")


def load_instance(path) -> Instance:
    return instance_from_dict(json.loads(Path(path).read_text()))


def dual_to_list(y: DualSolution) -> list[dict]:
    rows = [{"user": j, "subset": sorted(S), "value": v} for (j, S), v in y.items()]
    rows.sort(key=lambda e: (e["user"], len(e["subset"]), e["subset"]))
    return rows


def dual_from_list(rows: list[dict]) -> DualSolution:
    return DualSolution({(e["user"], tuple(e["subset"])): e["value"] for e in rows})


def solution_to_dict(sel: Selection | None = None, y: DualSolution | None = None,
                     shares: CostShares | None = None, **extra) -> dict:
    doc: dict = {}
    if sel is not None:
        doc["opened"] = sel.indices()
        doc["cost"] = sel.cost
    if y is not None:
        doc["dual"] = dual_to_list(y)
    if shares is not None:
        doc["shares"] = shares.shares.tolist()
        doc["user_set"] = sorted(shares.user_set)
        doc["method"] = shares.method
    doc.update(_plain(extra))
    return doc


def shares_from_dict(doc: dict) -> CostShares:
    return CostShares(doc["shares"], frozenset(doc["user_set"]), doc.get("method", ""))


def format_subset(S) -> str:
    return "{" + ",".join(str(i) for i in sorted(S)) + "}"


def write_trace(steps, path) -> None:
    """One record per line: ``(step, S, facility, dual_value)``."""
    with open(path, "w") as fh:
        for t, (S, facility, value) in enumerate(steps):
            fh.write(f"({t}, {format_subset(S)}, {facility}, {value!r})\n")
