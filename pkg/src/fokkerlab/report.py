"""Result record for one identity or inequality check."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

RELATIONS = ("eq", "le", "ge")


@dataclass(frozen=True)
class IdentityReport:
    """Outcome of comparing two independently computed sides of a relation.

    For ``relation="eq"`` the check passes when either the absolute or the
    relative error is within ``tolerance``. For ``"le"``/``"ge"`` it passes
    when ``lhs <= rhs + tolerance`` (resp. ``lhs >= rhs - tolerance``).
    ``extra_ok`` carries side conditions (sub-identities, monotonicity);
    the report passes only if they all hold too.
    """

    name: str
    lhs: float
    rhs: float
    tolerance: float
    lhs_method: str
    rhs_method: str
    relation: str = "eq"
    params: dict = field(default_factory=dict)
    extra_ok: bool = True
    abs_err: float = field(init=False)
    rel_err: float = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        if self.lhs_method == self.rhs_method:
            raise ValueError(
                f"{self.name}: both sides computed by {self.lhs_method!r}; "
                "a check needs two independent methods"
            )
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")
        lhs, rhs = float(self.lhs), float(self.rhs)
        abs_err = abs(lhs - rhs)
        rel_err = abs_err / max(abs(rhs), 1e-8)
        if not (math.isfinite(lhs) and math.isfinite(rhs)):
            ok = False
        elif self.relation == "eq":
            ok = abs_err <= self.tolerance or rel_err <= self.tolerance
        elif self.relation == "le":
            ok = lhs <= rhs + self.tolerance
        else:
            ok = lhs >= rhs - self.tolerance
        object.__setattr__(self, "lhs", lhs)
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "abs_err", abs_err)
        object.__setattr__(self, "rel_err", rel_err)
        object.__setattr__(self, "passed", bool(ok and self.extra_ok))

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        op = {"eq": "=", "le": "<=", "ge": ">="}[self.relation]
        return (f"[{status}] {self.name}: lhs={self.lhs:.10g} {op} rhs={self.rhs:.10g} "
                f"(abs {self.abs_err:.3g}, rel {self.rel_err:.3g}, tol {self.tolerance:g})")


REPORT_COLUMNS = ("name", "lhs", "rhs", "abs_err", "rel_err", "tolerance", "passed", "params")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item"):
        return v.item()
    return v


def reports_to_csv(reports) -> str:
    """CSV text for ``reports``; rows are sorted by name for determinism."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in sorted(reports, key=lambda r: r.name):
        w.writerow([
            r.name, _fmt(r.lhs), _fmt(r.rhs), _fmt(r.abs_err), _fmt(r.rel_err),
            _fmt(r.tolerance), "true" if r.passed else "false",
            json.dumps(_jsonable(r.params), sort_keys=True),
        ])
    return buf.getvalue()


def summary_text(reports) -> str:
    reports = sorted(reports, key=lambda r: r.name)
    n_pass = sum(r.passed for r in reports)
    lines = [r.line() for r in reports]
    lines.append(f"{n_pass}/{len(reports)} checks passed")
    return "\n".join(lines) + "\n"
