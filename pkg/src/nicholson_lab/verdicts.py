"""Verdict type shared by the criteria checks and the map analysis."""

from dataclasses import dataclass, field

BOUNDARY_TOL = 1e-12

HOLDS = "holds"
FAILS = "fails"
BOUNDARY = "boundary"
INAPPLICABLE = "inapplicable"


def display_value(x):
    """Rounded companion value for reports (full precision stays alongside)."""
    if x is None:
        return None
    return float(f"{float(x):.6g}")


@dataclass(frozen=True)
class Verdict:
    """Outcome of one inequality criterion.

    ``margin`` is rhs - lhs. Ties within BOUNDARY_TOL report ``boundary``
    rather than silently passing; whether a boundary satisfies the criterion
    depends on ``strict`` (a non-strict <= criterion is satisfied at the
    boundary, a strict < one is not).
    """

    status: str
    lhs: float = None
    rhs: float = None
    margin: float = None
    strict: bool = False
    inputs: dict = field(default_factory=dict)
    flags: tuple = ()
    case: str = None
    reason: str = None

    @property
    def satisfied(self):
        if self.status == HOLDS:
            return True
        if self.status == BOUNDARY:
            return not self.strict
        return False

    def to_dict(self):
        out = {
            "status": self.status,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
            "strict": self.strict,
            "satisfied": self.satisfied,
            "inputs": dict(self.inputs),
            "flags": list(self.flags),
            "display": {
                "lhs": display_value(self.lhs),
                "rhs": display_value(self.rhs),
                "margin": display_value(self.margin),
            },
        }
        if self.case is not None:
            out["case"] = self.case
        if self.reason is not None:
            out["reason"] = self.reason
        return out


def make_verdict(lhs, rhs, strict, inputs=None, flags=(), case=None):
    lhs = float(lhs)
    rhs = float(rhs)
    margin = rhs - lhs
    if abs(margin) <= BOUNDARY_TOL:
        status = BOUNDARY
    elif lhs < rhs:
        status = HOLDS
    else:
        status = FAILS
    return Verdict(
        status=status,
        lhs=lhs,
        rhs=rhs,
        margin=margin,
        strict=strict,
        inputs=dict(inputs or {}),
        flags=tuple(flags),
        case=case,
    )


def inapplicable(reason, inputs=None):
    return Verdict(status=INAPPLICABLE, inputs=dict(inputs or {}), reason=reason)


def combine(verdicts, inputs=None, flags=()):
    """Conjunction verdict: holds iff every part is satisfied.

    Parts that are inapplicable make the combination inapplicable.
    """
    if any(v.status == INAPPLICABLE for v in verdicts):
        reasons = "; ".join(v.reason for v in verdicts if v.status == INAPPLICABLE)
        return inapplicable(reasons, inputs)
    ok = all(v.satisfied for v in verdicts)
    extra = tuple(flags) + tuple(
        f for v in verdicts for f in v.flags if f not in flags
    )
    return Verdict(
        status=HOLDS if ok else FAILS,
        strict=False,
        inputs=dict(inputs or {}),
        flags=tuple(dict.fromkeys(extra)),
    )
