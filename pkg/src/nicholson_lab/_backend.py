"""Backend selection: compiled Cython kernels with a pure-Python fallback.

The compiled extension ``nicholson_lab._core`` is preferred when importable.
Set ``NICHOLSON_LAB_BACKEND=python`` or ``=compiled`` to force a choice
(forcing ``compiled`` raises if the extension is missing).
"""

import os

from . import _kernels_py
from ._ops import ERR_MESSAGES, ERR_OK
from .errors import ExprDomainError

try:
    from . import _core
except ImportError:
    _core = None

_forced = os.environ.get("NICHOLSON_LAB_BACKEND", "").strip().lower()
if _forced == "python":
    kernels = _kernels_py
elif _forced == "compiled":
    if _core is None:
        raise ImportError(
            "NICHOLSON_LAB_BACKEND=compiled but nicholson_lab._core is not built"
        )
    kernels = _core
elif _forced:
    raise ImportError(f"unknown NICHOLSON_LAB_BACKEND value {_forced!r}")
else:
    kernels = _core if _core is not None else _kernels_py

BACKEND = kernels.NAME


def has_compiled():
    return _core is not None


def available_kernels():
    """Mapping of backend name to kernel module, for benchmarks and tests."""
    out = {"python": _kernels_py}
    if _core is not None:
        out["compiled"] = _core
    return out


def eval_value(program, t, source=""):
    """Evaluate a compiled program at scalar t, raising on domain errors."""
    v, err = kernels.eval_program(
        program.ops, program.args, program.consts, program.stack_need, t
    )
    if err != ERR_OK:
        raise ExprDomainError(ERR_MESSAGES[err], t, source)
    return v


def eval_values(program, ts, source=""):
    """Evaluate a compiled program over an array of times."""
    vals, err, idx = kernels.eval_program_array(
        program.ops, program.args, program.consts, program.stack_need, ts
    )
    if err != ERR_OK:
        raise ExprDomainError(ERR_MESSAGES[err], float(ts[idx]), source)
    return vals
