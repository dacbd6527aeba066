"""The compiled and pure-Python kernels must agree bit for bit."""

import math
import os
import subprocess
import sys

import numpy as np
import pytest

from nicholson_lab import _backend, _kernels_py, exprlang
from nicholson_lab._ops import ERR_OK

try:
    from nicholson_lab import _core
except ImportError:
    _core = None

needs_compiled = pytest.mark.skipif(
    _core is None, reason="compiled kernels not built"
)


def test_backend_selection_reports():
    assert _backend.BACKEND in ("python", "compiled")
    kernels = _backend.available_kernels()
    assert "python" in kernels
    assert _backend.has_compiled() == ("compiled" in kernels)


def _pack(sources):
    return exprlang.pack_programs([exprlang.parse(s) for s in sources])


@needs_compiled
def test_eval_program_array_bit_identical():
    ts = np.linspace(-5.0, 10.0, 4001)
    for source in (
        "1 + sin(t)^2",
        "abs(cos(2*t))*exp(-t/7) + t^2/50",
        "min(max(sin(3*t), -0.5), 0.5) + sqrt(abs(t))",
        "2^t / (1 + t^2)",
    ):
        expr = exprlang.parse(source)
        prog = expr.program
        args = (prog.ops, prog.args, prog.consts, prog.stack_need, ts)
        v_py, e_py, i_py = _kernels_py.eval_program_array(*args)
        v_c, e_c, i_c = _core.eval_program_array(*args)
        assert e_py == e_c == ERR_OK
        assert np.array_equal(np.asarray(v_py), np.asarray(v_c))


@needs_compiled
def test_error_codes_and_positions_agree():
    expr = exprlang.parse("log(t)")
    prog = expr.program
    ts = np.array([2.0, 1.0, -1.0, 3.0])
    v_py, e_py, i_py = _kernels_py.eval_program_array(
        prog.ops, prog.args, prog.consts, prog.stack_need, ts
    )
    v_c, e_c, i_c = _core.eval_program_array(
        prog.ops, prog.args, prog.consts, prog.stack_need, ts
    )
    assert (e_py, i_py) == (e_c, i_c)
    assert e_py != ERR_OK and i_py == 2


def _mos_args(kind):
    # beta, history, then tau/sigma per pair
    packed = _pack(
        ["1 + sin(t)^2", "1 + t/10", "1", "abs(cos(t))", "0.5", "abs(cos(2*t))"]
    )
    if kind == 0:
        c1 = np.array([0.06 * math.e**4, 0.04 * math.e**5])
        c2 = np.array([0.8, 1.0])
    else:
        c1 = np.array([-0.06, -0.04])
        c2 = np.array([0.24, 0.2])
    return dict(
        kind=kind,
        delta=0.1,
        c1=c1,
        c2=c2,
        ops=packed.ops,
        args=packed.args,
        consts=packed.consts,
        offs=np.asarray(packed.offsets, dtype=np.int32),
        stack_need=packed.stack_need,
        t0=0.0,
        h=0.05,
        n_steps=2000,
        check_positivity=1 if kind == 0 else 0,
    )


@needs_compiled
@pytest.mark.parametrize("kind", [0, 1])
def test_integrate_mos_bit_identical(kind):
    kw = _mos_args(kind)
    x_py, xp_py, err_py, ep_py, et_py, smin_py = _kernels_py.integrate_mos(**kw)
    x_c, xp_c, err_c, ep_c, et_c, smin_c = _core.integrate_mos(**kw)
    assert (err_py, ep_py, smin_py) == (err_c, ep_c, smin_c)
    assert et_py == et_c or (math.isnan(et_py) and math.isnan(et_c))
    assert np.array_equal(np.asarray(x_py), np.asarray(x_c))
    assert np.array_equal(np.asarray(xp_py), np.asarray(xp_c))


@needs_compiled
def test_window_integrals_bit_identical():
    packed = _pack(["1 + sin(t)^2", "abs(cos(t))"])
    ts = np.linspace(60.0, 260.0, 3001)
    args = (
        packed.ops,
        packed.args,
        packed.consts,
        np.asarray(packed.offsets, dtype=np.int32),
        packed.stack_need,
        ts,
        1e-10,
    )
    v_py, e_py, t_py = _kernels_py.window_integrals(*args)
    v_c, e_c, t_c = _core.window_integrals(*args)
    assert (e_py, t_py) == (e_c, t_c)
    assert np.array_equal(np.asarray(v_py), np.asarray(v_c))


def _backend_in_subprocess(value):
    env = dict(os.environ)
    if value is None:
        env.pop("NICHOLSON_LAB_BACKEND", None)
    else:
        env["NICHOLSON_LAB_BACKEND"] = value
    return subprocess.run(
        [sys.executable, "-c", "import nicholson_lab as n; print(n.BACKEND)"],
        capture_output=True,
        text=True,
        env=env,
    )


def test_env_var_forces_python_backend():
    proc = _backend_in_subprocess("python")
    assert proc.returncode == 0
    assert proc.stdout.strip() == "python"


@needs_compiled
def test_env_var_forces_compiled_backend():
    proc = _backend_in_subprocess("compiled")
    assert proc.returncode == 0
    assert proc.stdout.strip() == "compiled"


def test_env_var_rejects_unknown_backend():
    proc = _backend_in_subprocess("fortran")
    assert proc.returncode != 0
    assert "NICHOLSON_LAB_BACKEND" in proc.stderr


def test_full_pipeline_matches_across_backends(tmp_path):
    """The check report must not depend on the backend at all."""
    if _core is None:
        pytest.skip("compiled kernels not built")
    script = (
        "from nicholson_lab import cli; import sys;"
        "sys.exit(cli.main(['check', '--example', '3.9', '--out', sys.argv[1]]))"
    )
    outs = []
    for backend in ("python", "compiled"):
        out = tmp_path / f"report_{backend}.json"
        env = dict(os.environ, NICHOLSON_LAB_BACKEND=backend)
        proc = subprocess.run(
            [sys.executable, "-c", script, str(out)],
            capture_output=True,
            text=True,
            env=env,
            cwd=tmp_path,
        )
        assert proc.returncode == 0, proc.stderr
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
