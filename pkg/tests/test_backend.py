import subprocess
import sys

from twostep import _backend

from conftest import BACKENDS


def run_python(code, **env):
    import os
    return subprocess.run([sys.executable, "-c", code], capture_output=True, text=True,
                          env=dict(os.environ, **env))


def test_fallback_when_extension_missing():
    # a None entry in sys.modules makes the import fail as if the extension were not built
    code = ("import sys; sys.modules['twostep._ckernels'] = None\n"
            "import twostep\n"
            "from twostep.synth import random_collection, random_query\n"
            "import numpy as np\n"
            "rng = np.random.default_rng(0)\n"
            "c = random_collection(rng, 50, 20, 5)\n"
            "r = twostep.search(random_query(rng, 20, 4), twostep.build_inverted(c), twostep.SearchParams(k=5))\n"
            "print(twostep.BACKEND, sorted(twostep._backend.AVAILABLE), len(r) > 0)")
    r = run_python(code)
    assert r.returncode == 0, r.stderr
    assert r.stdout.split() == ["python", "['python']", "True"]


def test_environment_selects_backend():
    r = run_python("import twostep; print(twostep.BACKEND)", TWOSTEP_BACKEND="python")
    assert r.stdout.strip() == "python"
    r = run_python("import twostep; print(twostep.BACKEND)", TWOSTEP_BACKEND="fortran")
    assert r.stdout.strip() == _backend.BACKEND and "unavailable" in r.stderr


def test_default_prefers_compiled():
    assert _backend.BACKEND == ("cython" if "cython" in BACKENDS else "python")
    name, mod = _backend.get()
    assert name == _backend.BACKEND and mod is _backend.AVAILABLE[name]
