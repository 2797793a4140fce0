"""Smoke test for the giem_py extension.

Build and install first:
    pip install maturin patchelf
    maturin build --release -m crates/py/Cargo.toml -o dist && pip install dist/giem_py-*.whl
then run `python python/smoke_test.py` (or `pytest python/`).
"""

import tempfile

import giem_py

def test_presets_build_and_validate():
    for name in giem_py.Map.presets():
        f = giem_py.Map(preset=name, bits=128)
        report = f.validate()
        assert report["irreducible"] and report["genus_one"], name
        assert f.d == len(f.lengths())


def test_rotation_eval():
    f = giem_py.Map(preset="rotation", bits=128)
    a, b = (float(x) for x in f.lengths())
    assert abs(float(f.eval("0.1")) - (0.1 + b)) < 1e-15
    assert abs(float(f.eval(0.9)) - (0.9 - a)) < 1e-15
    assert abs(f.deriv(0.5) - 1.0) == 0.0


def test_fibonacci_return_times():
    f = giem_py.Map(preset="rotation", bits=256)
    fib = [1, 1]
    while len(fib) < 40:
        fib.append(fib[-1] + fib[-2])
    for n in (5, 10):
        r = f.renormalize(n)
        times = sorted(r.return_times())
        assert all(t in fib for t in times), times
        assert r.depth == n


def test_mobius_formula():
    m, x = 1.7, 0.3
    fx, d1, _ = giem_py.mobius(m, x)
    assert abs(fx - m * x / (1 + x * (m - 1))) < 1e-15
    assert abs(d1 - m / (1 + x * (m - 1)) ** 2) < 1e-14


def test_convergence_and_denjoy():
    f = giem_py.Map(preset="moebius", bits=128)
    sweep = giem_py.convergence(f, 4)
    assert len(sweep["records"]) > 0
    assert max(max(r["delta_c0"], r["delta_c1"]) for r in sweep["records"]) < 1e-20
    rep = giem_py.denjoy(giem_py.Map(preset="affine", bits=128), 5, pairs=20)
    assert rep["theta"] > 0 and rep["pairs_strict"]


def test_run_and_compare():
    cfg = """
kind = "combinatorics"
depth = 8
[map]
preset = "rotation"
[precision]
float_bits = 128
"""
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        rec = giem_py.run_experiment(cfg, a)
        giem_py.run_experiment(cfg, b)
        assert all(c["passed"] for c in rec["checks"]), rec["checks"]
        diff = giem_py.compare(a, b)
        assert all(not f["columns"] for f in diff["files"])


def test_errors_raise():
    try:
        giem_py.Map(preset="no_such_family")
    except giem_py.GiemError:
        pass
    else:
        raise AssertionError("expected GiemError")


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            fn()
            print("ok", name)
