"""Smoke test for the tlsgn_py extension module.

Build the module first:

    cargo build -p tlsgn-py

then run:

    python3 python/smoke_test.py
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    candidates = [
        ROOT / "target" / profile / name
        for profile in ("release", "debug")
        for name in ("libtlsgn_py.so", "tlsgn_py.so", "libtlsgn_py.dylib")
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("extension not found; run `cargo build -p tlsgn-py` first")
    stage = Path(tempfile.mkdtemp(prefix="tlsgn_py_"))
    shutil.copy2(built, stage / "tlsgn_py.so")
    sys.path.insert(0, str(stage))
    import tlsgn_py

    return tlsgn_py


def main():
    tl = load_module()

    # fixture with a closed-form answer: x = golden ratio
    a = [[1.0], [0.0]]
    b = [1.0, 1.0]
    phi = (1.0 + math.sqrt(5.0)) / 2.0

    direct = tl.solve_svd(a, b)
    assert abs(direct.x[0] - phi) < 1e-10, direct.x
    assert abs(direct.eta - (phi - 1.0)) < 1e-10, direct.eta

    iterative = tl.solve_gauss_newton(a, b, epsilon=1e-12)
    assert iterative.status in ("converged", "stagnated_rounding"), iterative.status
    assert iterative.iterations <= 25
    assert abs(iterative.x[0] - phi) < 1e-10
    assert abs(iterative.eta - direct.eta) < 1e-10

    # the backward error of the solution equals the reported eta and the
    # certificate reaches exactly that norm
    eta = tl.backward_error(a, b, iterative.x)
    assert abs(eta - iterative.eta) < 1e-14
    e_bar, f_bar, frob = tl.certificate(a, b, iterative.x)
    assert abs(frob - eta) < 1e-14
    residual = [
        sum((a[i][j] + e_bar[i][j]) * iterative.x[j] for j in range(1)) - (b[i] + f_bar[i])
        for i in range(2)
    ]
    assert max(abs(r) for r in residual) < 1e-12, residual

    # generated instance: all routes agree and the verdict is clean
    a2, b2 = tl.generate(40, 4, [2.0, 1.7, 1.4, 1.1, 0.4], seed=3)
    verdict, gamma, gap = tl.analyze(a2, b2)
    assert verdict == "unique", verdict
    assert gamma != 0.0 and gap > 0.0

    ref = tl.solve_svd(a2, b2)
    assert abs(ref.eta - 0.4) < 1e-8

    for kwargs in (
        {},
        {"optimal": False, "maxit": 400},
        {"subproblem": "rank-one-update"},
    ):
        sol = tl.solve_gauss_newton(a2, b2, **kwargs)
        err = max(abs(u - v) for u, v in zip(sol.x, ref.x))
        assert err < 1e-6, (kwargs, err)
        assert abs(sol.eta - ref.eta) < 1e-8

    # monotone backward error along the optimal-step run
    sol = tl.solve_gauss_newton(a2, b2)
    hist = sol.eta_history
    assert all(y < x + 1e-13 for x, y in zip(hist, hist[1:])), hist

    # invalid input surfaces as ValueError
    try:
        tl.solve_gauss_newton([[1.0, 2.0]], [1.0, 2.0])
    except ValueError:
        pass
    else:
        raise AssertionError("dimension mismatch not rejected")

    print("smoke test passed")


if __name__ == "__main__":
    main()
