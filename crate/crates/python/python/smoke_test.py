"""Smoke test for the ch_gsav_py extension module.

Build first:  cargo build -p ch-gsav-py --release --features extension-module
Then run:     python3 crates/python/python/smoke_test.py
Set CH_GSAV_PY_LIB to point at a specific shared library.
"""

import importlib.machinery
import importlib.util
import math
import os
import pathlib
import sys


def load():
    here = pathlib.Path(__file__).resolve()
    root = here.parents[3]
    candidates = [os.environ.get("CH_GSAV_PY_LIB")] + [
        str(root / "target" / profile / "libch_gsav_py.so") for profile in ("release", "debug")
    ]
    for path in candidates:
        if path and os.path.exists(path):
            loader = importlib.machinery.ExtensionFileLoader("ch_gsav_py", path)
            spec = importlib.util.spec_from_file_location("ch_gsav_py", path, loader=loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            return module
    sys.exit("libch_gsav_py.so not found; build the extension first")


def main():
    m = load()

    r = m.r_max_root()
    assert abs(r**3 - (2 * r + 1) ** 2) < 1e-9 and abs(r - 4.8645) < 5e-4

    steps = m.random_mesh(1.0, 20, 3)
    assert len(steps) == 20 and abs(sum(steps) - 1.0) < 1e-12
    p = m.dcc_kernels(steps, 20)
    assert abs(sum(p) - 1.0) < 1e-11
    theta = m.doc_kernels([0.1, 0.1], 2)
    assert all(math.isfinite(t) for t in theta)
    lhs, rhs, ok = m.quadratic_form_check(steps, [0.3, -0.2, 0.5])
    assert ok and lhs >= rhs >= 0.0

    grid = m.Grid(2, 16)
    pts = grid.points()
    values = [math.cos(x) for x, _ in pts]
    assert abs(grid.l2_norm_sq(values) - 2 * math.pi**2) < 1e-10
    assert abs(grid.grad_norm_sq(values) - 2 * math.pi**2) < 1e-10
    lap = grid.laplacian(values)
    assert max(abs(a + b) for a, b in zip(lap, values)) < 1e-12

    start = [0.3 + 0.4 * math.sin(x) * math.cos(y) for x, y in pts]
    sim = m.Simulation(grid, start, 0.3)
    gamma0 = sim.gamma
    rec = sim.advance(1e-3)
    assert rec.n == 1 and rec.gamma <= gamma0
    records = sim.run_adaptive(1e-4, 5e-3, 0.01, 0.05)
    assert all(b.gamma <= a.gamma + 1e-13 * gamma0 for a, b in zip(records, records[1:]))
    assert abs(sim.time - (1e-3 + 0.05)) < 1e-12
    assert abs(grid.mass(sim.phi_bar) - rec.mass) < 1e-10

    kiss = m.Simulation.from_scenario("kissing_bubbles", n=32)
    # the bubbles touch at (pi, pi), so {phi > 0} is one set from the start
    assert kiss.grid.count_positive_components(kiss.phi) == 1

    rows = m.run_convergence(base_k=20, levels=2, n=16, horizon=0.02, ref_steps=640)
    assert len(rows) == 2 and rows[0].h1_order is None and rows[1].h1_order is not None
    assert abs(m.order_of(4.0, 1.0, 0.2, 0.1) - 2.0) < 1e-12

    print("smoke test passed: r_max = %.6f, %d adaptive steps, gamma %.4f -> %.4f" % (r, len(records), gamma0, sim.gamma))


if __name__ == "__main__":
    main()
