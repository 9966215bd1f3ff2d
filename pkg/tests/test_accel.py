"""The compiled kernels and their pure-numpy fallback must agree."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

PROBE = r"""
import json, numpy as np
from ampc import backend
from ampc.dynamics import FirstOrder, SecondOrder, VehicleState, plant_step
from ampc.planner import plan
from ampc.qp import QpProblem, solve_qp
from ampc.scenarios import bundled

rng = np.random.default_rng(1)
M = rng.normal(size=(6, 6))
p = QpProblem(M @ M.T + 0.1 * np.eye(6), rng.normal(size=6), rng.normal(size=(8, 6)), rng.uniform(0.1, 1, 8),
              -np.ones(6), np.ones(6))
qp = solve_qp(p).z.tolist()
s = VehicleState(v=3.0)
for _ in range(10):
    s = plant_step(s, 9.0, 0.2, SecondOrder(2.0, 0.7), 0.1)
sc = bundled("occluded_overtake")
cfg = sc.planner_config()
res = plan(sc.ego, sc.all_obstacles(), cfg)
print(json.dumps({"backend": backend(), "qp": qp, "plant": [s.x, s.y, s.v],
                  "v_c": res.controls.v_c.tolist(), "iters": res.iterations}))
"""


def probe(disable):
    env = dict(os.environ)
    env.pop("AMPC_DISABLE_NUMBA", None)
    if disable:
        env["AMPC_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", PROBE], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


@pytest.mark.slow
def test_numba_and_numpy_agree():
    jit, ref = probe(False), probe(True)
    assert ref["backend"] == "numpy"
    if jit["backend"] != "numba":
        pytest.skip("numba not importable")
    np.testing.assert_allclose(jit["qp"], ref["qp"], atol=1e-9)
    np.testing.assert_allclose(jit["plant"], ref["plant"], atol=1e-9)
    assert jit["iters"] == ref["iters"]
    np.testing.assert_allclose(jit["v_c"], ref["v_c"], atol=1e-6)
