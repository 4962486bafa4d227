"""Smoke test for the pykoopbound extension.

Build and install first, e.g.

    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/pykoopbound-*.whl

then run `python python/smoke_test.py`.
"""

import json
import math
import os
import tempfile

import pykoopbound as kb


def close(a, b, tol):
    return abs(a - b) <= tol


def main():
    # Scalar resolvent: 1 / (1 - 0.9) = 10.
    r = kb.hinf_norm([[0.9]])
    assert close(r["value"], 10.0, 1e-6), r
    assert math.isinf(kb.hinf_norm([[1.0]])["value"])
    assert kb.hinf_norm([[3.0, 0.0], [0.0, 4.0]], kind="constant")["value"] == 4.0

    model = kb.KoopmanModel.from_operators([[0.9]], [[0.5]])
    t, kf = model.norms()
    assert close(t, 10.0, 1e-6) and close(kf, 0.5, 1e-12)
    m2, m = kb.theorem2_bounds(t, 0.5)
    n2, n = kb.corollary1_bounds(kf, t, 0.5)
    assert close(m, 5.0, 1e-6) and close(n, 2.5, 1e-6)
    assert close(m2, m * m, 1e-9) and close(n2, n * n, 1e-9)

    # Fit recovers a known linear system from a noiseless trajectory.
    a = [[0.8, 0.2], [-0.1, 0.6]]
    f = [[1.0, 0.5]]
    x = [1.0, -2.0]
    states, actions = [x], []
    for _ in range(20):
        actions.append([f[0][0] * x[0] + f[0][1] * x[1]])
        x = [a[0][0] * x[0] + a[0][1] * x[1], a[1][0] * x[0] + a[1][1] * x[1]]
        states.append(x)
    fitted = kb.KoopmanModel.fit(states, actions)
    err = max(abs(fitted.state_operator[i][j] - a[i][j]) for i in range(2) for j in range(2))
    assert err < 1e-8, fitted.state_operator
    back = kb.KoopmanModel.from_json(fitted.to_json())
    assert back.state_operator == fitted.state_operator

    w = kb.generate_disturbance("scaled_gaussian_projected", 2.0, 64, 3, seed=4)
    adm = kb.disturbance_admissible(w, 2.0)
    assert adm["admissible"] and adm["necessary_conditions"], adm
    assert close(kb.dtft_sup(w)[1], 2.0, 1e-9)

    try:
        kb.KoopmanModel.from_operators([[1.0, 2.0]], [[1.0]])
    except ValueError:
        pass
    else:
        raise AssertionError("non-square operator accepted")

    # In-process CLI run.
    with tempfile.TemporaryDirectory() as d:
        cfg = os.path.join(d, "c.toml")
        with open(cfg, "w") as fh:
            fh.write('run.env = "linear"\nrun.runs = 2\nrun.horizon = 15\n')
        traj = os.path.join(d, "t.csv")
        model_path = os.path.join(d, "m.json")
        assert kb.run_cli(["simulate", "--config", cfg, "--out", traj]) == 0
        assert kb.run_cli(["fit", "--config", cfg, "--input", traj, "--out", model_path]) == 0
        with open(model_path) as fh:
            doc = json.load(fh)
        assert doc["residuals"]["oracle_state_error"] < 1e-6, doc["residuals"]
        assert kb.run_cli(["fit", "--config", cfg, "--input", os.path.join(d, "missing.csv")]) != 0

    print("pykoopbound", kb.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
