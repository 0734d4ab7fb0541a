"""Smoke test for the nol extension module.

Build and install first:  maturin build --release -m crates/python/Cargo.toml && pip install target/wheels/nol-*.whl
"""

import json
import math
import tempfile

import nol

def check_learner():
    lr = nol.Learner("nag", eta=0.5, loss="hinge")
    for k in range(200):
        y = 1.0 if k % 3 else -1.0
        lr.observe([(0, 1000.0 * y), (1, 0.001)], y)
    assert lr.t == 200
    assert lr.predict([(0, 1000.0)]) > 0
    state = lr.state_json()
    other = nol.Learner("nag", eta=0.5, loss="hinge")
    other.load_state(state)
    assert other.weights == lr.weights


def check_scale_invariance():
    xs = nol.synth_figure1(s=1.0, len=500, seed=1)
    scaled = [([(i, v * 1024.0 if i == 1 else v) for i, v in f], y) for f, y in xs]
    a = nol.run_stream(xs, "nag", eta=0.5, loss="hinge")
    b = nol.run_stream(scaled, "nag", eta=0.5, loss="hinge")
    assert a["predictions"] == b["predictions"], "NAG predictions must not depend on feature scale"


def check_losses_and_projection():
    assert nol.loss_value("hinge", 0.5, 1.0) == 0.5
    assert math.isclose(nol.loss_value("logistic", 0.0, 1.0), math.log(2.0))
    assert nol.loss_derivative("squared", 1.0, 0.0) == 2.0
    w = nol.project([3.0, 0.0], [1.0, 1.0], [1.0, 1.0], 1.0, "l1")
    assert math.isclose(w[0], 1.0) and w[1] == 0.0
    inside = [0.25, -0.25]
    assert nol.project(inside, [1.0, 2.0], [1.0, 1.0], 1.0, "l2") == inside
    a = nol.hindsight_conditioner([4.0, 9.0], [2.0, 1.0], 2.0)
    assert a == [2.0, 1.5]


def check_regret_and_sweep():
    reports, summary = nol.regret_suite("thm1", instances=4, seed=3, len=100, oracle_iterations=2000)
    assert json.loads(summary)["failures"] == 0
    assert len(json.loads(reports)) == 4

    xs = nol.synth_figure1(s=1000.0, len=400, seed=2)
    cmp = json.loads(nol.sweep(xs, ["nag", "adagrad"], loss="hinge", grid="2^-6..2^2"))
    assert len(cmp["cells"]) == 2 * 9
    sig, ia, ib = nol.significance([0.0] * 400, [1.0] * 400)
    assert sig and ia[2] < ib[1]

    try:
        nol.Learner("nope")
    except nol.NolError:
        pass
    else:
        raise AssertionError("unknown learner must raise")


def check_svmlight_round_trip():
    with tempfile.NamedTemporaryFile("w", suffix=".svm", delete=False) as f:
        f.write("+1 1:0.5 3:2\n-1 2:1\n")
    xs = nol.read_svmlight(f.name)
    assert [y for _, y in xs] == [1.0, -1.0]


if __name__ == "__main__":
    check_learner()
    check_scale_invariance()
    check_losses_and_projection()
    check_regret_and_sweep()
    check_svmlight_round_trip()
    print("python smoke test passed")
