import json

import numpy as np
import pytest

from sigma_entropy import io
from sigma_entropy.cli import main, run
from sigma_entropy.measure_core import make_density, uniform_space

FOUR = {"atoms": ["a", "b", "c", "d"], "masses": ["1/4", "1/4", "1/4", "1/4"]}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


@pytest.fixture
def files(tmp_path):
    return {
        "density2": write(tmp_path, "d2.json", {"space": {"atoms": ["a", "b"], "masses": [0.5, 0.5]},
                                                "values": [1.5, 0.5]}),
        "rho": write(tmp_path, "rho.json", {"space": FOUR, "values": [1.5, 0.5, 1.25, 0.75]}),
        "space": write(tmp_path, "space.json", FOUR),
        "partition": write(tmp_path, "p.json", {"space": "space.json", "blocks": [["a", "b"], ["c", "d"]]}),
        "sequence": write(tmp_path, "s.json", {"space": FOUR, "period": [[["a", "b"], ["c", "d"]],
                                                                          [["a", "c"], ["b", "d"]]]}),
        "walk": write(tmp_path, "w.json", {"k": 2, "mu": "uniform", "L": 1, "K": 1,
                                           "seed": 12345, "samples": 20000}),
    }


def report(capsys):
    return json.loads(capsys.readouterr().out)


def test_relative_space_path(files):
    P = io.load_partition(files["partition"])
    assert P.block_ids() == [["a", "b"], ["c", "d"]]


@pytest.mark.parametrize("obj,path", [
    ({"space": {"atoms": ["a"], "masses": [1]}}, "$"),
    ({"space": {"atoms": ["a", "a"], "masses": [0.5, 0.5]}, "values": [1, 1]}, "$.space"),
    ({"space": {"atoms": ["a"], "masses": [1]}, "values": [2]}, "$.values"),
    ({"space": {"masses": [1]}, "values": [1]}, "$.space"),
    ([1, 2], "$"),
])
def test_input_errors_carry_paths(obj, path):
    with pytest.raises(io.InputError) as exc:
        io.load_density(obj)
    assert exc.value.path == path


def test_walk_schema():
    cfg = io.load_walk({"k": 3, "mu": "uniform", "L": 2, "K": 1, "seed": 1, "samples": 10})
    assert cfg.k == 3 and cfg.mu is None
    with pytest.raises(io.InputError):
        io.load_walk({"k": 2, "bogus": 1})
    with pytest.raises(io.InputError):
        io.load_walk({"k": 0})


def test_render_is_stable():
    obj = {"x": 0.1, "y": [1.0, 2.5], "z": {"n": 3, "b": True, "s": "t", "none": float("nan")}}
    text = io.render(obj)
    assert '"x": 0.10000000000000001' in text and '"none": null' in text
    assert io.render(obj) == text
    assert json.loads(text)["y"] == [1.0, 2.5]
    csv_text = io.render(obj, "csv")
    assert csv_text.splitlines()[0] == "key,value" and "y[1],2.5" in csv_text


def test_space_round_trip():
    sp = uniform_space(3)
    assert io.load_space(io.space_to_json(sp)) == sp


def test_entropy_command(files, capsys):
    assert main(["entropy", "--density", files["density2"]]) == 0
    out = report(capsys)
    assert out["status"] == "ok"
    assert out["report"]["ent"] == pytest.approx(0.130812035941136959, abs=1e-15)


def test_entropy_violation_round_trips(files, capsys):
    # the stated sandwich bound is too small near t_o (see decisions ledger)
    assert main(["entropy", "--density", files["density2"], "--delta", "0.33"]) == 2
    out = report(capsys)
    assert out["status"] == "violation"
    v = out["violations"][0]
    assert v["check"] == "sandwich" and v["gap"] == pytest.approx(v["lhs"] - v["rhs"])
    f = io.load_density(v["inputs"]["density"])
    assert f.values.tolist() == [1.5, 0.5]


def test_entropy_with_partition(files, capsys):
    assert main(["entropy", "--density", files["rho"], "--partition", files["partition"], "--phi", "power(2)"]) == 0
    assert report(capsys)["report"]["h_phi"] == pytest.approx(0.0, abs=1e-15)


def test_alpha_command(files, capsys):
    assert main(["alpha", "--density", files["density2"], "--t", "1", "--t", "0.5"]) == 0
    rows = report(capsys)["report"]["alpha"]
    assert [r["alpha"] for r in rows] == [0.25, 0.5]


def test_condexp_command(files, capsys):
    assert main(["condexp", "--density", files["rho"], "--partition", files["partition"]]) == 0
    out = report(capsys)["report"]
    assert out["values"] == [1.0, 1.0, 1.0, 1.0] and out["dominated_by_input"]


def test_kudo_command(files, capsys):
    assert main(["kudo", "--sequence", files["sequence"], "--rho", files["rho"]]) == 0
    out = report(capsys)["report"]
    assert out["A_plus"] == [["a"], ["b"], ["c"], ["d"]]
    assert out["A_minus"] == [["a", "b", "c", "d"]]
    assert out["quantitative_bound"]["bound"] == pytest.approx(0.402983843774289, abs=1e-13)


def test_walk_exact(capsys):
    assert main(["walk", "--k", "2", "--L", "1", "--K", "1"]) == 0
    assert report(capsys)["report"]["h"] == pytest.approx(0.549306144334054846, abs=1e-12)


def test_walk_monte_carlo_needs_seed(capsys):
    assert main(["walk", "--L", "1", "--method", "monte_carlo", "--samples", "1000"]) == 1
    assert "seed" in capsys.readouterr().err


def test_walk_config_seed_counts(files, capsys):
    assert main(["walk", "--config", files["walk"], "--method", "monte_carlo"]) == 0
    mc = report(capsys)["report"]["monte_carlo"]
    assert mc["seed"] == 12345 and mc["samples"] == 20000


def test_verify_requires_seed(capsys, monkeypatch):
    monkeypatch.delenv("SIGMA_ENTROPY_SEED", raising=False)
    assert main(["verify", "abs_moment", "--count", "10"]) == 1


def test_verify_env_seed(capsys, monkeypatch):
    monkeypatch.setenv("SIGMA_ENTROPY_SEED", "7")
    assert main(["verify", "abs_moment", "--count", "100"]) == 0
    out = report(capsys)
    assert out["report"]["seed"] == 7 and out["report"]["suites"][0]["passed"] == 100


def test_flag_beats_env(capsys, monkeypatch):
    monkeypatch.setenv("SIGMA_ENTROPY_SEED", "7")
    monkeypatch.setenv("SIGMA_ENTROPY_FORMAT", "csv")
    assert main(["verify", "abs_moment", "--count", "5", "--seed", "8", "--format", "json"]) == 0
    assert report(capsys)["report"]["seed"] == 8


def test_bad_env_is_input_error(capsys, monkeypatch):
    monkeypatch.setenv("SIGMA_ENTROPY_TOL", "abc")
    assert main(["walk", "--L", "1", "--K", "1"]) == 1


def test_verify_violation_exit(capsys):
    assert main(["verify", "sandwich", "--count", "30", "--seed", "1"]) == 2
    out = report(capsys)
    v = out["violations"][0]
    assert v["suite"] == "sandwich" and v["lhs"] > v["rhs"]


def test_usage_errors_exit_1(capsys):
    assert_exit = pytest.raises(SystemExit)
    with assert_exit as exc:
        main(["entropy"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["verify", "no_such_suite", "--seed", "1"])
    assert exc.value.code == 1


def test_malformed_file(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["entropy", "--density", str(p)]) == 1
    assert "invalid JSON" in capsys.readouterr().err
    assert main(["entropy", "--density", str(tmp_path / "missing.json")]) == 1


def test_out_file_and_determinism(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["verify", "pck", "--count", "200", "--seed", "3", "--format", "csv"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    code, text, _ = run(args)
    assert text == a.read_text()
