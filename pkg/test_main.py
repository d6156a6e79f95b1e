import json
from pathlib import Path

import pytest

from main import EXIT_ERROR, EXIT_FORMULA_DISAGREES, EXIT_OK, EXIT_VERIFICATION_FAILED, build_dot, main, node_id
from periodic_subgroups import build_a_sets, injective_coloring, label_value, periodic_config
from spin_config import constant_configuration
from tree_group import TreeParams, volume


def run(tmp_path, name, *argv):
    out = tmp_path / f"{name}.json"
    code = main(list(argv) + ["--output", str(out)])
    return code, json.loads(out.read_text(encoding="utf-8"))


def write_json(tmp_path, name, payload):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


@pytest.fixture
def constant_config(tmp_path):
    values = {str(word): 1 for word in volume(2, TreeParams(k=2))}
    return write_json(tmp_path, "constant.json", {"k": 2, "r": 2, "q": 3, "J": "1", "n": 2, "values": values})


@pytest.fixture
def spec_3_3(tmp_path):
    code, _ = run(tmp_path, "spec", "subgroup", "--k", "3", "--m", "3")
    assert code == EXIT_OK
    return str(tmp_path / "spec.json")


def test_subgroup_builds_patterns(tmp_path):
    code, payload = run(tmp_path, "out", "subgroup", "--k", "3", "--m", "3")
    assert code == EXIT_OK
    result = payload["result"]
    assert result["spec"] == {"m": 3, "k": 3, "A": [[1, 4], [2, 4], [3, 4]]}
    assert result["construction"] == "patterns"
    assert result["generator_vectors"] == ["100", "010", "001", "111"]
    assert result["gamma"] == {"radius": 4, "pass": True, "witness": None}
    assert result["index"] == 8
    assert payload["manifest"]["subcommand"] == "subgroup"
    assert "wall_time_seconds" in payload["timing"]


def test_subgroup_falls_back_to_default_vectors(tmp_path):
    code, payload = run(tmp_path, "out", "subgroup", "--k", "2", "--m", "3")
    assert code == EXIT_OK
    assert payload["result"]["construction"] == "default_vectors"
    assert payload["result"]["generator_vectors"] == ["001", "010", "111"]


def test_subgroup_with_vectors_matches_patterns(tmp_path):
    code, payload = run(tmp_path, "out", "subgroup", "--k", "3", "--m", "3", "--vectors", "100,010,001,111")
    assert code == EXIT_OK
    assert payload["result"]["spec"]["A"] == [[1, 4], [2, 4], [3, 4]]


def test_subgroup_pigeonhole_is_an_error(tmp_path):
    code, payload = run(tmp_path, "out", "subgroup", "--k", "7", "--m", "3")
    assert code == EXIT_ERROR
    assert payload["result"]["error"] == "PigeonholeError"


def test_check_constant_configuration(tmp_path, constant_config):
    code, payload = run(tmp_path, "out", "check", "--config", constant_config)
    assert code == EXIT_OK
    assert payload["result"]["ground_state"] is True
    assert payload["result"]["energy"] == "-12"
    assert payload["manifest"]["inputs"] == [constant_config]


def test_check_constant_configuration_with_negative_coupling(tmp_path, constant_config):
    code, payload = run(tmp_path, "out", "check", "--config", constant_config, "--J=-1")
    assert code == EXIT_VERIFICATION_FAILED
    result = payload["result"]
    assert result["ground_state"] is False
    assert result["reports"][0]["center"] == "e"
    assert result["reports"][0]["pass"] is False
    assert result["failing_balls"] == 4


def test_check_injective_coloring(tmp_path, spec_3_3):
    code, payload = run(
        tmp_path, "out", "check", "--spec", spec_3_3, "--coloring", "injective",
        "--q", "8", "--n", "4", "--J=-1",
    )
    assert code == EXIT_OK
    result = payload["result"]
    assert result["ground_state"] is True
    assert result["periodic"] is True
    assert result["energy"] == "0"
    assert len(result["reports"]) == 53


def test_check_coloring_file(tmp_path, spec_3_3):
    coloring = write_json(tmp_path, "coloring.json", {"m": 3, "colors": {
        "000": 1, "110": 1, "001": 2, "010": 3, "011": 4, "100": 5, "101": 6, "111": 7,
    }})
    code, payload = run(
        tmp_path, "out", "check", "--spec", spec_3_3, "--coloring", coloring,
        "--q", "8", "--n", "2", "--J=-1",
    )
    assert code == EXIT_VERIFICATION_FAILED
    assert payload["result"]["failing_balls"] == 4
    assert payload["manifest"]["inputs"] == [spec_3_3, coloring]


def test_check_without_coupling_is_an_error(tmp_path, spec_3_3):
    code, payload = run(tmp_path, "out", "check", "--spec", spec_3_3, "--coloring", "injective", "--q", "8", "--n", "2")
    assert code == EXIT_ERROR
    assert payload["result"]["error"] == "DomainError"


def test_check_missing_file_is_an_error(tmp_path):
    code, payload = run(tmp_path, "out", "check", "--config", str(tmp_path / "absent.json"))
    assert code == EXIT_ERROR
    assert "not found" in payload["result"]["message"]


def test_check_config_with_non_integer_spin_is_an_error(tmp_path):
    values = {str(word): 1 for word in volume(2, TreeParams(k=2))}
    values["1 2"] = "x"
    config = write_json(tmp_path, "bad.json", {"k": 2, "r": 2, "q": 3, "J": "1", "n": 2, "values": values})
    code, payload = run(tmp_path, "out", "check", "--config", config)
    assert code == EXIT_ERROR
    assert payload["result"]["error"] == "DomainError"
    assert "values['1 2']" in payload["result"]["message"]


@pytest.mark.parametrize("broken", [
    {"n": "two"},
    {"values": [1, 1, 1]},
    {"values": {"e": None}},
])
def test_energy_rejects_malformed_config_fields(tmp_path, broken):
    payload = {"k": 2, "r": 2, "q": 3, "J": "1", "n": 1, "values": {"e": 1, "1": 1, "2": 1, "3": 1}}
    payload.update(broken)
    config = write_json(tmp_path, "bad.json", payload)
    code, out = run(tmp_path, "out", "energy", "--config", config)
    assert code == EXIT_ERROR
    assert out["result"]["error"] == "DomainError"


@pytest.mark.parametrize("coloring_payload", [
    {"m": "three", "colors": {}},
    {"m": 3, "colors": ["000", "001"]},
    {"m": 3, "colors": {"000": "red"}},
])
def test_check_rejects_malformed_coloring_file(tmp_path, spec_3_3, coloring_payload):
    coloring = write_json(tmp_path, "coloring.json", coloring_payload)
    code, payload = run(
        tmp_path, "out", "check", "--spec", spec_3_3, "--coloring", coloring,
        "--q", "8", "--n", "2", "--J=-1",
    )
    assert code == EXIT_ERROR
    assert payload["result"]["error"] == "DomainError"


@pytest.mark.parametrize("a_sets", [5, "14", [5, [2, 4]], [["a"], [2, 4], [3, 4]]])
def test_census_rejects_malformed_subgroup_file(tmp_path, a_sets):
    spec = write_json(tmp_path, "spec.json", {"m": 3, "k": 3, "A": a_sets})
    code, payload = run(tmp_path, "out", "census", "periodic", "--spec", spec, "--q", "3", "--J", "1")
    assert code == EXIT_ERROR
    assert payload["result"]["error"] == "DomainError"


def test_census_exhaustive(tmp_path):
    code, payload = run(tmp_path, "out", "census", "exhaustive", "--k", "2", "--q", "3", "--n", "2", "--J", "1")
    assert code == EXIT_OK
    result = payload["result"]
    assert result["minimizer_count"] == 3
    assert result["min_energy"] == "-12"
    assert result["states_examined"] == 59049


def test_census_exhaustive_over_budget(tmp_path):
    code, payload = run(
        tmp_path, "out", "census", "exhaustive", "--k", "2", "--q", "3", "--n", "2", "--J", "1", "--budget", "100",
    )
    assert code == EXIT_ERROR
    assert payload["result"]["error"] == "BudgetExceededError"


def test_census_periodic_ferromagnetic(tmp_path, spec_3_3):
    code, payload = run(tmp_path, "out", "census", "periodic", "--spec", spec_3_3, "--q", "3", "--J", "1")
    assert code == EXIT_OK
    assert payload["result"]["periodic_count"] == 3


def test_census_periodic_formula_disagreement(tmp_path):
    code, _ = run(tmp_path, "spec", "subgroup", "--k", "2", "--m", "3")
    assert code == EXIT_OK
    code, payload = run(
        tmp_path, "out", "census", "periodic", "--spec", str(tmp_path / "spec.json"), "--q", "5", "--J=-1",
    )
    assert code == EXIT_FORMULA_DISAGREES
    result = payload["result"]
    assert result["periodic_count"] == 600
    assert result["graph_count"] == 600
    assert result["formula_count"] == 120
    assert result["agreement"]["enumeration_vs_graph"] is True


def test_census_periodic_regime_error(tmp_path, spec_3_3):
    code, payload = run(tmp_path, "out", "census", "periodic", "--spec", spec_3_3, "--q", "4", "--J=-1")
    assert code == EXIT_ERROR
    assert payload["result"]["error"] == "RegimeError"


def test_census_output_is_deterministic(tmp_path):
    argv = ["census", "exhaustive", "--k", "2", "--q", "3", "--n", "2", "--J=-1"]
    _, first = run(tmp_path, "first", *argv)
    _, second = run(tmp_path, "second", *argv, "--workers", "2")
    assert first["result"].pop("workers") == 1
    assert second["result"].pop("workers") == 2
    assert first["result"] == second["result"]


def test_build_dot_sizes():
    tree = TreeParams(k=2)
    root_only = build_dot(constant_configuration(volume(0, tree), 1, 2, 2), 0)
    assert len(root_only.get_nodes()) == 1
    assert len(root_only.get_edges()) == 0
    graph = build_dot(constant_configuration(volume(2, tree), 1, 2, 2), 2)
    assert len(graph.get_nodes()) == 10
    assert len(graph.get_edges()) == 9


def test_export_dot_file(tmp_path, constant_config):
    out = tmp_path / "tree.dot"
    code = main(["export", "dot", "--config", constant_config, "--output", str(out)])
    assert code == EXIT_OK
    text = out.read_text(encoding="utf-8")
    assert text.lstrip().startswith("graph")
    assert "w1_2" in text


def test_export_dot_to_stdout(constant_config, capsys):
    code = main(["export", "dot", "--config", constant_config, "--n", "1"])
    assert code == EXIT_OK
    printed = capsys.readouterr().out
    assert "fillcolor" in printed


def test_ball_command(tmp_path):
    code, payload = run(tmp_path, "out", "ball", "--k", "2", "--center", "1", "--radius", "1")
    assert code == EXIT_OK
    result = payload["result"]
    assert result["size"] == result["expected_size"] == 4
    assert result["members"] == ["e", "1", "1 2", "1 3"]

    code, payload = run(tmp_path, "sphere", "ball", "--k", "3", "--sphere", "2")
    assert code == EXIT_OK
    assert payload["result"]["size"] == 12


def test_energy_command(tmp_path, constant_config):
    code, payload = run(tmp_path, "out", "energy", "--config", constant_config)
    assert code == EXIT_OK
    assert payload["result"]["energy"] == "-12"
    assert [b["u_value"] for b in payload["result"]["balls"]] == [3, 3, 3, 3]


def test_bad_arguments_exit_with_error():
    assert main(["census", "sideways"]) == EXIT_ERROR
    assert main([]) == EXIT_ERROR


def test_sample_inputs_in_data(tmp_path):
    data = Path(__file__).parent / "data"
    code, payload = run(tmp_path, "energy", "energy", "--config", str(data / "constant_k2_n1.json"))
    assert code == EXIT_OK
    assert payload["result"]["energy"] == "-3"

    code, payload = run(
        tmp_path, "check", "check", "--spec", str(data / "spec_k3_m3.json"),
        "--coloring", str(data / "coloring_shared_pair.json"), "--q", "8", "--n", "2", "--J=-1",
    )
    assert code == EXIT_VERIFICATION_FAILED
    assert [r["center"] for r in payload["result"]["reports"]] == ["1", "2", "3", "4", "e"]


def test_periodic_export_colors_are_constant_on_cosets():
    spec = build_a_sets(3, 3)
    config = periodic_config(injective_coloring(3, 8), spec, 3, 8)
    graph = build_dot(config, 3)
    colors = {}
    for word in config.support:
        node = graph.get_node(node_id(str(word)))[0]
        colors.setdefault(label_value(word, spec), set()).add(node.get("fillcolor"))
    assert len(colors) == 8
    assert all(len(found) == 1 for found in colors.values())
    assert len({next(iter(found)) for found in colors.values()}) == 8
