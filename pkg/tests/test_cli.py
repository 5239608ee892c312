import csv
import json
from importlib import resources

import numpy as np
import pytest

from swarmfo.cli import (
    RunConfig,
    dump_scenario,
    main,
    parse_scenario_file,
    run,
    scenario_from_dict,
    scenario_to_dict,
    sweep_rows,
    trajectory_header,
)
from swarmfo.errors import ParseError, ValidationError
from swarmfo.scenarios import builtin_scenarios, get_scenario

PACKAGED = resources.files("swarmfo") / "data" / "pentagon.json"


def _pentagon_doc():
    return json.loads(PACKAGED.read_text())


class TestScenarioFiles:
    def test_packaged_pentagon_is_builtin(self):
        sc = parse_scenario_file(PACKAGED)
        assert scenario_to_dict(sc) == scenario_to_dict(get_scenario("pentagon"))
        assert sc.spec.same_as(get_scenario("pentagon").spec)

    @pytest.mark.parametrize("name", sorted(builtin_scenarios()))
    def test_round_trip(self, name, tmp_path):
        sc = get_scenario(name)
        path = tmp_path / f"{name}.json"
        dump_scenario(sc, path)
        back = parse_scenario_file(path)
        assert scenario_to_dict(back) == scenario_to_dict(sc)
        assert np.array_equal(back.spec.incidence, sc.spec.incidence)
        assert back.gains == sc.gains

    def test_explicit_initial_round_trip(self, tmp_path):
        doc = _pentagon_doc()
        doc["initial"] = {"type": "explicit", "poses": [[i, -i, 0.1 * i] for i in range(5)]}
        sc = scenario_from_dict(doc)
        path = tmp_path / "x.json"
        dump_scenario(sc, path)
        assert scenario_to_dict(parse_scenario_file(path)) == scenario_to_dict(sc)

    def test_null_epsilon_uses_default(self):
        doc = _pentagon_doc()
        doc["gains"]["epsilon"] = None
        assert scenario_from_dict(doc).gains.epsilon == pytest.approx(0.1 / 5.1, rel=1e-15)

    def test_inconsistent_triangle(self):
        doc = _pentagon_doc()
        doc.update(n_agents=3, edges=[[1, 2], [2, 3], [3, 1]], displacements=[[1, 0], [1, 0], [1, 0]])
        with pytest.raises(ValidationError, match="UnrealizableDisplacements") as info:
            scenario_from_dict(doc)
        assert info.value.field == "displacements"

    @pytest.mark.parametrize(
        "mutate, field",
        [
            (lambda d: d["gains"].update(b=0), "gains.b"),
            (lambda d: d["gains"].update(a=-1.0), "gains.a"),
            (lambda d: d["gains"].update(k=[1, 1]), "gains.k"),
            (lambda d: d.pop("target"), "target"),
            (lambda d: d.update(target=[1, 2, 3]), "target"),
            (lambda d: d.update(dt=0), "dt"),
            (lambda d: d.update(n_agents=1), "n_agents"),
            (lambda d: d.update(edges=[[1, 2], [2, 3]]), "displacements"),
            (lambda d: d["edges"].__setitem__(0, [1, 1]), "edges"),
            (lambda d: d["initial"].update(type="grid"), "initial.type"),
            (lambda d: d["initial"].update(seed=-3), "initial.seed"),
        ],
    )
    def test_validation_errors(self, mutate, field):
        doc = _pentagon_doc()
        mutate(doc)
        with pytest.raises(ValidationError) as info:
            scenario_from_dict(doc)
        assert info.value.field == field

    def test_disconnected(self):
        doc = _pentagon_doc()
        doc.update(edges=[[1, 2], [3, 4], [4, 5]], displacements=[[1, 0]] * 3)
        with pytest.raises(ValidationError, match="DisconnectedGraph"):
            scenario_from_dict(doc)

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ParseError):
            parse_scenario_file(path)


class TestRun:
    def test_pentagon(self, tmp_path, capsys):
        code = run(RunConfig("pentagon", output_dir=tmp_path))
        assert code == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["verdict"]["converged"] is True
        assert summary["verdict"]["r_inf_deviation"] <= 1e-3
        assert summary["seed"] == 0
        rows = list(csv.reader(open(tmp_path / "trajectory.csv")))
        assert rows[0] == trajectory_header(5)
        assert len(rows[0]) == 1 + 5 * 5 + 4
        assert float(rows[-1][0]) == pytest.approx(7000.0)
        assert "pentagon: converged" in capsys.readouterr().out

    def test_e_shape_bad_flagged(self, tmp_path, capsys):
        code = run(RunConfig("e-shape-bad", output_dir=tmp_path, emit=("summary_json",)))
        assert code == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["steady_state"]["in_formation"] is False
        assert summary["steady_state"]["relative_residual"] > 0.2
        assert "OUT OF FORMATION" in capsys.readouterr().out
        assert not (tmp_path / "trajectory.csv").exists()

    def test_short_horizon(self, tmp_path):
        assert run(RunConfig("pentagon", t_final=0.01, output_dir=tmp_path)) == 2

    def test_errors(self, tmp_path, capsys):
        assert run(RunConfig("no-such-scenario", output_dir=tmp_path)) == 1
        assert run(RunConfig("pentagon", dt=5.0, output_dir=tmp_path)) == 1
        assert "error:" in capsys.readouterr().err

    def test_curve_output(self, tmp_path):
        run(RunConfig("pentagon", t_final=1.0, output_dir=tmp_path, emit=("curve_csv",)))
        rows = list(csv.reader(open(tmp_path / "curve.csv")))
        assert rows[0] == ["a", "gain_ratio", "formation_residual", "target_distance"]
        res = [float(r[2]) for r in rows[1:]]
        assert all(x > y for x, y in zip(res, res[1:]))

    def test_byte_identical(self, tmp_path):
        for sub in ("one", "two"):
            assert run(RunConfig("e-shape-bad", seed=11, output_dir=tmp_path / sub)) == 0
        for name in ("trajectory.csv", "summary.json"):
            assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()

    def test_seed_changes_output(self, tmp_path):
        run(RunConfig("pentagon", seed=1, t_final=10.0, output_dir=tmp_path / "a"))
        run(RunConfig("pentagon", seed=2, t_final=10.0, output_dir=tmp_path / "b"))
        assert (tmp_path / "a" / "trajectory.csv").read_bytes() != (tmp_path / "b" / "trajectory.csv").read_bytes()

    @pytest.mark.parametrize(
        "kw", [dict(dt=-1.0), dict(t_final=0.0), dict(emit=("pdf",)), dict(seed=-1)]
    )
    def test_config_validation(self, kw):
        with pytest.raises(ValidationError):
            RunConfig("pentagon", **kw)


class TestSweep:
    def test_single_value(self):
        rows = sweep_rows(RunConfig("pentagon"), [1.0], simulate=False)
        assert len(rows) == 1 and len(rows[0]) == 4

    def test_decades_closed_form(self):
        rows = sweep_rows(RunConfig("pentagon"), [10.0**e for e in range(-2, 4)], simulate=False)
        res = [r[2] for r in rows]
        assert all(x > y for x, y in zip(res, res[1:]))

    def test_simulated_endpoints(self):
        rows = sweep_rows(RunConfig("pentagon"), [0.1, 0.3, 1.0])
        for a, ratio, res, dist, sim_res, sim_dist, converged in rows:
            assert converged == "true"
            assert abs(sim_res - res) <= 1e-3
            assert abs(sim_dist - dist) <= 1e-3


class TestMain:
    def test_list(self, capsys):
        assert main(["--list"]) == 0
        out = capsys.readouterr().out
        assert "pentagon" in out and "e-shape-good" in out

    def test_run_and_sweep(self, tmp_path, capsys):
        assert main(["--scenario", "pentagon", "--t-final", "0.5", "--out", str(tmp_path)]) == 2
        assert main(["--sweep-a", "0.1,1,10", "--closed-form-only", "--out", str(tmp_path)]) == 0
        assert len(list(csv.reader(open(tmp_path / "curve.csv")))) == 4

    def test_scenario_from_file(self, tmp_path):
        assert main(["--write-scenario", str(tmp_path / "p.json")]) == 0
        code = main(["--scenario", str(tmp_path / "p.json"), "--t-final", "1", "--out", str(tmp_path)])
        assert code == 2

    def test_bad_file(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("[]")
        assert main(["--scenario", str(bad), "--out", str(tmp_path)]) == 1
