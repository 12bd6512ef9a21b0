import csv
import io
import json
import xml.etree.ElementTree as ET

import pytest

from xlab import cli, experiments, report
from xlab.errors import ValidationError

CHEAP = "floating-ultraparallel"


def write_config(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


class TestCatalog:
    def test_thirteen_entries(self):
        assert len(experiments.catalog()) == 13
        assert len(cli.list_experiments()) == 13

    def test_stable_order(self):
        assert [e.name for e in experiments.catalog()] == [e.name for e in experiments.catalog()]
        assert cli.list_experiments() == cli.list_experiments()

    def test_names_unique(self):
        names = [e.name for e in experiments.catalog()]
        assert len(set(names)) == len(names)

    def test_list_command(self, capsys):
        assert cli.main(["list"]) == 0
        out = capsys.readouterr().out.strip().splitlines()
        assert len(out) == 13 and out[0].startswith("cartan-asymptotics")

    def test_every_criterion_covered(self):
        crit = {c for e in experiments.catalog() for c in e.criteria}
        assert set(range(1, 14)) <= crit


class TestValidation:
    def test_minimal(self):
        cfg = cli.validate_config({"experiment": CHEAP})
        assert cfg["seed"] == 0 and cfg["params"] == experiments.BY_NAME[CHEAP].params

    @pytest.mark.parametrize(
        "bad",
        [
            [],
            {},
            {"experiment": "nope"},
            {"experiment": CHEAP, "extra": 1},
            {"experiment": CHEAP, "params": {"bogus": 1}},
            {"experiment": CHEAP, "params": {"grid": "nine"}},
            {"experiment": CHEAP, "params": {"grid": 9.5}},
            {"experiment": CHEAP, "params": {"t_values": []}},
            {"experiment": CHEAP, "params": {"t_values": ["a"]}},
            {"experiment": CHEAP, "seed": -1},
            {"experiment": CHEAP, "seed": True},
            {"experiment": CHEAP, "budget_seconds": 0},
            {"experiment": CHEAP, "tolerances": {"nope": 1.0}},
            {"experiment": "cartan-asymptotics", "params": {"t_range": [1.0]}},
        ],
    )
    def test_rejected(self, bad):
        with pytest.raises(ValidationError):
            cli.validate_config(bad)

    def test_int_accepted_for_float(self):
        cfg = cli.validate_config({"experiment": "cartan-asymptotics", "params": {"t_range": [1, 4]}})
        assert cfg["params"]["t_range"] == [1, 4]

    def test_exit_code_on_bad_config(self, tmp_path, capsys):
        path = write_config(tmp_path, {"experiment": CHEAP, "bogus": 1})
        assert cli.main(["run", "--config", path]) == cli.EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_exit_code_on_missing_file(self, tmp_path):
        assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == cli.EXIT_CONFIG

    def test_exit_code_on_bad_json(self, tmp_path):
        p = tmp_path / "bad.json"
        p.write_text("{not json")
        assert cli.main(["run", "--config", str(p)]) == cli.EXIT_CONFIG


class TestRun:
    def run_once(self, tmp_path, sub, seed=3):
        out = tmp_path / sub
        path = write_config(tmp_path, {"experiment": CHEAP, "seed": seed, "output_dir": str(out)}, sub + ".json")
        code = cli.main(["run", "--config", path])
        return code, out

    def test_outputs(self, tmp_path):
        code, out = self.run_once(tmp_path, "a")
        assert code == 0
        raw = (out / "results.csv").read_bytes()
        assert raw.startswith(b"experiment,table,row,parameters,quantity,value\r\n")
        rows = list(csv.reader(io.StringIO(raw.decode())))
        assert all(len(r) == 6 for r in rows)
        rep = json.loads((out / "report.json").read_text())
        assert rep["environment"]["seed"] == 3
        assert rep["passed"] is True
        ET.fromstring((out / "plots.svg").read_text())

    def test_byte_identical_rerun(self, tmp_path):
        _, a = self.run_once(tmp_path, "a")
        _, b = self.run_once(tmp_path, "b")
        for f in ("results.csv", "report.json", "plots.svg"):
            assert (a / f).read_bytes() == (b / f).read_bytes()

    def test_failure_exit_code(self, tmp_path):
        out = tmp_path / "strict"
        cfg = {"experiment": "schottky-dim", "output_dir": str(out), "tolerances": {"agreement": 1e-9}}
        assert cli.main(["run", "--config", write_config(tmp_path, cfg)]) == cli.EXIT_FAIL

    def test_budget_partial(self, tmp_path):
        res = experiments.run_experiment("jacobian-ranks", None, None, 0, 1e-9)
        assert res.partial and not res.passed


class TestReport:
    def test_nonfinite_to_null(self):
        res = experiments.ExperimentResult("x")
        res.table("t", ["a"]).add(a=1.0, v=float("nan"))
        text = report.report_json(res, {"experiment": "x"}, "anchor")
        assert "NaN" not in text and json.loads(text)["tables"]["t"]["rows"][0]["v"] is None

    def test_csv_nan(self):
        res = experiments.ExperimentResult("x")
        res.table("t", ["a"]).add(a=1.0, v=float("nan"))
        assert ",nan\r\n" in report.results_csv(res)
