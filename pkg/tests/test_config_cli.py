import copy
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from levyterm import ConfigError
from levyterm.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, OUT_ENV, main
from levyterm.config import build_model, load, validate

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def raw(name: str) -> dict:
    return json.loads((CONFIGS / f"{name}.json").read_text())


def write(tmp_path: Path, doc: dict, name: str = "run.json") -> Path:
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def run(config: Path, out: Path, *extra: str) -> int:
    return main(["--config", str(config), "--out", str(out), "--quiet", *extra])


def small_mc_check(name: str = "mc_check_hjm", paths: int = 20_000) -> dict:
    doc = raw(name)
    doc["numerics"]["paths"] = paths
    return doc


class TestValidation:
    @pytest.mark.parametrize("name", sorted(p.stem for p in CONFIGS.glob("*.json")))
    def test_shipped_configs_are_valid(self, name):
        assert load(CONFIGS / f"{name}.json").command == raw(name)["command"]

    @pytest.mark.parametrize("mutate", [
        lambda d: d.pop("schema_version"),
        lambda d: d.update(command="plot"),
        lambda d: d.update(extra=1),
        lambda d: d.pop("spec"),
        lambda d: d["spec"].update(strike=-1.0),
        lambda d: d["model"]["volatility"].update(kind="vasicek_like"),
        lambda d: d["driver"]["segments"][0]["piece"].update(family="cauchy"),
        lambda d: d["driver"]["segments"].insert(0, {"piece": {"family": "brownian"}}),
        lambda d: d.update(numerics={"paths": 10}),
    ])
    def test_rejects_bad_documents(self, mutate):
        doc = copy.deepcopy(raw("price_hjm_nig"))
        mutate(doc)
        with pytest.raises(ConfigError):
            validate(doc)

    def test_unreadable_and_malformed_files(self, tmp_path):
        with pytest.raises(ConfigError):
            load(tmp_path / "missing.json")
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ConfigError):
            load(bad)

    def test_builds_forward_price_model(self):
        model = build_model(validate(raw("price_fp_composite")))
        assert model.kind == "forward_price"


class TestCommands:
    def test_price_zero_vol(self, tmp_path):
        assert run(CONFIGS / "price_zero_vol.json", tmp_path) == EXIT_OK
        doc = json.loads((tmp_path / "price.json").read_text())
        assert doc["schema_version"] == 1
        expected = math.exp(-0.24) * (math.exp(0.04) - 1.02)
        assert doc["result"]["price"] == pytest.approx(expected, rel=1e-12)
        assert doc["result"]["price"] == pytest.approx(0.0163703347901, abs=1e-13)

    @pytest.mark.parametrize("name", ["price_hjm_nig", "price_fp_composite"])
    def test_price_configs(self, tmp_path, name):
        assert run(CONFIGS / f"{name}.json", tmp_path) == EXIT_OK
        assert json.loads((tmp_path / "price.json").read_text())["result"]["price"] > 0.0

    def test_parity_check(self, tmp_path):
        assert run(CONFIGS / "parity_check.json", tmp_path) == EXIT_OK
        doc = json.loads((tmp_path / "parity_check.json").read_text())
        assert doc["passed"] and doc["max_abs_gap"] < 1e-8
        assert len((tmp_path / "parity_check.csv").read_text().splitlines()) == 2 + 20

    @pytest.mark.parametrize("name", ["mc_check_hjm", "mc_check_fp"])
    def test_mc_check_passes(self, tmp_path, name):
        assert run(write(tmp_path, small_mc_check(name)), tmp_path) == EXIT_OK
        lines = (tmp_path / "mc_check.csv").read_text().splitlines()
        assert lines[1] == "strike,fourier,mc,stderr,deviation_se,status"
        assert all(line.endswith("pass") for line in lines[2:])

    def test_failed_check_exit_code(self, tmp_path):
        doc = small_mc_check()
        doc["numerics"]["max_se"] = 1e-9
        assert run(write(tmp_path, doc), tmp_path) == EXIT_CHECK
        assert not json.loads((tmp_path / "mc_check.json").read_text())["passed"]

    def test_smile(self, tmp_path):
        assert run(CONFIGS / "smile.json", tmp_path) == EXIT_OK
        atm = json.loads((tmp_path / "smile.json").read_text())["atm_composition"]
        assert 1.21 <= atm <= 1.23
        comp = (tmp_path / "composition_smile.csv").read_text().splitlines()
        assert comp[0] == "# schema_version=1"
        assert comp[2].startswith("strike,gaussian_vol,nig_vol,gaussian_price,nig_price")
        assert len(comp) == 3 + 9
        assert (tmp_path / "caplet_smile.csv").exists()


class TestFailures:
    def test_config_error_writes_record(self, tmp_path):
        doc = raw("price_hjm_nig")
        doc["command"] = "plot"
        assert run(write(tmp_path, doc), tmp_path) == EXIT_CONFIG
        record = json.loads((tmp_path / "error.json").read_text())
        assert record["error"] == "ConfigError" and record["exit_code"] == EXIT_CONFIG

    def test_infeasible_forward_price_volatility(self, tmp_path):
        doc = raw("price_fp_composite")
        doc["driver"] = {"segments": [{"piece": {"family": "nig_unit_variance", "alpha": 3.0, "beta": -1.0}}]}
        doc["model"]["volatility"] = {"kind": "constant", "scales": [0.5] * 4}
        assert run(write(tmp_path, doc), tmp_path) == EXIT_NUMERIC
        assert json.loads((tmp_path / "error.json").read_text())["error"] == "InfeasibleStripError"

    def test_infeasible_forward_rate_strip(self, tmp_path):
        doc = raw("price_hjm_nig")
        doc["driver"] = raw("mc_check_hjm")["driver"]
        doc["model"] = raw("mc_check_hjm")["model"]
        assert run(write(tmp_path, doc), tmp_path) == EXIT_NUMERIC
        assert json.loads((tmp_path / "error.json").read_text())["exit_code"] == EXIT_NUMERIC


class TestReproducibility:
    def test_identical_runs_are_byte_identical(self, tmp_path):
        cfg = write(tmp_path, small_mc_check(paths=5000))
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(cfg, a) == run(cfg, b) == EXIT_OK
        for name in ("mc_check.csv", "mc_check.json"):
            assert (a / name).read_bytes() == (b / name).read_bytes()

    def test_seed_and_paths_overrides(self, tmp_path):
        cfg = write(tmp_path, small_mc_check(paths=5000))
        a, b = tmp_path / "a", tmp_path / "b"
        assert run(cfg, a) == EXIT_OK
        assert run(cfg, b, "--seed", "7", "--paths", "6000") == EXIT_OK
        doc = json.loads((b / "mc_check.json").read_text())
        assert doc["seed"] == 7 and doc["paths"] == 6000
        assert (a / "mc_check.csv").read_bytes() != (b / "mc_check.csv").read_bytes()

    def test_output_directory_from_environment(self, tmp_path, monkeypatch):
        target = tmp_path / "env-out"
        monkeypatch.setenv(OUT_ENV, str(target))
        assert main(["--config", str(CONFIGS / "price_zero_vol.json"), "--quiet"]) == EXIT_OK
        assert (target / "price.json").exists()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "levyterm.cli", "--config", str(CONFIGS / "price_zero_vol.json"),
                           "--out", str(tmp_path)], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "cap K=1.02" in proc.stdout
