import json
import os

import pytest
from click.testing import CliRunner

from stochsg.cli import main
from stochsg.config import parse_config
from stochsg.errors import ConfigError


BASE_CONFIG = {
    "params": {"m": 0.5, "a": 1.0, "hbar": 0.1, "lam": 0.5, "mu": 1.0,
               "t_switch": -0.6, "sign_convention": "paper",
               "chi_width": 1.0},
    "smearings": {
        "f1": [{"center": [0.35, -0.25], "radius": 0.18, "amplitude": 1.0}],
        "f2": [{"center": [0.40, 0.20], "radius": 0.18, "amplitude": 1.0}],
        "g": [{"center": [0.0, 0.0], "radius": 0.5, "amplitude": 1.0}],
    },
    "interaction": "g",
    "qtable": {"n_t": 12, "n_x": 24, "budget": 100},
    "quad": {"budget": 1024, "seed": 7, "leg_nodes": 12, "pair_nodes": 12},
    "mc": {"dt": 0.05, "pad": 0.25, "n_samples": 200, "seed": 11},
    "orders": [0, 1],
    "observables": [
        {"kind": "correlation", "legs": ["f1", "f2"]},
        {"kind": "expectation", "legs": ["f1"]},
    ],
    "bounds": {"orders": [0, 1], "grid_n": 256},
    "expand": {"order": 2, "obs": "field"},
}


@pytest.fixture()
def workdir(tmp_path):
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(BASE_CONFIG))
    return tmp_path, str(cfg_path)


def _run(args):
    return CliRunner().invoke(main, args, catch_exceptions=False)


class TestConfig:
    def test_unknown_top_level_field(self):
        bad = dict(BASE_CONFIG, typo_field=1)
        with pytest.raises(ConfigError):
            parse_config(bad)

    def test_unknown_param_field(self):
        bad = json.loads(json.dumps(BASE_CONFIG))
        bad["params"]["mass"] = 1.0
        with pytest.raises(ConfigError):
            parse_config(bad)

    def test_undefined_smearing_reference(self):
        bad = json.loads(json.dumps(BASE_CONFIG))
        bad["observables"][0]["legs"] = ["f1", "nope"]
        with pytest.raises(ConfigError):
            parse_config(bad)

    def test_interaction_must_fit_diamond(self):
        bad = json.loads(json.dumps(BASE_CONFIG))
        bad["smearings"]["g"] = [{"center": [0.8, 0.0], "radius": 0.5,
                                  "amplitude": 1.0}]
        with pytest.raises(ConfigError):
            parse_config(bad)

    def test_negative_interaction_rejected(self):
        bad = json.loads(json.dumps(BASE_CONFIG))
        bad["smearings"]["g"] = [{"center": [0.0, 0.0], "radius": 0.5,
                                  "amplitude": -1.0}]
        with pytest.raises(ConfigError):
            parse_config(bad)

    def test_alpha_gate_for_quantum(self):
        bad = json.loads(json.dumps(BASE_CONFIG))
        bad["quantum_hbars"] = [100.0]
        with pytest.raises(ConfigError):
            parse_config(bad)

    def test_exit_code_on_config_error(self, workdir):
        tmp, _ = workdir
        bad_path = tmp / "bad.json"
        bad_path.write_text(json.dumps(dict(BASE_CONFIG, typo=1)))
        res = _run(["corr", "--config", str(bad_path), "--out", str(tmp)])
        assert res.exit_code == 1


class TestCommands:
    def test_no_command_shows_usage(self):
        res = _run([])
        assert res.exit_code == 0
        assert "Usage" in res.output

    def test_full_pipeline(self, workdir):
        tmp, cfg = workdir
        out = str(tmp / "out")
        for cmd in (["compute-q"], ["corr"], ["coeff"], ["mc"]):
            res = _run(cmd + ["--config", cfg, "--out", out])
            assert res.exit_code == 0, res.output
        res = _run(["compare", "--config", cfg, "--out", out, "--strict"])
        assert res.exit_code == 0, res.output
        assert (tmp / "out" / "compare.csv").exists()
        res = _run(["bounds", "--config", cfg, "--out", out])
        assert res.exit_code == 0, res.output
        res = _run(["expand", "--config", cfg, "--out", out])
        assert res.exit_code == 0, res.output
        graphs = json.loads((tmp / "out" / "expand_order2_field.json")
                            .read_text())
        assert len(graphs) == 4
        dot = (tmp / "out" / "expand_order2_field.dot").read_text()
        assert dot.count("graph term {") == 4
        res = _run(["expand", "--config", cfg, "--out", out,
                    "--order", "2", "--obs", "corr"])
        assert res.exit_code == 0, res.output
        corr_graphs = json.loads((tmp / "out" / "expand_order2_corr.json")
                                 .read_text())
        assert corr_graphs  # both legs quantum-contracted at order 2

    def test_determinism_byte_identical(self, workdir):
        tmp, cfg = workdir
        out1, out2 = str(tmp / "a"), str(tmp / "b")
        for out in (out1, out2):
            assert _run(["corr", "--config", cfg, "--out", out]).exit_code == 0
            assert _run(["mc", "--config", cfg, "--out", out]).exit_code == 0
        for name in ("correlation.csv", "mc.csv"):
            b1 = open(os.path.join(out1, name), "rb").read()
            b2 = open(os.path.join(out2, name), "rb").read()
            assert b1 == b2

    def test_seed_override_changes_series(self, workdir):
        tmp, cfg = workdir
        out1, out2 = str(tmp / "s1"), str(tmp / "s2")
        _run(["corr", "--config", cfg, "--out", out1])
        _run(["corr", "--config", cfg, "--out", out2, "--seed", "99"])
        a = open(os.path.join(out1, "correlation.csv")).read()
        b = open(os.path.join(out2, "correlation.csv")).read()
        assert a != b

    def test_compare_strict_exit_code(self, workdir):
        tmp, cfg = workdir
        out = str(tmp / "strictout")
        assert _run(["corr", "--config", cfg, "--out", out]).exit_code == 0
        assert _run(["coeff", "--config", cfg, "--out", out]).exit_code == 0
        assert _run(["mc", "--config", cfg, "--out", out]).exit_code == 0
        # tamper the mc means to force a large z-score
        mc_path = os.path.join(out, "mc.csv")
        lines = open(mc_path).read().splitlines()
        header = lines[0].split(",")
        i_mean, i_err = header.index("mean"), header.index("stderr")
        rows = []
        for line in lines[1:]:
            parts = line.split(",")
            parts[i_mean] = "1000.0"
            parts[i_err] = "0.001"
            rows.append(",".join(parts))
        open(mc_path, "w").write("\n".join([lines[0]] + rows) + "\n")
        res = _run(["compare", "--config", cfg, "--out", out, "--strict"])
        assert res.exit_code == 3
        res = _run(["compare", "--config", cfg, "--out", out])
        assert res.exit_code == 0  # without --strict only reports

    def test_compare_requires_inputs(self, workdir):
        tmp, cfg = workdir
        out = str(tmp / "empty")
        os.makedirs(out, exist_ok=True)
        res = _run(["compare", "--config", cfg, "--out", out])
        assert res.exit_code == 1

    def test_qtable_reused_from_disk(self, workdir):
        tmp, cfg = workdir
        out = str(tmp / "qt")
        assert _run(["compute-q", "--config", cfg, "--out", out]).exit_code == 0
        stamp = os.path.getmtime(os.path.join(out, "qtable.bin"))
        assert _run(["corr", "--config", cfg, "--out", out]).exit_code == 0
        assert os.path.getmtime(os.path.join(out, "qtable.bin")) == stamp
