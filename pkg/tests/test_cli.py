"""Command line: exit-status contract, determinism, CSV round trip and config handling."""
import json
import subprocess
import sys

import numpy as np
import pytest

from regvar_lab import cli, config
from regvar_lab.errors import ConfigError
from regvar_lab.functions import write_csv
from regvar_lab.report import REPORT_VERSION, dumps

SMALL_ANALYZE = "[analyze]\nn = 20000\n"


def run_cli(tmp_path, command, ini="", *extra):
    cfg = tmp_path / f"{command}.ini"
    cfg.write_text(ini)
    out = tmp_path / f"{command}.out"
    code = cli.main([command, "--config", str(cfg), "--out", str(out), *extra])
    text = out.read_text() if out.exists() else ""
    return code, text


def test_analyze_default_like(tmp_path):
    code, text = run_cli(tmp_path, "analyze", "[analyze]\nn = 100000\n")
    rep = json.loads(text)
    assert code == 0 and rep["status"] == "ok" and rep["exit_code"] == 0
    assert rep["version"] == REPORT_VERSION
    assert abs(rep["results"]["kappa_hat"] - 1.7) < 0.02
    for key in ("g_hat", "K_hat", "kappa_hat", "c_hat", "mult_residual", "rescfe_residual",
                "uniformity_profile", "feasible_window"):
        assert key in rep["results"]


@pytest.mark.parametrize("ini,code", [
    (SMALL_ANALYZE + "function = sin_osc\n", cli.EXIT_NONCONVERGENT),
    (SMALL_ANALYZE + "function = 1/x\na_policy = one\n", cli.EXIT_TRIVIAL),
    (SMALL_ANALYZE + "s_values = 4\n", cli.EXIT_EMPTY_ANCHOR),
    (SMALL_ANALYZE + "s_values = 1.2345\n", cli.EXIT_CONFIG),
    (SMALL_ANALYZE + "function = nope(x)\n", cli.EXIT_CONFIG),
    (SMALL_ANALYZE + "function_csv = /nonexistent.csv\n", cli.EXIT_DATA),
])
def test_analyze_exit_statuses(tmp_path, ini, code):
    got, text = run_cli(tmp_path, "analyze", ini)
    assert got == code
    rep = json.loads(text)
    assert rep["exit_code"] == code and rep["status"] == cli.STATUS_NAMES[code]
    assert "error" in rep


def test_non_convergence_carries_diagnostics(tmp_path):
    _, text = run_cli(tmp_path, "analyze", SMALL_ANALYZE + "function = sin_osc\n")
    assert json.loads(text)["diagnostics"]["max_tail_oscillation"] > 0


def test_config_errors_exit_before_running(tmp_path, capsys):
    code, text = run_cli(tmp_path, "analyze", "[analyze]\n\nbogus = 1\n")
    assert code == cli.EXIT_CONFIG and text == ""
    assert "analyze.ini:3: unknown key 'bogus'" in capsys.readouterr().err


def test_status_codes_are_distinct():
    assert len(set(cli.STATUS_NAMES)) == len(set(cli.STATUS_NAMES.values())) == 8


def test_constant_csv_gives_zero_index(tmp_path):
    x = np.geomspace(1.0, 1e5, 2000)
    csv_path = tmp_path / "const.csv"
    write_csv(csv_path, x, np.full_like(x, 7.0))
    code, text = run_cli(tmp_path, "analyze", f"[analyze]\nfunction_csv = {csv_path}\nn = 20000\n")
    rep = json.loads(text)
    assert code == 0 and rep["results"]["kappa_hat"] == 0.0
    assert rep["results"]["triviality_flag"] is True


def test_malformed_csv_is_data_error(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("x,value\n1,2\n2,oops\n")
    code, text = run_cli(tmp_path, "esslim", f"[esslim]\nfunction_csv = {bad}\n")
    assert code == cli.EXIT_DATA
    assert "bad.csv:3" in json.loads(text)["error"]


def test_esslim_and_csv_round_trip(tmp_path):
    exported = tmp_path / "spiked.csv"
    code, first = run_cli(tmp_path, "esslim", f"[esslim]\nexport_csv = {exported}\n")
    assert code == 0
    rep = json.loads(first)
    assert rep["results"]["ess_lim"]["verdict"] == "converges"
    assert abs(rep["results"]["ess_lim"]["limit"] - 2) < 0.01
    assert rep["results"]["plain_limit"]["verdict"] != "converges"
    assert rep["results"]["source"]["spikes"] == {"fraction": 0.001, "height": 100.0, "seed": 0}
    code, second = run_cli(tmp_path, "esslim", f"[esslim]\nfunction_csv = {exported}\n")
    again = json.loads(second)
    assert code == 0
    assert again["results"]["ess_lim"] == rep["results"]["ess_lim"]
    assert again["results"]["plain_limit"] == rep["results"]["plain_limit"]


def test_esslim_divergent_status(tmp_path):
    code, _ = run_cli(tmp_path, "esslim", "[esslim]\nfunction = sin(x)\nsamples = 5000\n")
    assert code == cli.EXIT_NONCONVERGENT


def test_verify_fe(tmp_path):
    code, text = run_cli(tmp_path, "verify-fe", "[verify-fe]\ncell = inf, inf, 2\nt = 3\nbroken_kernel = yes\n")
    rep = json.loads(text)
    assert code == 0
    assert rep["results"]["cell_value"]["value"] == 9.0
    assert len(rep["results"]["cells"]) == 45
    assert rep["results"]["broken_kernel"]["residual_at_1_1"] == 1.0
    code, text = run_cli(tmp_path, "verify-fe", "[verify-fe]\nthreshold = 1e-30\nkappas = 3\n")
    assert code == cli.EXIT_VERIFY


def test_text_format(tmp_path):
    code, text = run_cli(tmp_path, "verify-fe", "[verify-fe]\ncell = inf, inf, 2\n", "--format", "text")
    assert code == 0 and "cell value: 9" in text and "t^k = 9" in text


def test_phi_command(tmp_path):
    code, text = run_cli(tmp_path, "phi", "[phi]\nphi = affine_phi(3, 0.5)\n")
    rep = json.loads(text)
    assert code == 0 and abs(rep["results"]["analysis"]["rho_hat"] - 0.5) < 1e-12
    code, _ = run_cli(tmp_path, "phi", "[phi]\nphi = x*(2+sin(x))\n")
    assert code == cli.EXIT_NONCONVERGENT


def test_sequences_command(tmp_path):
    ini = "[sequences]\ncheckpoints = 1000, 10000\ndilation_phi = x\ndilation_b = 40\n"
    code, text = run_cli(tmp_path, "sequences", ini)
    rep = json.loads(text)["results"]
    assert code == 0
    assert rep["croft"]["strictly_increasing"]
    assert rep["dilation"]["q"] == "10/1"


def test_infeasible_dilation_is_data_error(tmp_path):
    ini = "[sequences]\ncroft = no\ndilation_phi = const(1)\ndilation_b = 0.5\n"
    code, _ = run_cli(tmp_path, "sequences", ini)
    assert code == cli.EXIT_DATA


@pytest.mark.parametrize("command,ini", [
    ("analyze", SMALL_ANALYZE),
    ("verify-fe", "[verify-fe]\ntrials = 200\n"),
    ("esslim", ""),
    ("phi", ""),
])
def test_byte_identical_reruns(tmp_path, command, ini):
    _, a = run_cli(tmp_path, command, ini, "--seed", "42")
    _, b = run_cli(tmp_path, command, ini, "--seed", "42")
    assert a == b and a


def test_seed_changes_random_draws(tmp_path):
    _, a = run_cli(tmp_path, "verify-fe", "[verify-fe]\ntrials = 50\n", "--seed", "1")
    _, b = run_cli(tmp_path, "verify-fe", "[verify-fe]\ntrials = 50\n", "--seed", "2")
    assert json.loads(a)["results"]["cells"] != json.loads(b)["results"]["cells"]


def test_timing_is_opt_in(tmp_path):
    _, plain = run_cli(tmp_path, "table")
    _, timed = run_cli(tmp_path, "table", "", "--timing")
    assert "timing" not in json.loads(plain) and "timing" in json.loads(timed)


def test_bad_seed(tmp_path):
    code, _ = run_cli(tmp_path, "table", "", "--seed", "-1")
    assert code == cli.EXIT_CONFIG


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "regvar_lab", "table", "--format", "text"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "t^k = 9" in proc.stdout


def test_config_loading():
    s = config.load("analyze", text="[run]\nseed = 9\n[analyze]\nholes = 1.1:1.2, 1.5:1.6\nn_ladder = 1e3, 1e4\n")
    assert s["seed"] == 9 and s["holes"] == ((1.1, 1.2), (1.5, 1.6)) and s["n_ladder"] == (1000, 10000)
    assert config.load("table") == {**config.defaults("table"), "seed": 0}
    # sections for other commands are validated but ignored
    assert config.load("table", text="[phi]\ntol = 0.1\n")["kappa"] == 2.0


@pytest.mark.parametrize("text,fragment", [
    ("[nope]\n", "<config>:1: unknown section"),
    ("[analyze]\ntol = 0\n", "<config>:2: analyze.tol must be > 0"),
    ("[analyze]\nn = many\n", "<config>:2: bad value"),
    ("[esslim]\nholes = 1\n", "unknown key"),
    ("[sequences]\ncroft = maybe\n", "bad value"),
    ("no section\n", "<config>"),
])
def test_config_errors(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        config.load("analyze", text=text)


def test_dumps_format():
    text = dumps({"a": 0.1, "b": float("nan"), "c": [np.float64(1 / 3)], "d": (1, 2)})
    assert json.loads(text) == {"a": 0.1, "b": None, "c": [1 / 3], "d": [1, 2]}
    assert "0.33333333333333331" in text
