import csv
import io
import json
import math

import pytest

from stueck import __version__
from stueck.cli import main
from stueck.config import ConfigError, RunConfig, from_dict, load, reference

SMALL_EVOLVE = """
[grid]
lo = -20.0
hi = 20.0
n = 256

[evolution]
preset = "{preset}"
ds = 1e-3
n_steps = 200
snapshot_stride = 100

[trajectories]
n_traj = {n_traj}
seed = 3
"""


def read_csv(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def run(tmp_path, *argv):
    return main(["--out", str(tmp_path), *argv])


def test_version_and_help(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert __version__ in capsys.readouterr().out
    assert main([]) == 2


def test_dump_config_lists_every_section(capsys):
    assert main(["--dump-config"]) == 0
    text = capsys.readouterr().out
    for section in ("[grid]", "[evolution]", "[potential]", "[trajectories]", "[oscillation]", "[masses]",
                    "[cosmo]"):
        assert section in text


def test_masses_json(tmp_path):
    assert main(["masses", "--out", str(tmp_path), "--format", "json"]) == 0
    body = json.loads((tmp_path / "masses.json").read_text())
    assert body["schema_version"] == 1
    assert body["masses_abs"][1] == pytest.approx(0.131141, rel=1e-5)
    assert body["bound_pass"] is True
    assert max(abs(v) for v in body["roundtrip_residuals"].values()) < 1e-9


def test_masses_prqm_stdout(capsys):
    assert main(["masses", "--model", "prqm"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("# schema_version: 1\n")
    assert "0.18546" in out


def test_table1_csv(tmp_path):
    assert run(tmp_path, "table1") == 0
    rows = {r["quantity"]: r for r in read_csv(tmp_path / "table1.csv")}
    for key in ("|m1|", "|m2|", "|m3|"):
        assert abs(float(rows[key]["rel_delta_standard"])) < 2.5e-3
        assert abs(float(rows[key]["rel_delta_prqm"])) < 2.5e-3


def test_table1_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["table1", "--out", str(a)]) == 0
    assert main(["table1", "--out", str(b)]) == 0
    assert (a / "table1.csv").read_bytes() == (b / "table1.csv").read_bytes()


def test_infeasible_masses_exit_3(tmp_path):
    assert run(tmp_path, "masses", "--dm21", "0") == 3


def test_pipeline_verdicts(tmp_path):
    assert run(tmp_path, "pipeline", "--format", "json") == 0
    body = json.loads((tmp_path / "pipeline.json").read_text())
    verdicts = {r["model"]: r["verdict"] for r in body["results"]}
    assert verdicts == {"standard": "inconsistent", "prqm": "consistent"}
    assert main(["pipeline", "--out", str(tmp_path), "--format", "json", "--lss", "150"]) == 0
    body = json.loads((tmp_path / "pipeline.json").read_text())
    verdicts = {r["model"]: r["verdict"] for r in body["results"]}
    assert verdicts == {"standard": "consistent", "prqm": "inconsistent"}


def test_zero_lss_scale_exit_2(tmp_path):
    assert run(tmp_path, "pipeline", "--lss", "0") == 2
    assert run(tmp_path, "cosmo", "--lss", "0") == 2


def test_cosmo_json(tmp_path):
    assert run(tmp_path, "cosmo", "--format", "json") == 0
    body = json.loads((tmp_path / "cosmo.json").read_text())
    assert body["muraki"]["diameter"] == pytest.approx(88.9, abs=0.05)
    assert body["muraki"]["verdict"] == "consistent"
    assert body["self_consistent"]["diameter"] > 0


def test_oscillate_sweep(tmp_path):
    assert run(tmp_path, "oscillate", "--axis", "L", "--start", "1", "--stop", "300", "--num", "5") == 0
    rows = read_csv(tmp_path / "oscillation.csv")
    assert len(rows) == 5
    for r in rows:
        assert 0 <= float(r["survival_standard"]) <= 1 and 0 <= float(r["survival_prqm"]) <= 1
    assert run(tmp_path, "oscillate", "--num", "0") == 2


def test_unknown_config_key_exit_2(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[grid]\nnodes = 5\n")
    assert main(["masses", "--config", str(cfg)]) == 2
    assert "nodes" in capsys.readouterr().err


def test_bad_thread_count(tmp_path, monkeypatch):
    monkeypatch.setenv("STUECK_THREADS", "0")
    assert run(tmp_path, "masses") == 2


def test_evolve_free_gaussian(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(SMALL_EVOLVE.format(preset="free-gaussian", n_traj=200))
    out = tmp_path / "out"
    assert main(["evolve", "--config", str(cfg), "--out", str(out)]) == 0
    index = json.loads((out / "index.json").read_text())
    assert [e["filename"] for e in index["snapshots"]] == [
        "snapshot_000000.csv", "snapshot_000100.csv", "snapshot_000200.csv"]
    diag = read_csv(out / "diagnostics.csv")
    assert max(float(r["norm_drift"]) for r in diag) < 1e-10
    assert math.isnan(float(diag[0]["L2_continuity"]))
    assert float(diag[1]["L2_continuity"]) < 1e-3
    assert all(0 <= float(r["KS"]) < 0.2 for r in diag)


def test_evolve_plane_wave_lambda(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(SMALL_EVOLVE.format(preset="plane-wave", n_traj=0))
    out = tmp_path / "out"
    assert main(["evolve", "--config", str(cfg), "--out", str(out), "--format", "json"]) == 0
    diag = json.loads((out / "diagnostics.json").read_text())["diagnostics"]
    assert max(d["max_abs_lambda"] for d in diag) < 1e-9


def test_trajectories_command(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(SMALL_EVOLVE.format(preset="free-gaussian", n_traj=50) + "record_stride = 100\n")
    out = tmp_path / "out"
    assert main(["trajectories", "--config", str(cfg), "--out", str(out), "--seed", "4"]) == 0
    rows = read_csv(out / "trajectories.csv")
    assert len(rows) == 50 * 3
    assert read_csv(out / "equivariance.csv")


# ---- config


def test_config_defaults_round_trip(tmp_path):
    path = tmp_path / "ref.toml"
    path.write_text(reference(RunConfig()))
    assert load(path) == RunConfig()


def test_config_coerces_and_rejects():
    cfg = from_dict({"grid": {"n": 128}, "masses": {"dm2_21": 1}})
    assert cfg.grid.n == 128 and isinstance(cfg.masses.dm2_21, float)
    with pytest.raises(ConfigError, match="nope"):
        from_dict({"nope": {}})
    with pytest.raises(ConfigError):
        from_dict({"grid": {"n": "many"}})
