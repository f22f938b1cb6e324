import json
import subprocess
import sys

import pytest

from nslog.cli import main, resolve_config
from nslog.errors import ConfigError


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def _run(tmp_path, cfg):
    return main(["run", str(_write(tmp_path, cfg))])


def test_mild_run_smoke(tmp_path):
    code = _run(tmp_path, {"kind": "mild_run", "output": "out", "mesh": {"J": 32}})
    assert code == 0
    out = tmp_path / "out"
    record = json.loads((out / "record.json").read_text())
    assert record["status"] == "ok" and record["config"]["grid"]["modes"] == 16
    manifest = json.loads((out / "manifest.json").read_text())
    names = {a["path"] for a in manifest["artifacts"]}
    assert "record.json" in names and any(n.startswith("solution") for n in names)


def test_run_is_deterministic(tmp_path):
    cfg = {"kind": "galerkin_run", "output": "a", "mesh": {"J": 16}, "galerkin": {"n": 20}}
    assert _run(tmp_path, cfg) == 0
    first = (tmp_path / "a" / "manifest.json").read_text()
    assert _run(tmp_path, cfg) == 0
    assert (tmp_path / "a" / "manifest.json").read_text() == first


@pytest.mark.parametrize(
    "cfg",
    [
        {"kind": "mild_run", "output": "bad", "grid": {"modes": 15}},
        {"kind": "mild_run", "output": "bad", "colour": 1},
        {"kind": "teleport", "output": "bad"},
        {"kind": "mild_run", "output": "bad", "initial": {"family": "nope"}},
        {"kind": "mild_run", "output": "bad", "initial": {"file": "missing.nslg"}},
    ],
)
def test_malformed_config(tmp_path, cfg):
    assert _run(tmp_path, cfg) == 2
    assert not (tmp_path / "bad").exists()


def test_invalid_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    assert main(["run", str(p)]) == 2


def test_gate_failure_exit_code(tmp_path):
    cfg = {"kind": "mild_run", "output": "gate", "mesh": {"J": 16},
           "initial": {"family": "taylor_green_mixed", "params": {"amplitude": 50.0}}}
    assert _run(tmp_path, cfg) == 3
    record = json.loads((tmp_path / "gate" / "record.json").read_text())
    assert record["status"] == "failed" and record["stage"] and record["error"]["type"] == "GateError"


def test_split_failure_exit_code(tmp_path):
    cfg = {"kind": "composite_run", "output": "split", "mesh": {"J": 16}, "composite": {"eps1": 0.0}}
    assert _run(tmp_path, cfg) == 3
    assert json.loads((tmp_path / "split" / "record.json").read_text())["stage"] == "split"


def test_record_embeds_resolved_config():
    cfg = resolve_config({"kind": "perturbed_run", "output": "x"})
    assert cfg["solver"]["r"] == 0.5 and cfg["drift"]["kind"] == "mild" and cfg["seed"] == 0
    with pytest.raises(ConfigError):
        resolve_config({"kind": "perturbed_run"})


def test_field_file_initial(tmp_path):
    from nslog.families import random_band
    from nslog.fieldio import write_field
    from nslog.spectral import make_grid

    write_field(tmp_path / "u0.nslg", random_band(make_grid(2, 16), 2, 3, 0.01))
    cfg = {"kind": "norm_study", "output": "norms", "initial": {"file": "u0.nslg"}}
    assert _run(tmp_path, cfg) == 0
    assert (tmp_path / "norms" / "lp_blocks.csv").exists()


def test_property_suite_kind(tmp_path):
    cfg = {"kind": "property_suite", "output": "props", "filter": ["spectral_core"]}
    assert _run(tmp_path, cfg) == 0
    rows = (tmp_path / "props" / "properties.csv").read_text().splitlines()
    assert rows[0].startswith("module,check,status") and all(",pass," in r for r in rows[1:])


def test_families_verb(capsys):
    assert main(["families"]) == 0
    out = capsys.readouterr().out
    assert out.count("divergence free and mean zero on 32x32: yes") >= 4


def test_suite_verb_filter(tmp_path, capsys):
    assert main(["suite", "--filter", "spectral_core", "--csv", str(tmp_path / "s.csv")]) == 0
    assert "checks passed" in capsys.readouterr().out
    assert main(["suite", "--filter", "nowhere"]) == 2


def test_version_and_threads(capsys):
    assert main(["--threads", "1", "version"]) == 0
    assert capsys.readouterr().out.startswith("nslog ")
    assert main(["--threads", "0", "version"]) == 2


def test_console_module_entry():
    res = subprocess.run([sys.executable, "-m", "nslog.cli", "version"], capture_output=True, text=True)
    assert res.returncode == 0 and "nslog" in res.stdout
