import json

import pytest

from weightedshift.cli import load_run_config, main, run_spectrum
from weightedshift.field import ConfigError


def single(s):
    # the composed report wraps each spectrum in a union carrying provenance
    assert s["kind"] == "union" and len(s["members"]) == 1
    return s["members"][0]


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


def test_classify_rotation(tmp_path, capsys):
    cfg = write(tmp_path, "rot.json", {"problem": {"builtin": "rotation"}, "samples": 30, "seed": 1})
    out = tmp_path / "out"
    assert main(["classify", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "classification_summary.json").read_text())
    assert summary["fractions"]["Omega3Periodic"] == 1.0
    assert (out / "classification.csv").exists() and (out / "run_meta.json").exists()


def test_classify_lorentz_has_no_omega3(tmp_path):
    cfg = write(tmp_path, "lor.json", {"builtin": "lorentz", "samples": 40})
    out = tmp_path / "out"
    assert main(["classify", "--config", cfg, "--out", str(out)]) == 0
    fr = json.loads((out / "classification_summary.json").read_text())["fractions"]
    assert fr["Omega1"] + fr["Omega2"] == 1.0


def test_schema_errors(tmp_path, capsys):
    cfg = write(tmp_path, "bad.json", {"builtin": "rotation", "samples": 0})
    assert main(["classify", "--config", cfg, "--out", str(tmp_path)]) == 2
    bad = tmp_path / "broken.json"
    bad.write_text('{"builtin": "rotation",\n "samples": }')
    assert main(["classify", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "line 2, column" in capsys.readouterr().err
    cfg = write(tmp_path, "unk.json", {"builtin": "rotation", "colour": 1})
    assert main(["spectrum", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_run_config_validation():
    with pytest.raises(ConfigError):
        load_run_config({"problem": {"builtin": "rotation"}, "t_steps": 2})
    with pytest.raises(ConfigError):
        load_run_config({"problem": {"builtin": "rotation"}, "flow": {"rtoll": 1e-3}})
    rc = load_run_config({"builtin": "rotation", "p": 2}, {"seed": 7})
    assert rc.seed == 7 and rc.problem == {"builtin": "rotation", "p": 2}


def test_spectrum_slab_nilpotent():
    rc = load_run_config({"problem": {"builtin": "slab_constant", "params": {"c": 1.0}}, "samples": 40,
                          "t_max": 4.0, "t_steps": 8, "t": 1.5})
    rep = run_spectrum(rc)
    assert rep["generator_spectrum"]["kind"] == "empty"
    semi = single(rep["semigroup_spectrum"])
    assert semi["kind"] == "discrete" and semi["points"] == [[0.0, 0.0]]


def test_spectrum_half_line():
    rc = load_run_config({"problem": {"builtin": "slab_constant", "params": {"c": 1.0, "right": None}},
                          "sample_box": [[0.0, 20.0]], "samples": 40, "t_max": 8.0, "t_steps": 16})
    rep = run_spectrum(rc)
    gen = single(rep["generator_spectrum"])
    assert gen["kind"] == "half_plane" and gen["re_max"] == pytest.approx(-1.0, abs=1e-6)
    semi = single(rep["semigroup_spectrum"])
    assert semi["radius"] == pytest.approx(0.36787944, abs=1e-6)


def test_spectrum_rotation_is_iz(tmp_path):
    cfg = write(tmp_path, "rot.json", {"builtin": "rotation", "samples": 20, "k_max": 3})
    out = tmp_path / "o"
    assert main(["spectrum", "--config", cfg, "--out", str(out)]) == 0
    rep = json.loads((out / "spectrum.json").read_text())
    gen = single(rep["generator_spectrum"])
    pts = sorted(round(im, 6) for re, im in gen["points"])
    assert pts == [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]
    assert single(rep["semigroup_spectrum"])["kind"] == "annulus"
    assert (out / "generator_spectrum.dat").read_text().strip()
    assert "candidate spectrum (inclusion-certified side only)" in gen["note"]


def test_gamma_and_periodic_commands(tmp_path):
    cfg = write(tmp_path, "half.json", {"problem": {"builtin": "slab_constant", "params": {"c": 0.7, "right": None}},
                                       "sample_box": [[0.0, 20.0]], "samples": 30, "t_max": 8, "t_steps": 16})
    out = tmp_path / "g"
    assert main(["gamma", "--config", cfg, "--out", str(out)]) == 0
    rep = json.loads((out / "gamma.json").read_text())
    assert rep["gamma"] == pytest.approx(0.7, abs=1e-6)
    cfg = write(tmp_path, "rot.json", {"builtin": "rotation", "samples": 10})
    out = tmp_path / "p"
    assert main(["periodic", "--config", cfg, "--out", str(out)]) == 0
    assert (out / "periodic.csv").exists() and (out / "candidate_spectrum.dat").exists()


def test_verify_exit_codes(tmp_path, capsys):
    cfg = write(tmp_path, "rot.json", {"builtin": "rotation", "samples": 10})
    assert main(["verify", "--config", cfg, "--out", str(tmp_path / "v")]) == 0
    bad = write(tmp_path, "badk.json", {"builtin": "rotation", "kappa": 0.1, "samples": 10})
    assert main(["verify", "--config", bad, "--out", str(tmp_path / "w")]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_demo_smt_failure(tmp_path, capsys):
    assert main(["demo-smt-failure", "--t", "1", "--k-max", "100", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "smt_report.json").read_text())
    assert rep["max_gap"] < 0.63 and rep["image_strictly_smaller"]
    assert main(["demo-smt-failure", "--t", "-1"]) == 2


def test_determinism(tmp_path):
    cfg = write(tmp_path, "rot.json", {"builtin": "vfp_fourier", "samples": 10, "horizon": 10, "seed": 3})
    bodies = []
    for name in ("a", "b"):
        assert main(["spectrum", "--config", cfg, "--out", str(tmp_path / name)]) == 0
        bodies.append((tmp_path / name / "spectrum.json").read_bytes())
    assert bodies[0] == bodies[1]
