import csv
import json

import pytest

from pulseqa import cli
from pulseqa.errors import NumericalError


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_help_mentions_units(capsys):
    for command in ("single-sweep", "tm-compare", "instance", "ensemble", "scaling"):
        with pytest.raises(SystemExit) as exc:
            cli.main([command, "--help"])
        assert exc.value.code == 0
        text = capsys.readouterr().out
        assert "hbar/Delta" in text


def test_single_sweep_c_axis(tmp_path):
    out = tmp_path / "c.csv"
    assert cli.main(["single-sweep", "--eps", "1", "--tf", "10", "--axis", "C", "--min", "0", "--max", "6",
                     "--steps", "7", "--tc", "1", "--td", "1", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["sweep_param", "sp_num", "sp_tm", "sp_appr"]
    assert len(rows) == 8 and float(rows[-1][0]) == 6.0
    assert rows[1][2] == "1.0"


def test_single_sweep_single_step(tmp_path):
    out = tmp_path / "one.csv"
    assert cli.main(["single-sweep", "--eps", "1", "--tf", "10", "--axis", "td", "--c", "1", "--steps", "1",
                     "--min", "2", "--max", "2", "--out", str(out)]) == 0
    assert len(read_csv(out)) == 2


def test_contour_and_window_outside(tmp_path):
    out = tmp_path / "grid.csv"
    assert cli.main(["single-sweep", "--eps", "0.5", "--tf", "5", "--tc", "2.5", "--axis", "contour",
                     "--c-steps", "3", "--td-steps", "4", "--integrator", "batched", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["C", "t_D", "sp_num"] and len(rows) == 13
    assert len({r[2] for r in rows[1:5]}) == 1  # C = 0 row is the pulse-free value
    wide = tmp_path / "wide.csv"
    assert cli.main(["single-sweep", "--eps", "1", "--tf", "10", "--axis", "td", "--c", "1", "--tc", "2",
                     "--min", "1", "--max", "8", "--steps", "3", "--out", str(wide)]) == 0
    assert read_csv(wide)[3][2] == ""  # the transfer-matrix model rejects windows outside [0, t_f]


def test_tm_compare_summary(tmp_path, capsys):
    out = tmp_path / "cmp.csv"
    assert cli.main(["tm-compare", "--eps", "1", "--tf", "10", "--axis", "C", "--min", "0", "--max", "6",
                     "--steps", "120", "--tc", "1", "--td", "1", "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["max_abs_dev"] <= 0.08
    assert all(d is not None and d <= 1 for d in summary["maxima_offsets"])


def test_instance_outputs(tmp_path):
    out = tmp_path / "inst"
    assert cli.main(["instance", "--n", "3", "--seed", "4", "--tf", "4", "--pulse", "2", "1", "0.3",
                     "--trace", "--trace-samples", "5", "--levels", "3", "--dt", "0.004", "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["spectrum_conventional.csv", "spectrum_pulsed.csv", "summary.json",
                     "trace_conventional.csv", "trace_pulsed.csv"]
    assert read_csv(out / "trace_pulsed.csv")[0] == ["t", "P0", "P1", "norm"]
    assert read_csv(out / "spectrum_pulsed.csv")[0] == ["t", "E0", "E1", "E2"]
    summary = json.loads((out / "summary.json").read_text())
    assert {"sp_conventional", "sp_pulsed", "gap", "instance"} <= set(summary)


def test_instance_without_pulse_or_trace(tmp_path):
    inst = tmp_path / "i.json"
    inst.write_text(json.dumps({"n": 2, "seed": 1, "eps": [0.3, -0.2], "J": [[0, 1, 0.5]]}))
    out = tmp_path / "o"
    assert cli.main(["instance", "--instance", str(inst), "--tf", "3", "--dt", "0.01", "--out", str(out)]) == 0
    assert [p.name for p in out.iterdir()] == ["summary.json"]
    summary = json.loads((out / "summary.json").read_text())
    assert "sp_pulsed" not in summary


def test_instance_schema_error(tmp_path, capsys):
    inst = tmp_path / "i.json"
    inst.write_text(json.dumps({"n": 2, "seed": 1, "eps": [0.3, -0.2], "J": [[0, 1]]}))
    assert cli.main(["instance", "--instance", str(inst), "--tf", "3", "--out", str(tmp_path / "o")]) == 2
    assert "$.J[0]" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def _ensemble_args(out, *extra):
    return ["ensemble", "--n", "3", "--count", "4", "--tf", "3", "--preset", "fig7b", "--samples", "5",
            "--seed", "9", "--out", str(out), *extra]


def test_ensemble_outputs_and_threads(tmp_path):
    a, b = tmp_path / "a" / "e.csv", tmp_path / "b" / "e.csv"
    assert cli.main(_ensemble_args(a, "--threads", "1")) == 0
    assert cli.main(_ensemble_args(b, "--threads", "3")) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.with_suffix(".json").read_bytes() == b.with_suffix(".json").read_bytes()
    rows = read_csv(a)
    assert rows[0] == cli.ENSEMBLE_COLUMNS and len(rows) == 5
    stats = json.loads(a.with_suffix(".json").read_text())
    for key in ("fit_a", "fit_b", "crossover", "frac_av_improved", "frac_max_improved",
                "frac_max_improved_5pct", "bins"):
        assert key in stats
    assert stats["config"]["samples"] == "5"
    assert not list(a.parent.glob("*.manifest.jsonl"))


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 3, "count": 3, "tf": 3.0, "preset": "fig7b", "samples": 4, "seed": 1}))
    out = tmp_path / "e.csv"
    assert cli.main(["ensemble", "--config", str(cfg), "--seed", "2", "--out", str(out)]) == 0
    stats = json.loads(out.with_suffix(".json").read_text())
    assert stats["config"]["seed"] == 2 and stats["config"]["count"] == 3
    cfg.write_text(json.dumps({"bogus": 1}))
    assert cli.main(["ensemble", "--config", str(cfg), "--out", str(out)]) == 2


def test_ensemble_resumes_after_interruption(tmp_path, monkeypatch):
    fresh = tmp_path / "fresh" / "e.csv"
    assert cli.main(_ensemble_args(fresh, "--threads", "1")) == 0

    real = cli.run_instances

    def flaky(n, seeds, t_f, sampling, dt, threads, on_result):
        def stop_after_two(k, res):
            on_result(k, res)
            if k == 1:
                raise NumericalError("simulated failure", 1.0)
        return real(n, seeds, t_f, sampling, dt, threads, on_result=stop_after_two)

    resumed = tmp_path / "resumed" / "e.csv"
    monkeypatch.setattr(cli, "run_instances", flaky)
    assert cli.main(_ensemble_args(resumed, "--threads", "1")) == 3
    manifest = resumed.with_name("e.csv.manifest.jsonl")
    assert len(manifest.read_text().splitlines()) == 3
    assert not resumed.exists() and not resumed.with_suffix(".json").exists()

    calls = []
    monkeypatch.setattr(cli, "run_instances", lambda n, seeds, *a, **k: calls.append(len(seeds)) or real(n, seeds, *a, **k))
    assert cli.main(_ensemble_args(resumed, "--threads", "1")) == 0
    assert calls == [2]
    assert resumed.read_bytes() == fresh.read_bytes()
    assert resumed.with_suffix(".json").read_bytes() == fresh.with_suffix(".json").read_bytes()
    assert not manifest.exists()


def test_manifest_from_other_run_rejected(tmp_path):
    out = tmp_path / "e.csv"
    out.with_name("e.csv.manifest.jsonl").write_text(json.dumps({"config": {"n": 99}}) + "\n")
    assert cli.main(_ensemble_args(out)) == 2


def test_scaling(tmp_path):
    out = tmp_path / "s.csv"
    assert cli.main(["scaling", "--n-range", "2:3", "--count", "3", "--tf", "3", "--preset", "fig7b",
                     "--samples", "4", "--threads", "1", "--out", str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == cli.SCALING_COLUMNS and [r[0] for r in rows[1:]] == ["2", "3"]
    assert cli.main(["scaling", "--n-range", "13", "--count", "3", "--tf", "3", "--preset", "fig7b",
                     "--out", str(out)]) == 2


def test_config_errors_exit_2(tmp_path):
    out = str(tmp_path / "x.csv")
    assert cli.main(["ensemble", "--n", "3", "--count", "1", "--tf", "3", "--preset", "fig7b", "--out", out]) == 2
    assert cli.main(["single-sweep", "--eps", "1", "--tf", "10", "--axis", "C", "--out", out]) == 2
    assert cli.main(["single-sweep", "--eps", "1", "--tf", "10", "--axis", "C", "--td", "1",
                     "--dt", "1", "--out", out]) == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["single-sweep", "--tf", "-1"])
    assert exc.value.code == 2
    assert not (tmp_path / "x.csv").exists()


def test_numerical_failure_exit_3(tmp_path, monkeypatch):
    def boom(*args, **kwargs):
        raise NumericalError("non-finite state", 0.5)
    monkeypatch.setattr(cli, "evolve", boom)
    out = tmp_path / "c.csv"
    assert cli.main(["single-sweep", "--eps", "1", "--tf", "10", "--axis", "C", "--td", "1",
                     "--steps", "3", "--out", str(out)]) == 3
    assert not out.exists()
