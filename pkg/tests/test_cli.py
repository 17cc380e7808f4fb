import numpy as np
import pytest

from conftest import tiny_case
from nilm_ssl import models as M
from nilm_ssl.cli import main
from nilm_ssl.metrics import read_estimate_csv


def files(d):
    return {p.relative_to(d).as_posix(): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def test_synth_is_bit_identical(tmp_path):
    for run in ("a", "b"):
        assert main(["synth", "--days", "1", "--seed", "42", "--out", str(tmp_path / run)]) == 0
    a, b = files(tmp_path / "a"), files(tmp_path / "b")
    assert set(a) == {"desk_case.cfg", "target.csv", "source1.csv", "source2.csv"}
    assert a == b


def test_synth_single_household(tmp_path):
    assert main(["synth", "--single", "--days", "1", "--seed", "1", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "household.csv").exists()


def test_evaluate_identical_files_is_all_zero(tmp_path, capsys):
    p = tmp_path / "e.csv"
    p.write_text("timestamp,estimate_watts,truth_watts\n0,1.5,1.5\n60,2.5,\n120,0.0,3.0\n")
    assert main(["evaluate", "--pred", str(p), "--truth", str(p)]) == 0
    out = capsys.readouterr().out
    assert "mae_w=0.0 sae=0.0 epd_kwh_per_day=0.0" in out


def test_evaluate_writes_table(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("timestamp,estimate_watts,truth_watts\n0,1.0,2.0\n60,3.0,2.0\n")
    out = tmp_path / "r.csv"
    assert main(["evaluate", "--pred", str(p), "--truth", str(p), "--truth-column", "truth_watts",
                 "--out", str(out)]) == 0
    assert out.read_text().splitlines()[1].startswith("appliance,1.0,")


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_missing_required_flag_exits_2(tmp_path):
    with pytest.raises(SystemExit) as e:
        main(["disaggregate", "--model", "m.json"])
    assert e.value.code == 2
    assert main(["ingest", "--format", "channel_dat", "--input", "x"]) == 2


def test_errors_are_one_machine_parsable_line(tmp_path, capsys):
    code = main(["evaluate", "--pred", str(tmp_path / "nope.csv"), "--truth", str(tmp_path / "nope.csv")])
    err = capsys.readouterr().err.strip().splitlines()
    assert code == 1
    assert len(err) == 1 and err[0].startswith("error: ")
    p = tmp_path / "bad.cfg"
    p.write_text("houses: {}\n")
    assert main(["run-case", "--config", str(p), "--out", str(tmp_path / "o")]) == 1
    assert capsys.readouterr().err.startswith("error: ConfigurationError: ")


def test_ingest_channel_files(tmp_path):
    agg = tmp_path / "agg.dat"
    fr = tmp_path / "fridge.dat"
    t0 = 1388534400
    agg.write_text("".join(f"{t0 + 6 * i} {100 + i}\n" for i in range(50)))
    fr.write_text("".join(f"{t0 + 6 * i} {i % 2 * 100}\n" for i in range(50)))
    out = tmp_path / "h.csv"
    assert main(["ingest", "--format", "channel_dat", "--input", str(agg), "--channel", f"fridge={fr}",
                 "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "timestamp,aggregate,fridge,valid"
    assert len(lines) == 1 + 5
    assert lines[1] == f"{t0},104.5,50.0,1"


def test_stage_commands_chain(tmp_path):
    cfg = tiny_case(tmp_path / "d", seed=2)
    ck = tmp_path / "ck"
    assert main(["pretrain", "--config", str(cfg), "--arch", "BiGRU", "--out", str(ck / "pre.json")]) == 0
    assert main(["finetune", "--config", str(cfg), "--arch", "BiGRU", "--appliance", "fridge",
                 "--scheme", "PSSL", "--pretext", str(ck / "pre.json"), "--out", str(ck / "pssl.json")]) == 0
    assert main(["train-zsl", "--config", str(cfg), "--arch", "BiGRU", "--appliance", "fridge",
                 "--out", str(ck / "zsl.json")]) == 0
    pre, pssl = M.load_checkpoint(ck / "pre.json"), M.load_checkpoint(ck / "pssl.json")
    for name, p in pre.params.items():
        if name.split("/")[0] not in M.HEAD_LAYERS:
            assert np.array_equal(p.value, pssl.params.value(name))
    est = tmp_path / "est.csv"
    assert main(["disaggregate", "--model", str(ck / "zsl.json"), "--input", str(tmp_path / "d" / "target.csv"),
                 "--truth-channel", "fridge", "--out", str(est)]) == 0
    s = read_estimate_csv(est)
    assert s.valid.all() and (s.values >= 0).all()
    assert main(["evaluate", "--pred", str(est), "--truth", str(est), "--truth-column", "truth_watts"]) == 0
    # a pretext-only checkpoint cannot disaggregate
    assert main(["disaggregate", "--model", str(ck / "pre.json"), "--input", str(tmp_path / "d" / "target.csv"),
                 "--out", str(tmp_path / "x.csv")]) == 1
