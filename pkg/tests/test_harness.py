import json
import logging
import math
from pathlib import Path

import numpy as np
import pytest

from signvote.cli import main
from signvote.harness import ExperimentConfig, emit_csv, emit_json, load_config, run_experiment
from signvote.harness.config import ConfigError, parse_adversaries, to_text
from signvote.harness.experiment import build_workers
from signvote.harness.output import read_csv, read_json
from signvote.harness.verify import lemma1_suite, star_suite, theorem2_suite
from signvote.qsgd import bit_cost

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def small(**kw):
    base = dict(dim=50, workers=3, rounds=10, seed=1)
    base.update(kw)
    return ExperimentConfig(**base)


def test_empty_run_csv_is_header_only(tmp_path):
    path = emit_csv([], tmp_path / "empty.csv")
    assert path.read_text() == "round,f,grad_l1,mixed_norm,n_high_snr,vote_disagreement,bits\n"


def test_ten_rounds_eleven_lines(tmp_path):
    res = run_experiment(small())
    path = emit_csv(res.records, tmp_path / "run.csv")
    assert len(path.read_text().splitlines()) == 11
    assert read_csv(path) == res.records


def test_json_roundtrip(tmp_path):
    res = run_experiment(small())
    path = emit_json(res.records, tmp_path / "run.json", res.summary)
    records, summary = read_json(path)
    assert records == res.records
    assert summary == res.summary


def test_same_config_same_bytes(tmp_path):
    a = emit_csv(run_experiment(small(adversaries=parse_adversaries("1 sign_randomize"))).records, tmp_path / "a.csv")
    b = emit_csv(run_experiment(small(adversaries=parse_adversaries("1 sign_randomize"))).records, tmp_path / "b.csv")
    assert a.read_bytes() == b.read_bytes()
    c = emit_csv(run_experiment(small(seed=2)).records, tmp_path / "c.csv")
    assert a.read_bytes() != c.read_bytes()


def test_records_follow_invariants():
    res = run_experiment(small(rounds=30, adversaries=parse_adversaries("1 invert")))
    for k, r in enumerate(res.records):
        assert r.round == k
        assert r.bits == bit_cost("majority_vote", 3, 50).bits_per_iteration == 300
        assert r.f >= 0
        assert 0 <= r.n_high_snr <= 50 and 0 <= r.vote_disagreement <= 50
    assert res.summary["alpha"] == pytest.approx(1 / 3)
    assert res.summary["mean_mixed_norm"] == pytest.approx(np.mean([r.mixed_norm for r in res.records]))
    assert "theorem1_rhs" in res.summary and "theorem2_rhs" in res.summary


def test_config_text_roundtrip(tmp_path):
    cfg = ExperimentConfig(dim=12, workers=5, adversaries=parse_adversaries("1 invert, 1 rescale:1000000000.0"),
                           rounds=7, seed=3, schedule="theorem1")
    path = tmp_path / "c.ini"
    path.write_text(to_text(cfg))
    assert load_config(path) == cfg


def test_config_overrides_and_errors(tmp_path):
    cfg = load_config(None, ["experiment.workers=9", "optimizer.eta=0.5", "experiment.adversaries=4 invert"])
    assert (cfg.workers, cfg.optimizer.eta, cfg.n_adversaries) == (9, 0.5, 4)
    with pytest.raises(ConfigError):
        load_config(None, ["experiment.workers=2", "experiment.adversaries=3 invert"])
    with pytest.raises(ConfigError):
        load_config(None, ["experiment.colour=blue"])
    with pytest.raises(ConfigError):
        load_config(None, ["bogus.key=1"])
    with pytest.raises(ConfigError):
        load_config(None, ["noequals"])
    with pytest.raises(ConfigError):
        load_config(None, ["experiment.rounds=0"])
    with pytest.raises(ConfigError):
        load_config(None, ["experiment.aggregation=mean", "experiment.transport=tcp"])
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")
    with pytest.raises(ConfigError):
        load_config(None, ["experiment.adversaries=two invert"])


def test_even_worker_count_warns(caplog):
    with caplog.at_level(logging.WARNING):
        load_config(None, ["experiment.workers=4"])
    assert "even worker count" in caplog.text


def test_checked_in_configs_load():
    names = sorted(p.name for p in CONFIGS.glob("*.ini"))
    assert "sweep_inverters0.ini" in names and "sweep_inverters13.ini" in names
    for p in CONFIGS.glob("*.ini"):
        load_config(p)
    assert load_config(CONFIGS / "sweep_inverters13.ini").alpha == pytest.approx(13 / 27)


def test_adversaries_are_last_and_get_own_seeds():
    cfg = small(workers=5, adversaries=parse_adversaries("2 sign_randomize"))
    specs = [w.adversary for w in build_workers(cfg)]
    assert [s.kind for s in specs] == ["none", "none", "none", "sign_randomize", "sign_randomize"]
    assert specs[3].seed != specs[4].seed


def test_rate_schedules_resolve_in_summary():
    res = run_experiment(small(workers=1, rounds=100, schedule="theorem1"))
    assert res.summary["eta"] == pytest.approx(math.sqrt(25 / (50 * 100)))
    assert res.summary["batch_size"] == 1
    res = run_experiment(small(rounds=16, schedule="theorem2"))
    assert res.summary["batch_size"] == 16


def test_mean_aggregation_diverges_under_rescale():
    cfg = small(dim=1000, workers=3, rounds=100, aggregation="mean",
                adversaries=parse_adversaries("1 rescale:1e12"))
    res = run_experiment(cfg)
    assert res.summary["final_f"] > res.summary["f0"]
    robust = run_experiment(small(dim=1000, workers=3, rounds=100, adversaries=parse_adversaries("1 rescale:1e12")))
    assert robust.summary["final_f"] < robust.summary["f0"]


def test_cli_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(["run", "-c", str(CONFIGS / "equivalence.ini"), "--set", "experiment.rounds=5", "-o", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 6
    summary = json.loads(capsys.readouterr().out)
    assert summary["rounds"] == 5
    js = tmp_path / "r.json"
    assert main(["run", "--set", "experiment.dim=10", "--set", "experiment.rounds=3", "--seed", "4",
                 "--transport", "tcp", "-o", str(js)]) == 0
    assert len(json.loads(js.read_text())["records"]) == 3


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", "--set", "experiment.workers=0"]) == 2
    assert main(["verify", "star", "-o", str(tmp_path / "v.json")]) == 0
    assert json.loads((tmp_path / "v.json").read_text())["passed"] is True
    assert main(["bitcost", "--workers", "7", "--dim", "1000"]) == 0
    assert "7,1000,14000," in capsys.readouterr().out
    assert main(["bounds", "star", "--workers", "27", "--alpha", "0", "--snr", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "M,alpha,S,bound,vacuous" and lines[1].startswith("27,0.0,1.0,0.19245")
    assert main(["bounds", "lemma1", "--snr", "2"]) == 0
    assert capsys.readouterr().out.splitlines()[1].startswith("2.0,0.0555")


def test_verify_suites_report_structure():
    rep = lemma1_suite(trials=20_000)
    assert rep.passed
    bimodal = [c for c in rep.checks if c.expect_violation]
    assert len(bimodal) == 1 and bimodal[0].observed > 0.85
    star = star_suite()
    assert star.passed and len(star.checks) == 36 + 241
    assert json.loads(json.dumps(star.as_dict()))["passed"] is True


def test_majority_rate_suite_small():
    rep = theorem2_suite(dim=20, rounds=25, workers=9, seeds=2)
    assert rep.passed and len(rep.checks) == 2
