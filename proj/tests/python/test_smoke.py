import json
import math
import pathlib

import pytest

import nspe

CONFIG = pathlib.Path(__file__).resolve().parents[2] / "configs" / "smoke.json"


def small_config():
    cfg = nspe.load_config(str(CONFIG))
    cfg.runs = 2
    cfg.iterations = 500
    cfg.trace_points = 10
    return cfg


def test_config_roundtrip():
    cfg = small_config()
    assert cfg.num_nodes == 3
    assert cfg.num_tasks == 4
    assert cfg.variants == [
        "non_cooperative",
        "oracle_dnspe",
        "blind_dnspe",
        "ud_nspe",
    ]
    cfg.variants = ["non_cooperative"]
    assert cfg.variants == ["non_cooperative"]


def test_bad_config_raises():
    with pytest.raises(nspe.ConfigError):
        nspe.parse_config("{}")
    with pytest.raises(nspe.ConfigError):
        cfg = small_config()
        cfg.variants = []


def test_run_produces_finite_metrics():
    cfg = small_config()
    res = nspe.run_experiment(cfg)
    assert [v.name for v in res.variants] == cfg.variants
    for v in res.variants:
        assert v.completed_runs == 2
        assert v.diverged_runs == 0
        msd = v.steady_msd_db["network"]
        assert math.isfinite(msd)
        assert len(v.mean_trace.iterations) == len(v.mean_trace.db["network"])
    ud = res.variants[-1]
    assert 0.0 <= ud.precision <= 1.0
    assert 0.0 <= ud.recall <= 1.0
    blind = res.variants[2]
    assert blind.bias_available
    for r in res.runs:
        # every variant consumed the same observation stream
        assert len(set(r.stream_hash)) == 1


def test_summary_is_deterministic():
    cfg = small_config()
    a = json.loads(nspe.summary_json(nspe.run_experiment(cfg), cfg))
    b = json.loads(nspe.summary_json(nspe.run_experiment(cfg), cfg))
    a.pop("timing")
    b.pop("timing")
    assert a == b
