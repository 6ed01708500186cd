from __future__ import annotations

import json

import numpy as np
import pytest

from numuon.compression import LowRankFactors
from numuon.config import RunConfig, config_from_dict, load_config, resolved_json
from numuon.errors import ConfigError, FormatError
from numuon.io import read_checkpoint, read_metrics, record_line, write_checkpoint


def test_checkpoint_round_trip_bit_exact(tmp_path, rng):
    blocks = {
        "layer0.weight": rng.standard_normal((7, 3)),
        "layer0.bias": rng.standard_normal(7),
        "odd": np.array([np.pi, -0.0, 5e-324, 1e308]).reshape(2, 2),
        "low": LowRankFactors(rng.standard_normal((6, 2)), rng.standard_normal((5, 2))),
    }
    path = tmp_path / "m.ckpt"
    write_checkpoint(path, blocks, meta={"sizes": [3, 7]})
    out, meta = read_checkpoint(path)
    assert list(out) == list(blocks)
    assert meta == {"sizes": [3, 7]}
    for n in ("layer0.weight", "layer0.bias", "odd"):
        assert out[n].tobytes() == blocks[n].tobytes()
        assert out[n].shape == blocks[n].shape
    assert out["low"].Wu.tobytes() == blocks["low"].Wu.tobytes()
    assert out["low"].Wv.tobytes() == blocks["low"].Wv.tobytes()


def test_checkpoint_layout(tmp_path):
    path = tmp_path / "a.ckpt"
    write_checkpoint(path, {"w": np.array([[1.0, 2.0]])})
    raw = path.read_bytes()
    magic, length, rest = raw.split(b"\n", 2)
    assert magic == b"SPOPT1"
    header = json.loads(rest[: int(length)])
    assert header["dtype"] == "<f8"
    assert header["blocks"] == [{"name": "w", "shape": [1, 2], "factored": False}]
    assert rest[int(length):] == np.array([1.0, 2.0], dtype="<f8").tobytes()


@pytest.mark.parametrize(
    "mutate",
    [
        lambda b: b.replace(b"SPOPT1", b"SPOPT9", 1),
        lambda b: b[:-3],
        lambda b: b + b"\x00" * 8,
        lambda b: b.replace(b"<f8", b"<f4", 1),
        lambda b: b"garbage",
    ],
)
def test_checkpoint_corruption(tmp_path, mutate):
    path = tmp_path / "c.ckpt"
    write_checkpoint(path, {"w": np.eye(2)})
    path.write_bytes(mutate(path.read_bytes()))
    with pytest.raises(FormatError):
        read_checkpoint(path)


def test_metrics_round_trip(tmp_path):
    recs = [{"step": 0, "loss": 1.5, "blocks": []}, {"step": 1, "loss": float("nan"), "blocks": [{"a": 1}]}]
    path = tmp_path / "m.jsonl"
    path.write_text("".join(record_line(r) for r in recs))
    back = read_metrics(path)
    assert back[0] == recs[0] and np.isnan(back[1]["loss"])
    path.write_text("{bad\n")
    with pytest.raises(FormatError):
        read_metrics(path)


def test_config_defaults_materialized():
    cfg = config_from_dict({"seed": 3, "total_steps": 20, "optimizer": {"mode": "numuon", "lr": 0.01},
                            "rank_schedule": {"kind": "cosine_hold", "hold_steps": 2}})
    assert cfg.lr_schedule.kind == "constant" and cfg.lr_schedule.base_lr == 0.01
    assert cfg.rank_schedule.total_steps == 20
    echoed = json.loads(resolved_json(cfg))
    assert echoed["optimizer"]["beta"] == 0.95
    assert echoed["model"]["hidden"] == [128, 128, 128]
    # the echo reproduces the same config
    assert config_from_dict(echoed).to_dict() == cfg.to_dict()


def test_config_lr_mirroring():
    cfg = config_from_dict({"total_steps": 10, "lr_schedule": {"kind": "wsd", "base_lr": 0.05}})
    assert cfg.optimizer.lr == 0.05 and cfg.lr_schedule.total_steps == 10


@pytest.mark.parametrize(
    "doc",
    [
        {"bogus": 1},
        {"optimizer": {"nope": 1}},
        {"optimizer": {"mode": "sgd"}},
        {"total_steps": 0},
        {"seed": "abc"},
        {"optimizer": {"lr": 0.1}, "lr_schedule": {"base_lr": 0.2}},
        {"task": {"teacher_rank": 100}},
        {"task": {"kind": "softmax_classification", "num_classes": 3}},
        {"lr_schedule": {"kind": "wsd", "total_steps": 5}},
        {"model": {"activation": "gelu"}},
        {"rank_schedule": {"kind": "piecewise", "breakpoints": [[3, 0.5]]}},
        {"diagnostics": {"every": 0}},
        [],
    ],
)
def test_config_errors(doc):
    with pytest.raises(ConfigError):
        config_from_dict(doc)


def test_load_config(tmp_path):
    p = tmp_path / "c.json"
    p.write_text('{"seed": 1, "total_steps": 5}')
    assert isinstance(load_config(p), RunConfig)
    p.write_text("{seed: 1")
    with pytest.raises(ConfigError):
        load_config(p)
