from __future__ import annotations

import numpy as np
import pytest

from conftest import orthonormal, with_singular_values
from numuon.compression import (
    LowRankFactors,
    checkpoint_params,
    compress_block,
    compress_model,
    densify,
    eval_compressed,
    rate_to_rank,
    select_blocks,
)
from numuon.errors import BlockTooSmall, FormatError, InvalidInput, InvalidRank
from numuon.models import init_mlp


def test_rate_to_rank_examples():
    for n in (8, 12, 64, 100):
        assert rate_to_rank(n, n, 0.5) == n // 4
    assert rate_to_rank(512, 2048, 0.2) == 327
    with pytest.raises(BlockTooSmall):
        rate_to_rank(4, 4, 0.99)
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(InvalidInput):
            rate_to_rank(4, 4, bad)


def test_rate_to_rank_saves_parameters():
    rng = np.random.default_rng(1)
    for _ in range(200):
        d_out, d_in = (int(x) for x in rng.integers(2, 300, 2))
        rate = float(rng.uniform(0.01, 0.99))
        try:
            k = rate_to_rank(d_out, d_in, rate)
        except BlockTooSmall:
            assert (d_out + d_in) > (1 - rate) * d_out * d_in
            continue
        assert k * (d_out + d_in) <= (1 - rate) * d_out * d_in
        assert (k + 1) * (d_out + d_in) > (1 - rate) * d_out * d_in


def test_compress_block_exact_low_rank(rng):
    W = with_singular_values(rng, 9, 7, [5.0, 2.0, 0.3])
    f = compress_block(W, 3)
    assert np.linalg.norm(f.dense() - W) <= 1e-9 * np.linalg.norm(W)
    assert f.size == 3 * (9 + 7)


def test_compress_block_diag():
    f = compress_block(np.diag([3.0, 2.0, 1.0]), 2)
    assert np.sum((f.dense() - np.diag([3.0, 2.0, 1.0])) ** 2) == pytest.approx(1.0)
    with pytest.raises(InvalidRank):
        compress_block(np.eye(3), 4)


def test_eckart_young_vs_random_candidates(rng):
    for _ in range(5):
        W = rng.standard_normal((6, 4))
        for k in (1, 2, 3):
            best = np.linalg.norm(W - compress_block(W, k).dense())
            for _ in range(200):
                # best fit inside a random rank-k row/column space pair
                U, V = orthonormal(rng, 6, k), orthonormal(rng, 4, k)
                cand = U @ (U.T @ W @ V) @ V.T
                assert best <= np.linalg.norm(W - cand) + 1e-12


def test_error_monotone_in_k(rng):
    W = rng.standard_normal((10, 8))
    errs = [np.linalg.norm(W - compress_block(W, k).dense()) for k in range(1, 9)]
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))


def test_select_blocks():
    names = [f"layer{i}.{p}" for i in range(12) for p in ("weight", "bias")]
    body = select_blocks(names, "body")
    assert body == [f"layer{i}.weight" for i in range(1, 11)]
    assert select_blocks(names, "hidden") == body
    assert len(select_blocks(names, "all")) == 12
    assert select_blocks(names, "layer3.weight, layer0.weight") == ["layer3.weight", "layer0.weight"]
    with pytest.raises(InvalidInput):
        select_blocks(names, "layer99.weight")


def test_compress_model_accounting(rng):
    model = init_mlp([16, 32, 32, 8, 4], rng=rng)
    ckpt = model.blocks()
    out, plan = compress_model(ckpt, 0.5, "all")
    # the 8 -> 4 head is 4x8: k = floor(0.5*32/12) = 1 is allowed
    expect_compressed = sum(
        rate_to_rank(*ckpt[n].shape, 0.5) * sum(ckpt[n].shape) for n in plan.per_block_rank
    )
    assert plan.compressed_params == expect_compressed
    assert plan.stored_params == checkpoint_params(out)
    assert plan.compressed_params <= 0.5 * plan.original_params
    assert set(plan.per_block_rank) == {f"layer{i}.weight" for i in range(4)}
    d = plan.to_dict()
    assert d["rate_denominator"] == "compressed blocks only"
    assert all(isinstance(out[n], LowRankFactors) for n in plan.per_block_rank)


def test_compress_model_skips_small_blocks(rng):
    model = init_mlp([3, 2, 3, 2], rng=rng)
    out, plan = compress_model(model.blocks(), 0.9, "all")
    assert plan.per_block_rank == {}
    assert sorted(plan.skipped_blocks) == ["layer0.weight", "layer1.weight", "layer2.weight"]
    assert plan.stored_params == checkpoint_params(model.blocks())


def test_compress_model_errors(rng):
    with pytest.raises(FormatError):
        compress_model({}, 0.5)
    f = LowRankFactors(np.ones((3, 1)), np.ones((3, 1)))
    with pytest.raises(FormatError):
        compress_model({"layer1.weight": f, "layer0.weight": np.eye(3), "layer2.weight": np.eye(3)}, 0.5)


def test_eval_compressed(rng):
    model = init_mlp([6, 10, 10, 3], rng=rng)
    X = rng.standard_normal((20, 6))
    Y = rng.standard_normal((20, 3))
    dense = eval_compressed(model, None, X, Y, "lowrank_teacher_regression")
    same = eval_compressed(model, model.blocks(), X, Y, "lowrank_teacher_regression")
    assert dense == same
    out, _ = compress_model(model.blocks(), 0.3, "body")
    np.testing.assert_allclose(densify(out)["layer0.weight"], model.weights[0])
    labels = rng.integers(0, 3, 20)
    m = eval_compressed(model, out, X, labels, "softmax_classification")
    assert m["perplexity"] == pytest.approx(np.exp(m["loss"]))
    assert 0 <= m["accuracy"] <= 1
