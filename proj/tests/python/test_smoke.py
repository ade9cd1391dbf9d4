"""Smoke tests over the python bindings."""

import math

import numpy as np
import pytest

import tinyavsr as tv


def test_token_budget_arithmetic():
    assert tv.token_budget(6.0, 50.0, 1) + tv.token_budget(6.0, 25.0, 1) == 450
    assert tv.token_count(584, 5) == 117
    assert tv.token_budget(6.0, 50.0, 4) == 75
    assert tv.token_budget(6.0, 25.0, 2) == 75
    assert tv.token_budget(6.0, 50.0, 5) == 60


def test_stack_compress_law_and_content():
    x = np.arange(10.0).reshape(5, 2)
    y = tv.stack_compress(x, 2)
    assert y.shape == (3, 4)
    np.testing.assert_allclose(y[0], [0, 1, 2, 3])
    np.testing.assert_allclose(y[2], [8, 9, 0, 0])  # zero-padded tail
    for t in range(1, 40):
        for k in range(1, 7):
            out = tv.stack_compress(np.zeros((t, 3)), k)
            assert out.shape == (math.ceil(t / k), 3 * k)


def test_wer():
    assert tv.wer(["a", "b", "c", "d"], ["a", "x", "c"]) == pytest.approx(0.5)
    assert tv.wer(["a"], ["a"]) == 0.0


def test_snr_mixing_is_exact():
    rng = np.random.default_rng(7)
    clean = rng.normal(size=(50, 4))
    noise = rng.normal(size=(50, 4)) * 0.3
    for target in (-5.0, 0.0, 5.0, 10.0, 15.0, 20.0):
        mixed = tv.mix_noise_at_snr(clean, noise, target)
        assert abs(tv.measure_snr_db(clean, mixed) - target) < 0.01
    np.testing.assert_array_equal(tv.mix_noise_at_snr(clean, noise, float("inf")), clean)


def test_z_normalize():
    rng = np.random.default_rng(8)
    x = rng.normal(loc=3.0, scale=2.0, size=(30, 5))
    z = tv.z_normalize(x)
    assert abs(z.mean()) < 1e-6
    assert abs(z.std() - 1.0) < 1e-6


def test_adaptive_time_mask_budget():
    rng = np.random.default_rng(9)
    x = rng.normal(size=(60, 3))
    y = tv.adaptive_time_mask(x, 0.4, seed=3)
    changed = int((y != x).any(axis=1).sum())
    assert changed <= int(0.4 * 60)
    np.testing.assert_array_equal(tv.adaptive_time_mask(x, 0.0, seed=3), x)


def test_softmax_with_temperature():
    p = tv.softmax_with_temperature(np.array([[0.0, math.log(3.0)]]), 1.0)
    np.testing.assert_allclose(p, [[0.25, 0.75]], atol=1e-9)
    rows = tv.softmax_with_temperature(np.random.default_rng(1).normal(size=(4, 9)), 0.6)
    np.testing.assert_allclose(rows.sum(axis=1), np.ones(4), atol=1e-6)


def test_lora_param_counts():
    enc = [(1024, 1024)] * 48  # 24 blocks x {q, v}
    assert tv.count_lora_params(64, enc) == 6_291_456
    dec = [(4096, 4096), (4096, 1024)] * 32
    assert tv.count_lora_params(64, dec) == 27_262_976


def test_cosine_lr_boundaries():
    assert tv.cosine_lr(10, 100, 1e-3, 0.1) == pytest.approx(1e-3)
    assert tv.cosine_lr(100, 100, 1e-3, 0.1) == pytest.approx(0.0, abs=1e-12)
    assert tv.cosine_lr(55, 100, 1e-3, 0.1) == pytest.approx(5e-4)


def test_prompts():
    assert tv.prompt_text("asr") == "Transcribe speech to text."
    assert tv.prompt_text("vsr") == "Transcribe video to text."
    assert tv.prompt_text("avsr") == "Transcribe speech and video to text."
