"""tinyavsr: desk-scale multimodal speech recognition lab (core operations)."""

from tinyavsr._core import (
    __version__,
    adaptive_time_mask,
    cosine_lr,
    count_lora_params,
    measure_snr_db,
    mix_noise_at_snr,
    prompt_text,
    softmax_with_temperature,
    stack_compress,
    token_budget,
    token_count,
    wer,
    z_normalize,
)

__all__ = [
    "__version__",
    "adaptive_time_mask",
    "cosine_lr",
    "count_lora_params",
    "measure_snr_db",
    "mix_noise_at_snr",
    "prompt_text",
    "softmax_with_temperature",
    "stack_compress",
    "token_budget",
    "token_count",
    "wer",
    "z_normalize",
]
