#!/usr/bin/env python3
"""Oracle calibration: derive and record the numbers frozen into tests.

- fit residual over noiseless renders -> non-match threshold = 3 * max
- decode accuracy at jitter 0.02 over 200 samples
- seed-pair style-estimate agreement at jitter > 0 (20 pairs)

Writes artifacts/oracle_calibration.json.
"""

import json
import time
from pathlib import Path

import numpy as np

from styleq.oracles import DEFAULT_SCALE_STEP, DEFAULT_SLANT_STEP, decode_content_oracle, fit_style_oracle
from styleq.synthglyph import ContentSequence, StrokeSequence, make_dataset, render_sample, sample_style


def main() -> None:
    t0 = time.time()
    rng = np.random.default_rng(2024)

    residuals, slant_errs, scale_errs = [], [], []
    for _ in range(100):
        style = sample_style(rng, {"jitter": (0.0, 0.0)})
        content = ContentSequence(tuple(int(s) for s in rng.integers(10, size=3)))
        strokes = render_sample(content, style, int(rng.integers(2**31)))
        fitted, residual = fit_style_oracle(strokes)
        residuals.append(residual)
        slant_errs.append(abs(fitted.slant - style.slant))
        scale_errs.append(abs(fitted.scale - style.scale))
    max_residual = float(np.max(residuals))
    print(f"noiseless residual max {max_residual:.5f} at {time.time()-t0:.0f}s", flush=True)

    line = np.linspace(0, 1, 30)
    straight = StrokeSequence(
        np.concatenate(
            [np.stack([line, 0.3 * line, np.ones_like(line)], axis=1),
             [[1.0, 0.3, 0.0]]], axis=0,
        )
    )
    _, line_residual = fit_style_oracle(straight)

    ds = make_dataset(200, min_len=3, max_len=3, seed=555, style_sampler={"jitter": (0.02, 0.02)})
    correct = total = 0
    for s in ds:
        decoded = decode_content_oracle(s.strokes)
        correct += sum(d == t for d, t in zip(decoded, s.content.symbols))
        total += len(s.content)
    decode_acc = correct / total
    print(f"decode acc jitter=0.02: {decode_acc:.4f} at {time.time()-t0:.0f}s", flush=True)

    pair_slant_diffs, pair_scale_diffs = [], []
    for _ in range(20):
        style = sample_style(rng, {"jitter": (0.01, 0.02)})
        content = ContentSequence(tuple(int(s) for s in rng.integers(10, size=3)))
        fits = [
            fit_style_oracle(render_sample(content, style, int(rng.integers(2**31))))[0]
            for _ in range(2)
        ]
        pair_slant_diffs.append(abs(fits[0].slant - fits[1].slant))
        pair_scale_diffs.append(abs(fits[0].scale - fits[1].scale))

    out = {
        "noiseless_residual_max": max_residual,
        "noiseless_residual_mean": float(np.mean(residuals)),
        "noiseless_slant_err_max": float(np.max(slant_errs)),
        "noiseless_scale_err_max": float(np.max(scale_errs)),
        "non_match_threshold": 3.0 * max_residual,
        "straight_line_residual": float(line_residual),
        "decode_accuracy_jitter_0.02_200_samples": decode_acc,
        "seed_pair_slant_diff_max": float(np.max(pair_slant_diffs)),
        "seed_pair_scale_diff_max": float(np.max(pair_scale_diffs)),
        "slant_step": DEFAULT_SLANT_STEP,
        "scale_step": DEFAULT_SCALE_STEP,
    }
    path = Path(__file__).resolve().parent.parent / "artifacts" / "oracle_calibration.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    print(json.dumps(out, indent=2), flush=True)


if __name__ == "__main__":
    main()
