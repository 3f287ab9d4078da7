"""Train a tiny model end to end in a few minutes on CPU.

Synthesizes a small dataset of short sequences, trains a scaled-down model
with style equalization on half the batches, then generates from the learned
prior and by replicating a reference style.  Outputs land in demos/out/02/.

Expect a few minutes of wall time; pass --steps to shorten further.
"""

import argparse
import json
from pathlib import Path

from styleq import ModelConfig, TrainConfig, make_dataset, train
from styleq.inference import GenerationConfig, generate_from_prior, generate_replicate
from styleq.svg import save_strokes_svg

OUT = Path(__file__).parent / "out" / "02"

TINY = ModelConfig(
    bottom_dim=24, top_dim=24, z_dim=8, num_windows=4, num_mixtures=5,
    conv_channels=(8, 12), style_k=4, heads=2, head_dim=8, attn_out_dim=16,
    prior_hidden=16,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=600)
    args = parser.parse_args()
    OUT.mkdir(parents=True, exist_ok=True)

    dataset = make_dataset(
        64, min_len=1, max_len=2, seed=7,
        style_sampler={"speed": (0.8, 1.2), "jitter": (0.0, 0.005)},
    )
    print(f"dataset: {len(dataset)} samples, "
          f"lengths {min(len(s.strokes) for s in dataset)}"
          f"-{max(len(s.strokes) for s in dataset)}")

    cfg = TrainConfig(
        batch_size=8, max_steps=args.steps, warmup_steps=100,
        equalize_fraction=0.5, x_prime_mode="real_sample",
        eval_every=200, checkpoint_every=200, val_fraction=0.1, seed=3,
    )
    model, metrics = train(dataset, cfg, model_config=TINY, out_dir=OUT / "run")
    nll = [m.nll_per_frame for m in metrics]
    print(f"nll/frame: step 50 {nll[49]:.3f} -> step {args.steps} {nll[-1]:.3f}")

    ref = dataset[0]
    gcfg = GenerationConfig(seed=11)
    for name, result in (
        ("prior", generate_from_prior(model, ref.content, gcfg)),
        ("replicate", generate_replicate(model, ref.content, ref.strokes, gcfg)),
    ):
        save_strokes_svg(result.strokes, OUT / f"gen_{name}.svg")
        print(f"{name}: {result.num_frames} frames, truncated={result.truncated}")
    save_strokes_svg(ref.strokes, OUT / "reference.svg")
    (OUT / "summary.json").write_text(json.dumps(
        {"steps": args.steps, "final_nll_per_frame": nll[-1]}, indent=2) + "\n")
    print(f"outputs in {OUT}")


if __name__ == "__main__":
    main()
