"""Style replication and interpolation with a trained model.

Loads the cached acceptance-suite checkpoint (prime it with
scripts/build_acceptance_artifacts.py, or pass --checkpoint) and shows the
three controllable generation modes:

  * replicate: write new content in the style of a reference sample,
  * interpolate: slide between two reference styles along the learned
    style subspace (alpha from 0 to 1),
  * prior: sample a novel style from the learned prior.

For each interpolation step the style oracle re-measures the slant of the
generated strokes, so you can watch the control take effect numerically.
Outputs land in demos/out/03/.
"""

import argparse
from pathlib import Path

from styleq import ContentSequence, StyleParams, load_checkpoint
from styleq.inference import (
    GenerationConfig,
    generate_from_prior,
    generate_interpolate,
    generate_replicate,
)
from styleq.oracles import fit_style_oracle
from styleq.svg import save_strokes_svg
from styleq.synthglyph import render_sample

OUT = Path(__file__).parent / "out" / "03"
DEFAULT_CKPT = Path(__file__).parent.parent / "artifacts" / "acceptance" / "eq50" / "checkpoint.pt"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--checkpoint", type=Path, default=DEFAULT_CKPT)
    args = parser.parse_args()
    if not args.checkpoint.exists():
        raise SystemExit(
            f"checkpoint not found: {args.checkpoint}\n"
            "prime it with: python3 scripts/build_acceptance_artifacts.py"
        )
    OUT.mkdir(parents=True, exist_ok=True)
    model, step, _ = load_checkpoint(args.checkpoint)
    print(f"loaded checkpoint at step {step}")

    content = ContentSequence((2, 5, 8))
    upright = render_sample(content, StyleParams(slant=-0.2, scale=1.2), seed=21)
    slanted = render_sample(content, StyleParams(slant=0.2, scale=1.2), seed=22)
    save_strokes_svg(upright, OUT / "ref_upright.svg")
    save_strokes_svg(slanted, OUT / "ref_slanted.svg")

    result = generate_replicate(model, content, upright, GenerationConfig(seed=1))
    save_strokes_svg(result.strokes, OUT / "replicate.svg")
    fitted, _ = fit_style_oracle(result.strokes)
    print(f"replicate: reference slant -0.20, recovered {fitted.slant:+.2f}")

    print("\ninterpolation (upright -> slanted):")
    for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
        result = generate_interpolate(
            model, content, upright, slanted, alpha, GenerationConfig(seed=2)
        )
        save_strokes_svg(result.strokes, OUT / f"interp_{int(alpha * 100):03d}.svg")
        try:
            fitted, _ = fit_style_oracle(result.strokes)
            print(f"  alpha {alpha:.2f}: recovered slant {fitted.slant:+.2f}")
        except Exception:
            print(f"  alpha {alpha:.2f}: style fit failed")

    result = generate_from_prior(model, content, GenerationConfig(seed=3))
    save_strokes_svg(result.strokes, OUT / "prior.svg")
    print(f"\nprior sample: {result.num_frames} frames; outputs in {OUT}")


if __name__ == "__main__":
    main()
