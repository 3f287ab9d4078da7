#!/usr/bin/env python3
"""Prime the acceptance-test artifact cache (long CPU training runs).

Run this before pytest so tests/test_acceptance.py finds finished
checkpoints instead of training inline.  Safe to re-run: finished variants
are skipped, interrupted ones resume from their last periodic checkpoint.
"""

import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

import _acceptance_support as sup  # noqa: E402


def main() -> None:
    t0 = time.time()
    print("building overfit run ...", flush=True)
    sup.ensure_overfit()
    print(f"overfit done at {time.time() - t0:.0f}s", flush=True)
    dataset = sup.training_dataset()
    for name in ("always_self", "eq50", "eq100"):
        print(f"building {name} ...", flush=True)
        sup.ensure_trained(name, dataset=dataset)
        print(f"{name} done at {time.time() - t0:.0f}s", flush=True)


if __name__ == "__main__":
    main()
