"""Run the whole analysis chain on a synthetic dataset.

Generates charge curves, detects the voltage segments, extracts features,
runs the correlation / fusion / SHAP analyses, trains and compares the
models, and leaves every artifact in the output directory.

Usage:
    python scripts/run_full_pipeline.py [--out-dir runs/demo] [--seed 42]
"""

import argparse
import json
import sys
from pathlib import Path

from batcap.cli import main as batcap


def sh(*args) -> None:
    argv = [str(a) for a in args]
    print(f"$ batcap {' '.join(argv)}")
    code = batcap(argv)
    if code != 0:
        sys.exit(code)


def run(out_dir: Path, seed: int) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "synth.json").write_text(json.dumps({
        "n_cycles": 200, "q0": 170.0, "fade_rate": 0.0015, "fade_power": 1.0,
        "plateau_voltage": 3.4, "noise_sd": 0.0003, "seed": seed,
    }, indent=2))
    (out_dir / "train.json").write_text(json.dumps({
        "hidden_l": 40, "woa_iters": 200, "woa_pop": 30,
    }, indent=2))

    samples = out_dir / "samples.csv"
    capacity = out_dir / "capacity.csv"
    feats = out_dir / "features.csv"
    sh("--seed", seed, "synth", "--config", out_dir / "synth.json", "--out-dir", out_dir)
    sh("--seed", seed, "segment", "--samples", samples, "--capacity", capacity,
       "--out", out_dir / "segments.json")
    sh("--seed", seed, "features", "--samples", samples, "--capacity", capacity,
       "--segments", out_dir / "segments.json", "--out", feats)
    sh("--seed", seed, "correlate", "--features", feats, "--out", out_dir / "correlation.json")
    sh("--seed", seed, "fuse", "--features", feats, "--dims", "1,2,3",
       "--out", out_dir / "fusion.json")
    sh("--seed", seed, "train", "--features", feats, "--config", out_dir / "train.json",
       "--model-out", out_dir / "model.json", "--trace", out_dir / "woa_trace.json")
    sh("--seed", seed, "evaluate", "--model", out_dir / "model.json", "--features", feats,
       "--out", out_dir / "metrics.json")
    sh("--seed", seed, "compare", "--features", feats,
       "--models", "elm,woa-elm,knn,rf,gbrt", "--config", out_dir / "train.json",
       "--out", out_dir / "taylor.json", "--svg", out_dir / "taylor.svg")
    sh("--seed", seed, "shap", "--model", out_dir / "model.json", "--features", feats,
       "--out", out_dir / "shap.json")
    sh("--seed", seed, "table1", "--features", feats, "--config", out_dir / "train.json",
       "--out", out_dir / "fusion_report.json")

    print("\nartifacts:")
    for path in sorted(out_dir.iterdir()):
        print(f"  {path}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", default="runs/demo")
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()
    run(Path(args.out_dir), args.seed)
