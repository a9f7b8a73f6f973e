"""Fit the shipped gap_top regression on simulated 7.8 mm spheres."""

import argparse
import logging
from pathlib import Path

from corneatopo.calibration import fit_gap_top_model
from corneatopo.geometry import default_rig

OUT = Path(__file__).resolve().parents[1] / "src" / "corneatopo" / "data" / "gap_top_model.txt"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=OUT)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO)
    model = fit_gap_top_model(default_rig(), threads=args.threads)
    model.save(args.out)
    print(f"a={model.a:.6f} b={model.b:.6f} residual={model.fit_residual:.4f} mm "
          f"dropped={model.dropped}")


if __name__ == "__main__":
    main()
