"""Regenerate the bundled translation-flow sample file.

Distributions are Unif[t, t + 1] at 21 equispaced times in [0, 1]; each is
represented by 50 points placed at its exact midpoint quantiles, so the
empirical quantiles on a 50-point grid reproduce the flow exactly.
"""

from pathlib import Path

import numpy as np

from wtgrad.io import write_csv

OUT = Path(__file__).resolve().parents[1] / "src" / "wtgrad" / "data" / "translation_flow.csv"


def main():
    times = np.linspace(0.0, 1.0, 21)
    u = (2.0 * np.arange(1, 51) - 1.0) / 100.0
    write_csv(OUT, ("time", "value"), ((t, t + uj) for t in times for uj in u))
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
