"""Regenerate example.csv. Run from fm-exporter/: python3 fixtures/gen_dataset.py"""

from pathlib import Path

import numpy as np

rng = np.random.default_rng(110)
n = 60
X = rng.uniform(-2.0, 2.0, size=(n, 3))
y = 0.8 + X @ np.array([1.2, -0.7, 0.3]) + 0.4 * rng.standard_normal(n)

out = Path(__file__).parent / "example.csv"
with out.open("w") as fh:
    fh.write("x0,x1,x2,y\n")
    for row, target in zip(X, y):
        cells = [repr(float(v)) for v in (*row, target)]
        fh.write(",".join(cells) + "\n")
print(f"wrote {n} rows to {out}")
