"""Regenerate the committed synthetic data fixtures under data/.

Both files are deterministic; re-running this script must reproduce them
byte for byte.
"""

from pathlib import Path

import numpy as np

from spectral_cheb.tasks import synthetic_completion_data, synthetic_gp_data

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"


def write_ratings():
    rs = synthetic_completion_data(d=30, r=20, rank=2, observed_frac=0.6, seed=2024)
    lines = ["user,item,rating"]
    for u, i, r in zip(rs.users, rs.items, rs.ratings):
        lines.append(f"{u},{i},{float(r)!r}")
    (DATA / "synthetic_ratings.csv").write_text("\n".join(lines) + "\n")
    print(f"ratings: {rs.users.size} triples, {rs.d_users} x {rs.d_items}")


def write_gp():
    x, y = synthetic_gp_data(d=200, theta=(0.3, 1.2, 0.8), seed=2024)
    lines = [f"{float(xi)!r},{float(yi)!r}" for xi, yi in zip(x[:, 0], y)]
    (DATA / "synthetic_gp.csv").write_text("\n".join(lines) + "\n")
    print(f"gp: {y.size} points")


if __name__ == "__main__":
    DATA.mkdir(exist_ok=True)
    write_ratings()
    write_gp()
