"""Regenerate the bundled CLI samples and their golden band files.

Run only when an intended numerical change lands; the CLI tests compare
against these files byte for byte.
"""

from pathlib import Path

from bandforge import io, rng
from bandforge.cli import main
from bandforge.simulation import StudyConfig, generate_dataset

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"

BAND_ARGS = ["--seed", "7", "--boot", "199", "--grid", "21", "--region", "-0.9", "0.9"]
DENSITY_ARGS = ["--seed", "7", "--boot", "199", "--grid", "21", "--region", "-1.5", "1.5"]


def build() -> None:
    DATA.mkdir(exist_ok=True)
    d = generate_dataset(StudyConfig(g_index=3, n=100), 0)
    io.write_table(DATA / "g3_sample.csv", ["x", "y"], [d.x, d.y])
    pts = rng.substream(0, rng.DATA, 0).standard_normal(200)
    io.write_table(DATA / "normal_sample.csv", ["x"], [pts])
    assert main(["band", str(DATA / "g3_sample.csv"), *BAND_ARGS, "--out", str(DATA / "g3_band.csv")]) == 0
    assert main(["density-band", str(DATA / "normal_sample.csv"), *DENSITY_ARGS,
                 "--out", str(DATA / "normal_density_band.csv")]) == 0


if __name__ == "__main__":
    build()
