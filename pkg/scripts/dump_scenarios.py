"""Write every preset to scenarios/<name>.yaml."""

import argparse
from pathlib import Path

from coopnav.cli import PRESETS
from coopnav.world import dump_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=Path(__file__).resolve().parent.parent / "scenarios", type=Path)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name, make in PRESETS.items():
        path = args.out / f"{name}.yaml"
        path.write_text(dump_scenario(make()))
        print(path)


if __name__ == "__main__":
    main()
