"""Regenerate the bundled JSON configs in configs/ from the preset builders."""

from __future__ import annotations

import argparse
from pathlib import Path

from modelmarket.domain import save_config
from modelmarket.scenarios import ATTACK_KINDS, liars_base, market_roles, two_cluster, with_attacker

PRESETS = {
    "two_cluster": lambda: two_cluster(0),
    "market_roles": lambda: market_roles(0),
    "liars": lambda: liars_base(0),
}
PRESETS.update({f"attack_{kind}": (lambda kind=kind: with_attacker(two_cluster(0), kind)) for kind in ATTACK_KINDS})


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "configs")
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for name, build in PRESETS.items():
        path = args.out / f"{name}.json"
        save_config(build(), path)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
