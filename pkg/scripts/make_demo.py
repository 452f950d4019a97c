#!/usr/bin/env python3
"""Generate self-contained demo fixtures (mock-backed) for the CLI walkthrough.

Usage: python scripts/make_demo.py [output-dir]   (default: ./demo)
"""

import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

from helpers import write_episode_fixture, write_score_fixture  # noqa: E402


def main() -> None:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else REPO / "demo"
    write_episode_fixture(out / "episode")
    write_episode_fixture(out / "episode-rescale", rescale=True)
    write_score_fixture(out / "score")
    manifest = out / "episode" / "manifest.json"
    manifest.write_text(
        '{\n  "query": "What event is taking place?",\n'
        '  "sources": [{"id": "src1", "modality": "text", '
        '"uri": "ceremony.txt", "length": 8}]\n}\n', encoding="utf-8")
    print(f"demo fixtures written under {out}")
    print("try:")
    print(f"  claimtree bank --manifest {out}/episode/manifest.json "
          f"--config {out}/episode/config.json --out {out}/bank.jsonl")
    print(f"  claimtree mcq --input {out}/episode/mcq.json "
          f"--config {out}/episode/config.json --out {out}/state/run.json")
    print(f"  claimtree serve --state-dir {out}/state --static frontend")


if __name__ == "__main__":
    main()
