"""Regenerate the frozen golden files. Run only when a change is intended.

    python3 tests/golden/make_golden.py
"""
from __future__ import annotations

import json
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent))

from golden_support import four_panel_summary, portrait_csv_digest  # noqa: E402


def main():
    (HERE / "four_panel_summary.json").write_text(json.dumps(four_panel_summary(), indent=1, sort_keys=True) + "\n")
    (HERE / "portrait_k1_F0.05.sha256").write_text(portrait_csv_digest() + "\n")


if __name__ == "__main__":
    main()
