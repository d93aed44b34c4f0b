#!/usr/bin/env python3
"""Regenerate src/spectrabench/data/inferno_lut.txt from matplotlib's inferno colormap.

The asset is generated once and committed; runtime code only loads and
checksums it. Re-run this script only if the asset needs to be rebuilt.
"""

import hashlib
from pathlib import Path

import matplotlib

OUT = Path(__file__).resolve().parents[1] / "src" / "spectrabench" / "data" / "inferno_lut.txt"


def main() -> None:
    colors = matplotlib.colormaps["inferno"].colors  # 256 float RGB triples
    assert len(colors) == 256
    lines = []
    for i, (r, g, b) in enumerate(colors):
        # round half away from zero, matching the pixel math used elsewhere
        rgb = [int(c * 255 + 0.5) for c in (r, g, b)]
        lines.append(f"{i} {rgb[0]} {rgb[1]} {rgb[2]}")
    body = "\n".join(lines) + "\n"
    digest = hashlib.sha256(body.encode("ascii")).hexdigest()
    header = f"# inferno-256 generator=matplotlib-{matplotlib.__version__} sha256={digest}\n"
    OUT.write_text(header + body, encoding="ascii")
    print(f"wrote {OUT} ({len(lines)} entries, sha256={digest[:12]}...)")


if __name__ == "__main__":
    main()
