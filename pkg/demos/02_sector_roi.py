"""Sector ROI extraction walkthrough.

Detects the acoustic sector of a synthetic frame, reports per-patch
coverage, and extracts the polar landmarks (apex row, bottom row,
centerline, per-row half-widths) that drive the geometric masking prior.
Writes the binary mask and a coverage heatmap under demos/output/.
"""

import numpy as np

from sonoprep import detect_roi, emit_heatmap, patch_coverage, patchify, polar_landmarks
from sonoprep.imaging import UltrasoundFrame

from demo_util import ensure_output_dir, render_fan


def main():
    out = ensure_output_dir()
    img = render_fan(seed=7)
    frame = UltrasoundFrame(id="demo", sequence_id="s", frame_index=0, pixels=img)

    roi = detect_roi(frame)
    print(f"frame: {frame.height}x{frame.width}")
    print(f"detected sector: {roi.pixel_count} px "
          f"({roi.pixel_count / roi.mask.size:.1%} of the frame)")
    roi.write_pgm(out / "sector_mask.pgm")
    print(f"wrote {out / 'sector_mask.pgm'}")

    grid = patchify(frame, 16)
    coverage = patch_coverage(roi, grid)
    v = coverage.v.reshape(grid.grid_h, grid.grid_w)
    print(f"\npatch grid: {grid.grid_h}x{grid.grid_w} (P=16)")
    print(f"fully-inside patches (v = 1): {(coverage.v == 1).sum()}")
    print(f"boundary patches (0 < v < 1): {((coverage.v > 0) & (coverage.v < 1)).sum()}")
    print(f"background patches (v = 0):   {(coverage.v == 0).sum()}")

    emit_heatmap(coverage.v, (grid.grid_h, grid.grid_w), out / "coverage.png")
    print(f"wrote {out / 'coverage.png'}")

    geom = polar_landmarks(coverage, tau=0.5)
    print("\npolar landmarks (tau = 0.5):")
    print(f"  apex row    m_apex   = {geom.m_apex}")
    print(f"  bottom row  m_bottom = {geom.m_bottom}")
    print(f"  centerline  n_center = {geom.n_center:.2f}")
    widths = ", ".join(f"{geom.half_width[m]:.1f}" for m in sorted(geom.roi_rows))
    print(f"  half-widths by row: {widths}")
    print("\ncoverage by grid row (mean v):")
    for m in range(grid.grid_h):
        bar = "#" * int(40 * v[m].mean())
        print(f"  row {m:2d} |{bar}")


if __name__ == "__main__":
    main()
