"""Mask-plan sampling walkthrough.

Builds the three per-patch distributions for one frame (geometric polar
prior, HOG texture softmax, and their fusion), shows how the balance knob
moves probability mass, then samples a reproducible mask plan. Heatmaps and
a plan visualization land under demos/output/.
"""

import numpy as np
from PIL import Image

from sonoprep import (
    MaskingConfig,
    compute_score_maps,
    detect_roi,
    emit_heatmap,
    patch_coverage,
    patchify,
    polar_landmarks,
    sample_mask_plan,
)
from sonoprep.imaging import UltrasoundFrame

from demo_util import ensure_output_dir, render_fan


def plan_image(plan, scale=12):
    """Visualize a plan: dark = masked, gray = visible, white = target."""
    levels = np.full(plan.n_patches, 40, dtype=np.uint8)
    levels[list(plan.visible)] = 150
    levels[list(plan.targets)] = 255
    img = levels.reshape(plan.grid_h, plan.grid_w)
    return np.kron(img, np.ones((scale, scale), dtype=np.uint8))


def main():
    out = ensure_output_dir()
    img = render_fan(seed=11)
    frame = UltrasoundFrame(id="demo", sequence_id="s", frame_index=0, pixels=img)
    grid = patchify(frame, 16)
    coverage = patch_coverage(detect_roi(frame), grid)
    geom = polar_landmarks(coverage, tau=0.5)
    shape = (grid.grid_h, grid.grid_w)

    cfg = MaskingConfig(seed=2024)
    maps = compute_score_maps(frame, grid, geom, coverage, cfg)
    print(f"grid {grid.grid_h}x{grid.grid_w}, ROI patches (v > tau): "
          f"{(coverage.v > cfg.tau).sum()} of {grid.n_patches}")

    emit_heatmap(maps.p_polar, shape, out / "p_polar.png")
    emit_heatmap(maps.p_hog, shape, out / "p_hog.png")
    emit_heatmap(maps.p_joint, shape, out / "p_joint.png")
    print(f"wrote p_polar.png / p_hog.png / p_joint.png to {out}")

    print("\nhow the fusion knob shifts mass (top-5 patches by probability):")
    for lam in (0.0, 0.5, 1.0):
        m = compute_score_maps(frame, grid, geom, coverage, MaskingConfig(lambda_=lam))
        top = np.argsort(m.p_joint)[::-1][:5]
        cells = ", ".join(f"({i // grid.grid_w},{i % grid.grid_w})" for i in top)
        print(f"  blend {lam:.1f} (0 = texture, 1 = geometry): {cells}")

    plan = sample_mask_plan(maps.p_joint, coverage, cfg, frame.id)
    print(f"\nsampled plan (seed {cfg.seed}):")
    print(f"  visible  {len(plan.visible):4d} patches")
    print(f"  masked   {len(plan.masked):4d} patches")
    print(f"  targets  {len(plan.targets):4d} patches (decoder reconstructs these)")
    print(f"  supplemented from outside ROI: {len(plan.supplemented)}")

    again = sample_mask_plan(maps.p_joint, coverage, cfg, frame.id)
    print(f"  resampling with the same seed reproduces the plan: {plan == again}")

    Image.fromarray(plan_image(plan), mode="L").save(out / "plan.png")
    print(f"wrote {out / 'plan.png'} (dark = masked, gray = visible, white = target)")


if __name__ == "__main__":
    main()
