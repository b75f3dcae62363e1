"""Frame screening walkthrough.

Builds a small scan sequence full of near-duplicates, then shows how the
two screening stages thin it out: the structural stage catches adjacent
lookalikes via DCT fingerprints, and the semantic stage catches a
re-visited view that is temporally distant from its twin.
"""

import numpy as np

from sonoprep import semantic_screen, stub_embedding, visual_screen
from sonoprep.imaging import UltrasoundFrame

from demo_util import render_fan


def frame(pixels, fid, index):
    return UltrasoundFrame(id=fid, sequence_id="scan-01", frame_index=index, pixels=pixels)


def main():
    rng = np.random.default_rng(0)
    view_a = render_fan(seed=1)
    view_b = render_fan(seed=2, apex_col=90, opening_deg=60)
    view_c = render_fan(seed=3, apex_col=140, opening_deg=80)

    # a sweep that lingers on view A, moves to B, then drifts back to A
    def jitter(img):
        return np.clip(img + 0.01 * rng.standard_normal(img.shape), 0, 1)

    sequence = [
        frame(view_a, "a0", 0),
        frame(jitter(view_a), "a1", 1),   # near-duplicate of a0
        frame(jitter(view_a), "a2", 2),   # another near-duplicate
        frame(view_b, "b0", 3),
        frame(jitter(view_b), "b1", 4),
        frame(view_c, "c0", 5),
        frame(jitter(view_a), "a3", 6),   # revisit: far from a0 in time
    ]

    print(f"input sequence: {[f.id for f in sequence]}")

    retained, entries = visual_screen(sequence, threshold_vis=0.95)
    print("\nstage 1 - structural screen (threshold 0.95):")
    for e in entries:
        if e.retained:
            print(f"  {e.id}: retained")
        else:
            print(f"  {e.id}: dropped (sim {e.similarity:.4f} to keeper {e.keeper_id})")
    print(f"retained after stage 1: {retained}")

    survivors = [f for f in sequence if f.id in set(retained)]
    candidates = [(f.id, stub_embedding(f)) for f in survivors]
    sem_retained, sem_entries = semantic_screen(candidates, threshold_sem=0.90)
    print("\nstage 2 - semantic screen (threshold 0.90, stub embeddings):")
    for e in sem_entries:
        if e.retained:
            print(f"  {e.id}: retained")
        else:
            print(f"  {e.id}: dropped (sim {e.similarity:.4f} to keeper {e.keeper_id})")

    print(f"\nfinal retained set: {sem_retained}")
    print(f"reduction: {len(sequence)} frames -> {len(sem_retained)} "
          f"({len(sem_retained) / len(sequence):.0%} kept)")
    print("note how a3 survives the temporal screen but falls to the semantic one.")


if __name__ == "__main__":
    main()
