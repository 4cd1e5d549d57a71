"""
From pairwise probabilities to a seating chart
==============================================

The classifier only ever judges pairs. Turning six pairwise verdicts
into one room layout means scoring every way to split four people
into groups and keeping the best. This script walks that search by
hand, then shows the gain matrix the winner implies and what pinning
does to the search.
"""

from floorspace import (
    FloorAssigner,
    bell_number,
    enumerate_partitions,
    gains,
    score,
)

ids = (0, 1, 2, 3)
candidates = enumerate_partitions(ids)
print(f"{len(candidates)} candidate configurations for 4 people "
      f"(Bell number B4 = {bell_number(4)})")

# pairwise P(same floor): 0+1 clearly together, 2+3 clearly together,
# everything across the aisle near zero
posteriors = {
    (0, 1): 0.95,
    (0, 2): 0.10,
    (0, 3): 0.05,
    (1, 2): 0.08,
    (1, 3): 0.12,
    (2, 3): 0.90,
}

print("\nevery candidate, scored:")
ranked = sorted(candidates, key=lambda p: score(p, posteriors), reverse=True)
for part in ranked:
    label = " | ".join(",".join(str(m) for m in b) for b in part)
    print(f"  {score(part, posteriors):.4f}  {label}")

assigner = FloorAssigner()
cfg = assigner.assign(posteriors, ids)
print(f"\nassigner picks {cfg.partition} with score {cfg.score:.4f}")

gm = gains(cfg, ids)
print("\ngain matrix (rows = listener, cols = speaker):")
for i, listener in enumerate(gm.ids):
    row = "  ".join(f"{gm.matrix[i, j]:.1f}" for j in range(len(gm.ids)))
    print(f"  {listener}: {row}")
print("floor-mates at 1.0, the other conversation at 0.2, self muted")

# a pin freezes the layout no matter what the probabilities say
assigner.pin([(0, 2), (1, 3)], owner=0, participants=ids)
pinned = assigner.assign(posteriors, ids)
print(f"\npinned: assigner now returns {pinned.partition} "
      f"(score {pinned.score:.4f}, ignored)")

try:
    assigner.unpin(owner=3)
except Exception as exc:
    print(f"participant 3 cannot release it: {exc}")
assigner.unpin(owner=0)
after = assigner.assign(posteriors, ids)
print(f"unpinned by its owner, the search resumes: {after.partition}")
