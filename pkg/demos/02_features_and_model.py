"""
What turn-taking timing says about who talks with whom
======================================================

Builds a small synthetic room with two conversations running side by
side, extracts the two pairwise timing features at one instant, then
trains the classifier and compares its verdicts for a within-floor
pair and a cross-floor pair.
"""

import tempfile
from pathlib import Path

from floorspace import (
    GeneratorConfig,
    extract_pair,
    generate,
    load_model,
    make_training_instances,
    pair_posterior,
    save_model,
    train,
)

# four people, two floors, ten minutes: A+B talk, C+D talk
cfg = GeneratorConfig(
    participants=4,
    duration_ms=600_000,
    schedule=[(0, ((0, 1), (2, 3)))],
    seed=42,
)
corpus = generate(cfg)
streams = corpus.streams()
utterances = corpus.utterances()
print(f"corpus: {len(corpus.records)} turns, participants {sorted(corpus.ids)}")

now = 120_000
fab = extract_pair(streams, utterances, 0, 1, now)
fac = extract_pair(streams, utterances, 0, 2, now)
print(f"\nfeatures at t={now} ms")
print(f"  A vs B (same floor):  gap {fab.trp_gap_ms} ms, "
      f"overlap {fab.overlap_w1_ms}/{fab.overlap_w2_ms}/{fab.overlap_w3_ms} ms")
print(f"  A vs C (other floor): gap {fac.trp_gap_ms} ms, "
      f"overlap {fac.overlap_w1_ms}/{fac.overlap_w2_ms}/{fac.overlap_w3_ms} ms")

# partners time their turns around each other's completions, so the
# within-floor gap is small and the overlap low; strangers overlap
# freely and their gaps are arbitrary

instances = make_training_instances(
    streams, utterances, duration_ms=corpus.duration_ms
)
model = train(instances)
print(f"\ntrained on {len(instances)} instances")
print(f"priors: same {model.priors[0]:.3f}, diff {model.priors[1]:.3f}")

fba = extract_pair(streams, utterances, 1, 0, now)
fca = extract_pair(streams, utterances, 2, 0, now)
p_same_ab = pair_posterior(model, fab, fba)
p_same_ac = pair_posterior(model, fac, fca)
print(f"\nP(same floor) at t={now}")
print(f"  A,B: {p_same_ab:.3f}")
print(f"  A,C: {p_same_ac:.3f}")

path = Path(tempfile.mkdtemp()) / "model.json"
save_model(model, str(path))
back = load_model(str(path))
assert abs(pair_posterior(back, fab, fba) - p_same_ab) < 1e-12
print(f"\nmodel round-trips through {path}")
