"""From an embedding space to a concept's semantic neighborhood.

A coarse HDBSCAN pass splits the vocabulary into broad regions; the region
holding the concept is then re-clustered until it stops shrinking. The trail
lists member counts per depth.

Run: python3 notebooks/02_neighborhoods.py
"""

from semshift.clustering import coarse_partition, refine_neighborhood, stability
from semshift.embedding import Hyperparams, train
from semshift.pipeline import PipelineParams, build_period, neighborhood
from semshift.synth import STANDARD_DOCS, STANDARD_VOCAB, generate, standard_scenarios

scenarios = standard_scenarios(seed=0)
streams = generate(scenarios, STANDARD_DOCS, STANDARD_VOCAB, seed=0)
space = train(streams["T1"], Hyperparams(seed=1))
print(f"T1 space: {len(space)} terms x {space.dim} dims")

coarse = coarse_partition(space, min_cluster_size=15, min_samples=5, seed=1)
print(f"coarse clusters: {len(coarse.centroids)}")
for s in scenarios:
    obj = refine_neighborhood(space, s.anchor, coarse, seed=1)
    planted = set(s.context_sets["T1"][0][0])
    share = len(obj.members & planted) / max(len(obj) - 1, 1)
    print(f"  {s.anchor:26s} trail={list(obj.trail)} members={len(obj)} planted share={share:.2f}")

# stability: rerun clustering with a new coarse sample and seed each time
concept = "concept_stable"


def one_run(r):
    params = PipelineParams(coarse_sample=1000, seed=100 + r)
    return space, neighborhood(build_period(space, [], params), concept, params)


report = stability(one_run, concept, runs=10)
print(f"stability of {concept}: mean {report.mean_score:.3f}, sd {report.sd_score:.3f}")
