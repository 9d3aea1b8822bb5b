"""Plans as activity graphs and the node feature matrix."""
from __future__ import annotations

import numpy as np

from tusp import LabelAlphabet, ScenarioConfig, build_initial_plan, extract_features, generate_instance, plan_to_graph

inst = generate_instance(ScenarioConfig(n_units=4, seed=2))
graph = plan_to_graph(build_initial_plan(inst))

# %% One node per activity; edges follow each unit's chain, the global order of
# movements, and the order of services on a shared track.
print(f"{graph.n} nodes; edges by class: {graph.edge_counts()}")
print("first nodes:", [(n.label, n.start, n.end) for n in graph.nodes[:6]])

# %% Features: a one-hot node label followed by four time columns scaled by
# the planning horizon.
alphabet = LabelAlphabet.from_graphs([graph])
X = extract_features(graph, alphabet, inst.horizon)
print("alphabet:", alphabet.labels)
print("feature matrix", X.shape, "time block of the first node:", np.round(X[0, len(alphabet):], 3))

# %% The adjacency the network sees is symmetric with an empty diagonal.
A = graph.adjacency
print("symmetric:", np.array_equal(A, A.T), "mean degree:", A.sum() / graph.n)
