# %% [markdown]
# # Looking inside pseudo-label generation
#
# After a short warm-up we freeze the model and generate pseudo labels by
# hand: several rounds, each with a random subset of nodes cut off from
# the graph and a fresh latent sample. The rounds are averaged per node and
# only confident rows on unlabelled training nodes survive.

# %%
import numpy as np

from slavgae import SbmConfig, TrainConfig, generate_sbm, make_splits, train
from slavgae.slam import accepted_nodes, confidence_filter, generate_pseudo_labels
from slavgae.trainer import training_view

ds = generate_sbm(SbmConfig(blocks=3, nodes_per_block=40, p_intra=0.15, p_inter=0.01,
                            feature_dim=6, separation=2.0, seed=1))
splits = make_splits(ds, (0.1, 0.2), 0.1, seed=1)
config = TrainConfig(hidden_dim=32, latent_dim=16, lr=0.01, max_epochs=40,
                     patience=40).with_overrides({"ablation.no_pseudo": True})
params, _ = train(ds, splits, config)

# %% [markdown]
# Pseudo labels are produced on the training subgraph only, with training
# nodes renumbered 0..m-1.

# %%
view = training_view(ds, splits)
avg, rounds, masks = generate_pseudo_labels(params, view.graph, view.features, view.y_true,
                                            k=4, p=0.7, rng=np.random.default_rng(0),
                                            return_rounds=True)
visible = np.sum(masks, axis=0)
print("rounds in which each node was visible (first 12):", visible[:12])

# %% [markdown]
# Sweeping the threshold shows the trade-off between coverage and
# precision of the accepted labels.

# %%
truth = ds.labels[view.nodes]
for theta in (0.4, 0.6, 0.8, 0.9, 0.95):
    y_aug = confidence_filter(avg, view.y_true, view.splits, theta)
    acc = accepted_nodes(y_aug, view.splits)
    if acc.size:
        precision = np.mean(y_aug[acc].argmax(axis=1) == truth[acc])
        print(f"theta {theta:.2f}: {acc.size:3d} accepted, {precision:.3f} correct")
    else:
        print(f"theta {theta:.2f}: nothing accepted")
