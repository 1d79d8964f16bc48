# %% [markdown]
# # Quickstart: semi-supervised node classification on a synthetic graph
#
# We build a small stochastic block model, hide most of the labels, train
# the model and score it on held-out nodes that it never saw while training.

# %%
import numpy as np

from slavgae import SbmConfig, TrainConfig, evaluate, generate_sbm, make_splits, train

ds = generate_sbm(SbmConfig(blocks=4, nodes_per_block=50, p_intra=0.1, p_inter=0.01,
                            feature_dim=8, separation=1.5, seed=0))
print(f"{ds.n} nodes, {ds.graph.num_edges} edges, {ds.num_features} features, "
      f"{ds.num_classes} classes")

# %% [markdown]
# 10% of nodes go to validation and 20% to test. Of the remaining training
# nodes only 5% keep their label.

# %%
splits = make_splits(ds, fractions=(0.1, 0.2), labeling_rate=0.05, seed=0)
print(splits.counts())

# %% [markdown]
# Narrow layers keep this fast on a laptop. Each epoch is a single
# full-batch gradient step, so the warm-up on ground-truth labels runs for
# 30 epochs before pseudo labels switch on. The other settings keep their
# defaults: two masked generation rounds, unmasking probability 0.7 and
# confidence threshold 0.9.

# %%
config = TrainConfig(hidden_dim=64, latent_dim=32, lr=0.005, warm_up_epochs=30, max_epochs=200,
                     patience=60)
params, history = train(ds, splits, config)
print(f"stopped after {len(history.records)} epochs, best epoch {history.best_epoch}")

for r in history.records[:: max(1, len(history.records) // 8)]:
    print(f"epoch {r.epoch:4d}  loss {r.loss:.4f}  pseudo {r.pseudo_count:3d}  "
          f"val acc {r.val_accuracy:.3f}")

# %%
test = evaluate(params, ds, splits, "test")
majority = np.bincount(ds.labels[splits.nodes("test")]).max() / test.count
print(f"test accuracy {test.accuracy:.3f} (majority class {majority:.3f}), MCC {test.mcc:.3f}")
