"""A two-layer ReLU network learns features aligned with its labels.

On a single-index target the top singular directions of the hidden features
carry more of the label after training than at initialisation. A single
large first-layer step already shows why: the gradient is close to rank one
and its leading direction points at the hidden index, more so as the step
grows.
"""
import numpy as np

from featlab.feature_net import SingleIndexTask, feature_alignment, init_net, one_step_analysis, train_gd

task = SingleIndexTask(d=20, n=1000, seed=0)
X, Y = task.sample()
net = init_net(20, 200, seed=0, symmetric=True)
traj = train_gd(net, X, Y, eta=0.5, steps=500, record_every=100)
print("step  train loss  label share in top 10 features")
for k, snap in zip(traj.steps, traj.nets):
    print(f"{k:4d}  {traj.losses[k]:.4f}      {feature_alignment(snap, X, Y, 10):.3f}")

small = init_net(20, 200, seed=0, symmetric=True, readout_std=200**-0.5)
print("\n eta  rank-1 residual  <u1, beta*>^2")
for eta in (0.5, 1.0, 2.0, 4.0):
    out = one_step_analysis(small, X, Y, eta, task.beta_star)
    print(f"{eta:4.1f}  {out.rank1_residual:.3f}            {out.leading_alignment:.3f}")
