"""
Layers, parameter counts and a gradient check
=============================================

Builds both networks, prints their layer tables and sizes, then compares
backprop with central differences on a few coordinates of the Bi-GRU.
"""

import numpy as np

from nilm_ssl import models as M

rng = np.random.default_rng(0)

for kind, window in ((M.S2P, 79), (M.BIGRU, 5)):
    m = M.build_model(M.ArchitectureSpec(kind, window), rng)
    print(f"{kind} (W={window}, {m.target_mode} target): {m.params.count():,} parameters")
    for row in m.layer_table():
        print("   ", row)
    M.apply_freeze(m, M.FREEZE_PARTIAL)
    print(f"    trainable under partial freezing: {m.params.count(trainable_only=True):,}")

# backprop vs central differences, loss = sum(out * R)
m = M.build_model(M.ArchitectureSpec(M.BIGRU, 5), rng)
net = m.network
x = rng.normal(size=(4, 5, 1))
R = rng.normal(size=(4, 1))
net.params.zero_grad()
net.forward(x, training=False)
net.backward(R)

h = 1e-5
for name in ("conv/kernel", "bigru1/forward/U", "bigru2/backward/b", "output/weight"):
    p = net.params[name]
    i = int(rng.integers(p.value.size))
    flat = p.value.reshape(-1)
    old = flat[i]
    flat[i] = old + h
    up = float((net.forward(x) * R).sum())
    flat[i] = old - h
    down = float((net.forward(x) * R).sum())
    flat[i] = old
    numeric = (up - down) / (2 * h)
    analytic = float(p.grad.reshape(-1)[i])
    print(f"{name:20s}[{i:5d}]  backprop {analytic: .6e}  numeric {numeric: .6e}")
