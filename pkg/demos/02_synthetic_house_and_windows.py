"""
A synthetic household and its training windows
==============================================

Simulates two weeks of the desk appliances, checks the noise-free sum
identity, then cuts normalized windows for both target modes.
"""

import numpy as np

from nilm_ssl.data import synthetic as Y
from nilm_ssl.data import windows as Wn
from nilm_ssl.data.series import AGGREGATE

specs = Y.desk_appliances()
for s in specs:
    print(f"{s.name:7s} levels {s.power_levels} W, duty {s.duty_cycle:.2f}, mean {s.mean_power:.1f} W")

clean = Y.generate_synthetic(specs, days=14, seed=7)
total = sum(a.values for a in clean.appliances.values())
print("noise-free aggregate equals the appliance sum:", np.array_equal(clean.aggregate.values, total))

house = Y.generate_synthetic(specs, days=14, seed=7, noise_std=20.0)
fridge = house.channel("fridge").values
print(f"{len(house)} minutes; fridge on {np.mean(fridge > 0):.1%} of the time")
# the two trivial predictors a trained model has to beat
print(f"always-zero MAE {fridge.mean():.1f} W, always-mean MAE {np.abs(fridge - fridge.mean()).mean():.1f} W")

agg_stats = Wn.fit_norm(house.aggregate)
tgt_stats = Wn.fit_norm(house.channel("fridge"))
s2p = Wn.make_windows(house, "fridge", 79, Wn.MIDPOINT, agg_stats, tgt_stats)
gru = Wn.make_windows(house, "fridge", 5, Wn.ENDPOINT, agg_stats, tgt_stats)
print(f"S2p windows {s2p.inputs.shape}, target at offset {Wn.target_offset(79, Wn.MIDPOINT)}")
print(f"Bi-GRU windows {gru.inputs.shape}, target at offset {Wn.target_offset(5, Wn.ENDPOINT)}")

# pretext task: the target is the window's own aggregate sample
pre = Wn.make_windows(house, AGGREGATE, 79, Wn.MIDPOINT, agg_stats, agg_stats)
print("pretext targets are window centres:", np.array_equal(pre.targets, pre.inputs[:, 39]))

train, val = Wn.split_chronological(s2p, 0.1)
print(f"chronological split: {len(train)} train / {len(val)} validation windows")
