# %%
# Link budgets: how the received signal decays with distance, occlusion,
# walls and fast fading -- and what that means for achievable rate.

import numpy as np

from cellsim.channel import (FadingModel, free_space_loss, los_check,
                             min_power_for_rate, noise_power, path_loss,
                             shannon_rate)
from cellsim.rngstream import substream
from cellsim.scenario import Building

rng = substream(3, "demo")

# %%
# Free-space loss and the thermal noise floor (Table-style reference numbers).

for d in (50, 100, 250, 500, 1000):
    print(f"  FSPL at {d:4d} m, 2.6 GHz: {free_space_loss(d, 2600.0):6.2f} dB")
print(f"noise over one 180 kHz block: {noise_power(-174.0, 1.8e5):.2f} dBm")

# %%
# A building in the way flips a link to non-LoS and costs ~20 dB extra.

wall = Building(footprint=[(40, -20), (60, -20), (60, 20), (40, 20)], height_m=25.0)
print("clear path LoS?  ", los_check((0, 0), 8.0, (100, 0), 1.5, []))
print("blocked path LoS?", los_check((0, 0), 8.0, (100, 0), 1.5, [wall]))

lb_los = path_loss((0, 0), 8.0, (100, 0), 1.5, freq_mhz=2600.0, los=True,
                   sigma_los_db=0.0, sigma_nlos_db=0.0)
lb_nlos = path_loss((0, 0), 8.0, (100, 0), 1.5, freq_mhz=2600.0, los=False,
                    sigma_los_db=0.0, sigma_nlos_db=0.0)
print(f"LoS total {lb_los.PL:.1f} dB, NLoS total {lb_nlos.PL:.1f} dB "
      f"(penalty {lb_nlos.PL - lb_los.PL:.0f} dB)")

# %%
# Every fading family is normalized to unit mean power, so it reshapes the
# rate distribution without shifting the average link gain.

for model in (FadingModel("rayleigh"), FadingModel("rician", k_factor=5.0),
              FadingModel("nakagami", m=2.0)):
    draws = model.sample_power(rng, size=50000)
    print(f"  {model.kind:<10} mean |h|^2 = {draws.mean():.3f}  "
          f"p5 = {np.percentile(draws, 5):.3f}  p95 = {np.percentile(draws, 95):.3f}")

# %%
# Shannon rate and its exact inverse: what power does a 1 Mbit/s target need?

bw = 1.8e5
gain = 10 ** (-lb_los.PL / 10.0)
noise_w = 10 ** (noise_power(-174.0, bw) / 10.0) / 1000.0
for snr_db in (0, 10, 20, 30):
    r = shannon_rate(bw, 10 ** (snr_db / 10))
    print(f"  SINR {snr_db:2d} dB -> {r / 1e6:5.2f} Mbit/s on one block")
p = min_power_for_rate(1e6, bw, gain, noise_w)
print(f"1 Mbit/s over this 100 m LoS link needs {float(p) * 1e3:.3f} mW")
print("round trip:", float(shannon_rate(bw, gain * p / noise_w)), "bit/s")
