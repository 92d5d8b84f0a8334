"""Closed-form performance measures: error bounds, capacity and the SER model."""

import numpy as np

from vmscma import Deployment, aser_high_snr, ergodic_capacity
from vmscma.analysis import (
    average_receive_power,
    capacity_monte_carlo,
    db_to_lin,
    single_layer_bound,
    snr_threshold_for,
    statistical_snr,
)
from vmscma.avm import get_tm, tm_codebooks
from vmscma.channel import block_rng

# Union bound against its AIPD closed form for the all-QPSK mode.
tm5 = get_tm(5)
cbs = tm_codebooks(tm5, Deployment.equal(6))
print("snr_db  single-layer bound  AIPD form   ratio")
for snr in (10, 20, 30, 40):
    n0 = float(db_to_lin(-snr))
    a, b = single_layer_bound(cbs, N0=n0), aser_high_snr(cbs, N0=n0)
    print(f"{snr:6d}  {a:18.3e}  {b:10.3e}  {a / b:.3f}")

# Capacity of the K resource nodes; a Monte Carlo average agrees with K e^x E1(x).
P = average_receive_power(cbs)
for snr in (0, 10, 20):
    n0 = P / db_to_lin(snr)
    exact = ergodic_capacity(P, n0, cbs.K)
    mc = capacity_monte_carlo(P, n0, cbs.K, 200_000, block_rng(snr))
    print(f"P/N0 = {snr:2d} dB: closed form {exact:7.3f} bits, Monte Carlo {mc:7.3f} bits")

# The exponential SER model of a mode and the SNR it needs for a target SER.
tm1 = get_tm(1).ser_model
print(f"\nTM1 reaches SER 1e-2 at linear SNR {snr_threshold_for(tm1, 0.01):.3f}")

# Far users lower the statistical SNR; the allocation equalises the users regardless.
diverse = Deployment(np.array([4.70, 4.60, 1.62, 1.25, 1.20, 1.13]))
far = tm_codebooks(tm5, diverse)
print(f"statistical SNR at N0 = 0.01: equal d {statistical_snr(cbs, N0=0.01):.1f}, diverse d {statistical_snr(far, N0=0.01):.2f}")
