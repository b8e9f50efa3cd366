"""Learning curves of early-stopped gradient flow in the Gaussian sequence model.

We take the power-law family with eigenvalue decay beta = 2 and smoothness
s = 1.5, stop the flow at t = n^theta and watch how the exact risk falls with
the sample size.

Stopping at the balancing exponent reaches the minimax slope, while stopping
too early leaves bias and stopping too late lets variance in. Once theta
reaches beta the flow has fitted the noise and the risk stops decaying.
"""
import numpy as np

from featlab.fitting import fit_loglog
from featlab.gsm import PowerLawFamily, learning_curve
from featlab.rates import kgf_curve_exponent, optimal_theta

BETA, S = 2.0, 1.5
n = 2 ** np.arange(8, 15)
family = PowerLawFamily(BETA, S)

print(f"balancing exponent theta* = {optimal_theta(S, BETA):.3f}\n")
print(f"{'theta':>6} {'fitted':>8} {'predicted':>10}   risk at n = 256 .. 16384")
for theta in (0.2, 0.4, 0.5, 0.8, 1.2, 2.0):
    curve = learning_curve(family, n, theta)
    slope = fit_loglog(n, curve.risk).slope
    pred = kgf_curve_exponent(S, BETA, theta)
    shown = "saturated" if pred.saturated else f"{pred.n_exponent:.3f}"
    print(f"{theta:6.1f} {slope:8.3f} {shown:>10}   " + " ".join(f"{r:.2e}" for r in curve.risk))
