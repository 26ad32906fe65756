"""Fixed points of the tracker error recursions and the PD output weights.

Scalar model of one coordinate: inner map g(x; xi) = x + sigma xi, batch M.
  corrected tracker: z+ = (1-beta)(z + g(x+) - g(x)) + beta gbar(x+)
  moving average:    z+ = (1-beta) z + beta gbar(x+)
With x frozen both have stationary MSE beta^2 s2 / (M (2 beta - beta^2)).
Under constant drift x+ = x + v the moving average also lags by
(1-beta) v / beta, adding its square to the MSE; the corrected tracker is
unaffected because g is affine.
"""
import numpy as np


def simulate(beta, M, sigma, v, steps=4000, reps=4000, seed=1):
    rng = np.random.default_rng(seed)
    x = np.zeros(reps)
    zc = x + sigma * rng.standard_normal(reps) / np.sqrt(M)
    zm = zc.copy()
    acc_c = acc_m = 0.0
    n = 0
    for t in range(steps):
        xn = x + v
        noise = sigma * rng.standard_normal(reps) / np.sqrt(M)
        gbar = xn + noise
        zc = (1 - beta) * (zc + xn - x) + beta * gbar
        zm = (1 - beta) * zm + beta * gbar
        x = xn
        if t >= steps // 2:
            acc_c += np.mean((zc - x) ** 2)
            acc_m += np.mean((zm - x) ** 2)
            n += 1
    return acc_c / n, acc_m / n


if __name__ == "__main__":
    for beta, M, sigma, v in [(0.5, 16, 1.0, 0.0), (0.1, 16, 1.0, 0.0), (0.1, 16, 1.0, 0.01)]:
        fixed = beta**2 * sigma**2 / (M * (2 * beta - beta**2))
        lag = ((1 - beta) * v / beta) ** 2
        c, m = simulate(beta, M, sigma, v)
        print(f"beta={beta} M={M} v={v}: predicted corrected={fixed:.6g} moving={fixed + lag:.6g}; "
              f"simulated corrected={c:.6g} moving={m:.6g}")
    w = np.sqrt(np.arange(1, 5))
    print("pd weights K=4 exponent 0.5:", (w / w.sum()).tolist())
