"""The three detection configurations, straight from the closed-form law.

Walks through what each detector sees: which-path recording (no fringes
anywhere), the eraser without coincidence data (still no fringes at D0),
and the coincidence-gated views (fringes and antifringes that cancel).
Saves a three-panel figure to demos/output/.
"""
import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from qeraser import (
    ApparatusConfig,
    IdlerDetector,
    conditional_density,
    detector_probability,
    normalized_marginal,
)

OUT = pathlib.Path(__file__).parent / "output"
OUT.mkdir(exist_ok=True)

bs_out = ApparatusConfig(beam_splitter_in=False)
bs_in = ApparatusConfig(beam_splitter_in=True)
u = np.linspace(-5, 5, 2001)
D1, D2 = IdlerDetector.D1, IdlerDetector.D2

print("Idler routing probabilities:")
for cfg, label in ((bs_out, "beam splitter out"), (bs_in, "beam splitter in")):
    print(f"  {label}: P(D1) = {detector_probability(D1, cfg):.6f}, "
          f"P(D2) = {detector_probability(D2, cfg):.6f}")

marginal = normalized_marginal(u, bs_out)
print("\nThe D0 marginal is the same function for both settings:")
print("  max |marginal_in - marginal_out| =",
      np.max(np.abs(normalized_marginal(u, bs_in) - marginal)))

fig, axes = plt.subplots(1, 3, figsize=(15, 4), sharey=True)

axes[0].plot(u, conditional_density(u, D1, bs_out), label="D1-gated (slit A)")
axes[0].plot(u, conditional_density(u, D2, bs_out), "--", label="D2-gated (slit B)")
axes[0].set_title("Which-path recorded: envelopes only")

axes[1].plot(u, marginal, "k", label="D0 marginal (either setting)")
axes[1].set_title("Signal screen alone: never any fringes")

axes[2].plot(u, conditional_density(u, D1, bs_in), label="D1-gated fringes")
axes[2].plot(u, conditional_density(u, D2, bs_in), "--", label="D2-gated antifringes")
axes[2].plot(u, marginal, "k:", label="their average = marginal")
axes[2].set_title("Erased + coincidence-gated")

for ax in axes:
    ax.set_xlabel("u (fringe periods)")
    ax.legend(fontsize=8)
axes[0].set_ylabel("probability density")
fig.tight_layout()
fig.savefig(OUT / "densities.png", dpi=120)
print(f"\nwrote {OUT / 'densities.png'}")

print("\nAntifringe half-period structure (fringe factors after removing the envelope):")
for x in (0.0, 0.25, 0.5, 0.75):
    f1 = conditional_density(x, D1, bs_in) / normalized_marginal(x, bs_in)
    f2 = conditional_density(x, D2, bs_in) / normalized_marginal(x, bs_in)
    print(f"  u={x:4.2f}: D1 factor {f1:.4f}, D2 factor {f2:.4f}, sum {f1 + f2:.4f}")
