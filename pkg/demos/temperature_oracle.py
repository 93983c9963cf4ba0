"""The temperature fixed point, computed two independent ways.

The adaptive ladder pushes each spacing rho so that the swap acceptance
rate between adjacent levels hits 0.234.  For a standard normal target
that equilibrium is computable without any sampling: the stationary swap
rate between inverse temperatures u < v is a two-dimensional integral,
and bisection on the spacing finds where it crosses the target rate.

This script evaluates the integral, solves for the fixed point, then runs
the sampler and shows its adapted spacing landing on the same number.

Run:  python3 demos/temperature_oracle.py   (about a minute)
"""
import numpy as np

from aptmc import IsotropicGaussian, SamplerConfig
from aptmc.oracle import equilibrium_rho, stationary_swap_accept
from aptmc.sampler import run

target = IsotropicGaussian(dim=1, variance=1.0)

# The stationary rate grows from 0 to 1 as the hot level u rises toward
# the cold level v = 1; the fixed point is where it crosses 0.234.
print("stationary swap acceptance h(u, 1):")
for u in (0.01, 0.05, 0.2, 0.5, 0.9):
    print(f"  u = {u:<5} h = {stationary_swap_accept(target, u, 1.0):.4f}")

solution = equilibrium_rho(target, levels=2)
rho_hat = solution.rho[0]
print(f"\nbisection fixed point: rho_hat = {rho_hat:.6f} "
      f"(beta_2 = {solution.betas[1]:.6f}, residual {solution.residuals[0]:.1e})")

# Now the sampler, from a deliberately wrong ladder: the spacing
# recursion should find the same equilibrium on its own.
config = SamplerConfig(target=target, levels=2, iterations=50000, burnin=25000,
                       adaptation="cov", seed=11)
summary = run(config).summary
print(f"\nsampler after {config.iterations} iterations:")
print(f"  adapted rho      = {summary.final_rho[0]:.6f}")
print(f"  oracle  rho_hat  = {rho_hat:.6f}")
print(f"  difference       = {abs(summary.final_rho[0] - rho_hat):.4f}")
print(f"  swap acceptance  = {summary.swap_rate[0]:.4f}  (target 0.234)")

# Gaussians are scale-invariant under tempering, so every additional
# level repeats the same spacing: the equilibrium ladder is geometric.
print("\nfor more levels the same spacing repeats (geometric ladder):")
print("  betas(L=4) =", np.exp(np.concatenate([[0.0], -np.cumsum(np.exp([rho_hat] * 3))])))
