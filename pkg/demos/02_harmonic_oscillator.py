"""Harmonic oscillator: rigid rotation of the phase-space density.

With H = p^2/2m + m w^2 x^2 / 2 the first moments rotate at frequency w and
the density returns to itself after one period.  The Strang-split
propagator conserves the norm to machine precision at every step.
"""

import math

from kvnlab import Grid2D, HamiltonianSpec, PropagationPlan, expectation, kvn_evolve, make_gaussian

grid = Grid2D(128, 128, -8.0, 8.0, -8.0, 8.0)
omega = 1.0
h = HamiltonianSpec.harmonic(mass=1.0, omega=omega)
period = 2.0 * math.pi / omega

state = make_gaussian(grid, 2.0, 0.0, 0.7, 0.7)
print("Gaussian released at (x, p) = (2, 0); one period in 8 snapshots\n")
print(f"{'t/T':>6} {'<x>':>9} {'<p>':>9} {'norm - 1':>12}")
for k in range(8):
    state = kvn_evolve(state, h, PropagationPlan(dt=period / 2048, n_steps=256))
    frac = (k + 1) / 8.0
    print(f"{frac:6.3f} {expectation(state, 'x'):9.5f} {expectation(state, 'p'):9.5f} "
          f"{state.norm() - 1.0:12.2e}")

print("\nangle check: after T/4 the moments should sit at (0, -2);")
print("after a full period they return to (2, 0) within a percent.")
