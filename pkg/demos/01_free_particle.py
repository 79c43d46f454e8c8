"""Free-particle motion of a phase-space amplitude.

A state on the (x, p) lattice evolves under the generator (p/m) pi_x.  A
point state rides the classical orbit x = x0 + (p0/m) t exactly; a Gaussian
does the same with its mean while spreading ballistically, and the momentum
marginal never moves.
"""

import numpy as np

from kvnlab import (
    Grid2D, HamiltonianSpec, PropagationPlan,
    expectation, kvn_evolve, make_gaussian, make_point, marginal,
)
from kvnlab.phasespace import joint_density, sigma

grid = Grid2D(256, 256, -16.0, 16.0, -8.0, 8.0)
h = HamiltonianSpec.free(mass=1.0)

# --- a point state follows the classical line -------------------------------
p0 = 2.0
point = make_point(grid, 0.0, p0)
print("point state at (0, %.1f), dt = 0.25" % p0)
print(f"{'t':>6} {'argmax x':>10} {'p0*t':>8}")


def track(step, snap):
    t = (step + 1) * 0.25
    dens = joint_density(snap)
    i, j = np.unravel_index(np.argmax(dens.array), dens.array.shape)
    print(f"{t:6.2f} {dens.values[0][i]:10.4f} {p0 * t:8.4f}")


kvn_evolve(point, h, PropagationPlan(dt=0.25, n_steps=12), observer=track)

# --- a Gaussian moves at <p>/m and spreads ----------------------------------
gauss = make_gaussian(grid, -4.0, 1.0, 0.5, 0.25)
print("\nGaussian at (-4, 1), sigma = (0.5, 0.25)")
print(f"{'t':>6} {'<x>':>8} {'sigma_x':>9} {'<p>':>8} {'sigma_p':>9}")
state = gauss
for k in range(4):
    state = kvn_evolve(state, h, PropagationPlan(dt=0.1, n_steps=10))
    t = (k + 1) * 1.0
    print(f"{t:6.2f} {expectation(state, 'x'):8.4f} {sigma(state, 'x'):9.4f} "
          f"{expectation(state, 'p'):8.4f} {sigma(state, 'p'):9.4f}")

drift = np.abs(marginal(state, ("p",)).array - marginal(gauss, ("p",)).array).max()
print(f"\nmomentum marginal drift after t=4: {drift:.2e}")
print(f"norm after the full run:            {state.norm():.12f}")
