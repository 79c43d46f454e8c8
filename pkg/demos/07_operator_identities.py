"""The exact operator-identity catalog.

Everything the propagators rely on is checked symbolically with exact
rational coefficients: the commutation table, the deformed canonical pair,
the Heisenberg closed forms of the pointer model, and the Planck-operator
conjugation identities.  Residuals are operator expressions; a pass means
the residual is the zero polynomial, not a small float.
"""

from fractions import Fraction

from kvnlab import algebra as al

# build a Liouvillian and evolve operators along its adjoint orbit
h = al.multiply(al.x, al.P)
l = al.liouvillian_of(h, subsystems=("target", "device"))
print("pointer Hamiltonian H = x*P")
print("Liouvillian         L =", l)
print()
for name in ("x", "p", "X", "P", "pi_x", "pi_P"):
    evolved = al.heisenberg_evolve(al.OperatorExpr.gen(name), l, term_bound=4)
    print(f"  {name:5s}(t) = {evolved}")

n_op = al.heisenberg_evolve(al.X, l, term_bound=4) - al.x
d_op = al.heisenberg_evolve(al.p, l, term_bound=4) - al.p
print("\nerror operator       N(t) =", n_op)
print("disturbance operator D(t) =", d_op)
print("their commutator          =", al.commutator(n_op, d_op))

# the deformed pair with the opposite-sign convention satisfies the CCR
xh, ph = al.deformed_pair("half_minus_plus")
print("\n[x_h, p_h] =", al.commutator(xh, ph))

# run the whole catalog
print("\nfull catalog:")
for r in al.verify_identity_suite():
    status = "pass" if r.passed else f"FAIL ({r.residual_term_count} residual terms)"
    print(f"  {status:6s} {r.name}")
