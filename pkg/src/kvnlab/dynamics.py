"""Split-operator propagation on the phase-space lattice.

The classical generator for H(x, p) = T(p) + V(x) splits into a kinetic
factor exp(-i dt T'(p) pi_x), diagonal in the (pi_x, p) representation, and
a potential factor exp(+i dt V'(x) pi_p), diagonal in (x, pi_p).  Both are
pure phases, so every propagator here is unitary to machine precision; for
quadratic T and V each factor advects its axis exactly and Strang splitting
is second order overall.

The hbar-deformed propagator evolves H(x + a*hbar*pi_p, p + b*hbar*pi_x)
with (a, b) fixed by a deformation convention.  The state-independent
diagonal phase exp(-i H(x,p) dt / hbar), which diverges as hbar -> 0 and
carries no observable content in this frame, is factored out so the
classical limit is numerically meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import algebra
from .errors import (
    IllegalHamiltonian,
    ShiftOverflow,
    UnstablePlan,
    UnsupportedHamiltonian,
)
from .phasespace import (
    BipartiteState,
    PhaseState,
    l2_distance,
    to_representation,
)

DEFORM_CONVENTIONS = {name: (float(a), float(b)) for name, (a, b) in algebra.DEFORM_CONVENTIONS.items()}

_BOUNDARY_GROWTH_LIMIT = 1e-6


@dataclass(frozen=True)
class HamiltonianSpec:
    """Separable quadratic Hamiltonian T(p) + V(x), optional bilinear coupling.

    ``kinetic`` and ``potential`` are coefficient triples (c0, c1, c2) of
    c0 + c1*u + c2*u^2; kinetic defaults to p^2/(2*mass).  ``coupling`` is
    the strength of a single lambda*x*P target-device term.
    """

    mass: float = 1.0
    kinetic: tuple = None
    potential: tuple = (0.0, 0.0, 0.0)
    coupling: float = None

    def __post_init__(self):
        if not self.mass > 0:
            raise IllegalHamiltonian(f"mass must be positive, got {self.mass}")
        for name in ("kinetic", "potential"):
            coeffs = getattr(self, name)
            if coeffs is None:
                continue
            coeffs = tuple(float(c) for c in coeffs)
            if len(coeffs) > 3:
                raise UnsupportedHamiltonian(f"{name} degree above 2 is not supported")
            coeffs = coeffs + (0.0,) * (3 - len(coeffs))
            object.__setattr__(self, name, coeffs)
        if self.coupling is not None:
            object.__setattr__(self, "coupling", float(self.coupling))

    @classmethod
    def free(cls, mass=1.0):
        return cls(mass=mass)

    @classmethod
    def harmonic(cls, mass=1.0, omega=1.0):
        return cls(mass=mass, potential=(0.0, 0.0, 0.5 * mass * omega**2))

    @classmethod
    def zero(cls):
        return cls(kinetic=(0.0, 0.0, 0.0))

    def kinetic_coeffs(self):
        if self.kinetic is not None:
            return self.kinetic
        return (0.0, 0.0, 1.0 / (2.0 * self.mass))

    def t_prime(self, p):
        c = self.kinetic_coeffs()
        return c[1] + 2.0 * c[2] * p

    def v_prime(self, x):
        c = self.potential
        return c[1] + 2.0 * c[2] * x

    def is_static(self):
        tc = self.kinetic_coeffs()
        return tc[1] == tc[2] == 0.0 and self.potential[1] == self.potential[2] == 0.0

    def to_operator_expr(self, subsystem="target"):
        """Exact symbolic form of T + V on the chosen subsystem's generators."""
        q, mom = (algebra.x, algebra.p) if subsystem == "target" else (algebra.X, algebra.P)
        out = algebra.OperatorExpr.zero()
        for coeffs, g in ((self.kinetic_coeffs(), mom), (self.potential, q)):
            acc = algebra.OperatorExpr.one()
            for k, c in enumerate(coeffs):
                if c:
                    out = out + acc.scaled(Fraction(c))
                acc = algebra.multiply(acc, g)
        return out


@dataclass(frozen=True)
class PropagationPlan:
    """Time step, step count, splitting order, and the deformation hbar."""

    dt: float
    n_steps: int
    splitting: str = "strang"
    hbar: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.splitting not in ("strang", "lie"):
            raise ValueError(f"unknown splitting {self.splitting!r}")
        if self.hbar < 0:
            raise ValueError("hbar must be >= 0")


def _phase_kinetic(grid, h, dt, hbar, b):
    """Kinetic split phase on the (pi_x, p) lattice."""
    pix = grid.pi_x()[:, None]
    p = grid.p()[None, :]
    arg = h.t_prime(p) * pix if hbar == 0.0 else (
        b * h.t_prime(p) * pix + (b * b * hbar * h.kinetic_coeffs()[2]) * pix**2
    )
    return np.exp(-1j * dt * arg)


def _phase_potential(grid, h, dt, hbar, a):
    """Potential split phase on the (x, pi_p) lattice."""
    x = grid.x()[:, None]
    pip = grid.pi_p()[None, :]
    if hbar == 0.0:
        arg = -h.v_prime(x) * pip
    else:
        arg = a * h.v_prime(x) * pip + (a * a * hbar * h.potential[2]) * pip**2
    return np.exp(-1j * dt * arg)


def _band_mass(amp, measure):
    dens = np.abs(amp) ** 2
    interior = dens[tuple(slice(1, -1) for _ in range(dens.ndim))]
    return (float(dens.sum()) - float(interior.sum())) * measure


def _split_evolve(s, h, plan, hbar, a, b, observer=None, check_stability=True):
    grid = s.grid
    half = plan.splitting == "strang"
    phase_t = _phase_kinetic(grid, h, plan.dt, hbar, b)
    v_needed = h.potential[1] != 0.0 or h.potential[2] != 0.0
    phase_v = _phase_potential(grid, h, plan.dt * (0.5 if half else 1.0), hbar, a)
    work = to_representation(s, "xp")
    amp = np.array(work.amp)
    measure = grid.dx * grid.dp
    band = _band_mass(amp, measure) if check_stability else 0.0
    xs, ps = grid.x_axis, grid.p_axis

    from .phasespace import _to_conjugate, _to_coordinate

    for step in range(plan.n_steps):
        if v_needed and half:
            amp = _to_conjugate(amp, ps, 1)
            amp *= phase_v
            amp = _to_coordinate(amp, ps, 1)
        amp = _to_conjugate(amp, xs, 0)
        amp *= phase_t
        amp = _to_coordinate(amp, xs, 0)
        if v_needed:
            amp = _to_conjugate(amp, ps, 1)
            amp *= phase_v
            amp = _to_coordinate(amp, ps, 1)
        if check_stability:
            new_band = _band_mass(amp, measure)
            if new_band - band > _BOUNDARY_GROWTH_LIMIT:
                raise UnstablePlan(
                    f"boundary mass grew by {new_band - band:.3e} in step {step}"
                )
            band = new_band
        if observer is not None:
            observer(step, PhaseState(grid, "xp", amp))
    return PhaseState(grid, "xp", amp)


def kvn_evolve(s, h, plan, observer=None, check_stability=True):
    """Propagate a phase-space state with the classical generator.

    ``observer(step, state)`` is called after every step with the state in
    the xp representation.  Raises UnstablePlan when one step grows the
    boundary-shell mass by more than 1e-6.
    """
    if plan.hbar != 0.0:
        raise ValueError("kvn_evolve requires a plan with hbar=0")
    if h.coupling is not None:
        raise IllegalHamiltonian("coupled Hamiltonians need a bipartite state")
    if h.is_static():
        # generator vanishes up to a global constant: state unchanged exactly
        if observer is not None:
            for step in range(plan.n_steps):
                observer(step, to_representation(s, "xp"))
        return s
    return _split_evolve(s, h, plan, 0.0, 0.0, 0.0, observer, check_stability)


def qm_evolve(s, h, plan, convention="full_appendixE", observer=None, check_stability=True):
    """Propagate with the hbar-deformed generator H(x_h, p_h).

    ``plan.hbar == 0`` degenerates to kvn_evolve exactly.  The sign
    convention fixes (a, b) in x_h = x + a*hbar*pi_p, p_h = p + b*hbar*pi_x.
    """
    if convention not in DEFORM_CONVENTIONS:
        raise ValueError(f"unknown deformation convention {convention!r}")
    if h.coupling is not None:
        raise IllegalHamiltonian("coupled Hamiltonians need a bipartite state")
    ck = h.kinetic_coeffs()
    if len(h.potential) > 3 or len(ck) > 3:
        raise UnsupportedHamiltonian("degree above 2")
    if plan.hbar == 0.0:
        return kvn_evolve(s, h, PropagationPlan(plan.dt, plan.n_steps, plan.splitting, 0.0),
                          observer, check_stability)
    a, b = DEFORM_CONVENTIONS[convention]
    if h.is_static():
        return s
    return _split_evolve(s, h, plan, plan.hbar, a, b, observer, check_stability)


def couple_evolve(s, coupling, t, check_wrap=True):
    """Exact bipartite propagator for the pointer Hamiltonian lambda*x*P.

    Applies exp(-i L t) with L the four-term generator of lambda*x*P; the
    two split factors commute, so one application is exact for any t.
    Raises ShiftOverflow when the shear would wrap more than 1e-6 of the
    probability around the periodic box (``check_wrap=False`` skips the
    guard and accepts the periodic identification).
    """
    from .measurement import wrapped_shift_mass
    from .phasespace import marginal

    lam_t = float(coupling) * float(t)
    if lam_t == 0.0:
        return s
    work = s.with_conj((False, False, False, False))

    if check_wrap:
        joint_pP = marginal(work, ("p", "P"))
        wrap_p = wrapped_shift_mass(
            joint_pP.array * joint_pP.cell_measure(),
            joint_pP.values[0], joint_pP.values[1],
            work.target_grid.p_min, work.target_grid.p_max, -lam_t,
        )
        joint_Xx = marginal(work, ("X", "x"))
        wrap_X = wrapped_shift_mass(
            joint_Xx.array * joint_Xx.cell_measure(),
            joint_Xx.values[0], joint_Xx.values[1],
            work.device_grid.x_min, work.device_grid.x_max, lam_t,
        )
        if wrap_p > 1e-6:
            raise ShiftOverflow(
                f"momentum kick wraps {wrap_p:.3e} of the mass around the p range"
            )
        if wrap_X > 1e-6:
            raise ShiftOverflow(
                f"pointer shift wraps {wrap_X:.3e} of the mass around the X range"
            )

    # factor exp(+i lam_t P pi_p): diagonal with p conjugated
    view = work.with_conj((False, True, False, False))
    pip = view.axis_values(1).reshape(1, -1, 1, 1)
    pval = view.axis_values(3).reshape(1, 1, 1, -1)
    amp = view.amp * np.exp(1j * lam_t * pip * pval)
    view = BipartiteState(view.target_grid, view.device_grid, (False, True, False, False), amp)

    # factor exp(-i lam_t x pi_X): diagonal with X conjugated
    view = view.with_conj((False, False, True, False))
    xv = view.axis_values(0).reshape(-1, 1, 1, 1)
    piX = view.axis_values(2).reshape(1, 1, -1, 1)
    amp = view.amp * np.exp(-1j * lam_t * xv * piX)
    view = BipartiteState(view.target_grid, view.device_grid, (False, False, True, False), amp)
    return view.with_conj((False, False, False, False))


def _free_step_4d(amp, tg, dg, h_t, h_d, dt, splitting):
    """One uncoupled step on a 4D amplitude; subsystem factors commute."""
    from .phasespace import _to_conjugate, _to_coordinate

    half = splitting == "strang"

    def phase_t(grid, h, axis0, axis1, shape4):
        pix = grid.pi_x()
        p = grid.p()
        a0 = [1] * 4
        a0[axis0] = len(pix)
        a1 = [1] * 4
        a1[axis1] = len(p)
        return np.exp(-1j * dt * h.t_prime(p.reshape(a1)) * pix.reshape(a0))

    def phase_v(grid, h, axis0, axis1, frac):
        x = grid.x()
        pip = grid.pi_p()
        a0 = [1] * 4
        a0[axis0] = len(x)
        a1 = [1] * 4
        a1[axis1] = len(pip)
        return np.exp(1j * dt * frac * h.v_prime(x.reshape(a0)) * pip.reshape(a1))

    subsys = (
        (tg, h_t, 0, 1),
        (dg, h_d, 2, 3),
    )

    def apply_v(amp, frac):
        for grid, h, ax0, ax1 in subsys:
            if h is None or (h.potential[1] == 0.0 and h.potential[2] == 0.0):
                continue
            amp = _to_conjugate(amp, grid.p_axis, ax1)
            amp *= phase_v(grid, h, ax0, ax1, frac)
            amp = _to_coordinate(amp, grid.p_axis, ax1)
        return amp

    def apply_t(amp):
        for grid, h, ax0, ax1 in subsys:
            if h is None:
                continue
            tc = h.kinetic_coeffs()
            if tc[1] == 0.0 and tc[2] == 0.0:
                continue
            amp = _to_conjugate(amp, grid.x_axis, ax0)
            amp *= phase_t(grid, h, ax0, ax1, amp.shape)
            amp = _to_coordinate(amp, grid.x_axis, ax0)
        return amp

    if half:
        amp = apply_v(amp, 0.5)
        amp = apply_t(amp)
        amp = apply_v(amp, 0.5)
    else:
        amp = apply_t(amp)
        amp = apply_v(amp, 1.0)
    return amp


def free_evolve_bipartite(s, h_target, h_device, duration, plan):
    """Uncoupled evolution of target and device for ``duration``."""
    if duration == 0.0:
        return s
    n = max(1, round(duration / plan.dt))
    dt = duration / n
    work = s.with_conj((False, False, False, False))
    amp = np.array(work.amp)
    for _ in range(n):
        amp = _free_step_4d(amp, work.target_grid, work.device_grid,
                            h_target, h_device, dt, plan.splitting)
    return BipartiteState(work.target_grid, work.device_grid, (False,) * 4, amp)


def pulsed_propagator(s, h_target, h_device, eps, t1, t_total, plan):
    """Free motion to t1, impulsive pointer coupling of strength eps, free motion after.

    Composition order: U0(t_total - t1) * exp(-i eps (coupling generator)) * U0(t1).
    """
    if not 0.0 < t1 < t_total:
        raise ValueError("need 0 < t1 < t_total")
    out = free_evolve_bipartite(s, h_target, h_device, t1, plan)
    if eps != 0.0:
        out = couple_evolve(out, 1.0, eps)
    return free_evolve_bipartite(out, h_target, h_device, t_total - t1, plan)


def classical_limit_scan(s, h, t, hbars, n_steps=200, convention="full_appendixE"):
    """L2 deviation of the deformed propagator from the classical one.

    Returns [(hbar, deviation)] with the same step schedule for every run.
    """
    dt = float(t) / n_steps
    base_plan = PropagationPlan(dt=dt, n_steps=n_steps, hbar=0.0)
    ref = kvn_evolve(s, h, base_plan)
    out = []
    for hb in hbars:
        if hb == 0.0:
            out.append((0.0, 0.0))
            continue
        plan = PropagationPlan(dt=dt, n_steps=n_steps, hbar=float(hb))
        evolved = qm_evolve(s, h, plan, convention=convention)
        out.append((float(hb), l2_distance(evolved, ref)))
    return out
