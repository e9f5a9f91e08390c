"""
Field solver
------------

Leapfrog integration of derived first-order field equations for a scalar
field on a static 1+1-D periodic grid.

The derived system is reduced to the conservative form

    phi_t = pi / c0
    pi_t  = -(1/w) d_x (w c1 d_x phi) - f(phi, x)

where pi is the time component of the momentum, pi^1 = c1 d_x phi comes
from the momentum-definition equations and w is the weight that turns the
connection terms of the divergence equation into a flux.  Space is
discretized with forward/backward differences (the composition is the
standard three-point stencil) and time with kick-drift-kick leapfrog.

The conserved discrete energy is

    E = dx sum_j [ w_j (pi+ pi- / (2 c0_j) + U(phi_j)) ]
        - dx/2 sum_j (w c1)_{j+1/2} (D+ phi)_j^2

with pi+- the half-step momenta and dU/dphi = f.

"""

import csv
import hashlib
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional

import numpy as np
import sympy as sp

from .dynamics import FieldEquations, solve_momenta
from .kernel import canonical

SCHEMES = ("leapfrog",)


class NonHyperbolicSplit(ValueError):
    """The equations cannot be written as an explicit evolution in x0."""


class SolverDivergence(FloatingPointError):
    """A non-finite value appeared in the state."""

    def __init__(self, step: int, index: int, field_name: str):
        super().__init__(f"non-finite {field_name} at grid index {index} in step {step}")
        self.step, self.index, self.field_name = step, index, field_name


@dataclass(frozen=True)
class GridState:
    phi: np.ndarray
    pi: np.ndarray
    t: float = 0.0
    step: int = 0
    length: float = 2 * math.pi

    def __post_init__(self):
        if self.phi.shape != self.pi.shape or self.phi.ndim != 1:
            raise ValueError("phi and pi must be one-dimensional arrays of equal length")
        for name, arr in (("phi", self.phi), ("pi", self.pi)):
            bad = np.flatnonzero(~np.isfinite(arr))
            if bad.size:
                raise SolverDivergence(self.step, int(bad[0]), name)

    @property
    def M(self) -> int:
        return self.phi.size

    @property
    def dx(self) -> float:
        return self.length / self.M

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.M) * self.dx


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    steps: int
    scheme: str = "leapfrog"
    cadence: int = 1
    parameters: dict = field(default_factory=dict)
    bindings: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.steps < 0 or self.cadence < 1:
            raise ValueError("steps must be >= 0 and cadence >= 1")

    def cfl(self, dx: float) -> float:
        return self.dt / dx


# ---------------------------------------------------------------------------
# compiling the symbolic system
# ---------------------------------------------------------------------------

@dataclass
class EvolutionRule:
    """Coefficients of the conservative form, as symbolic data and numeric callables."""

    c0: sp.Expr
    c1: sp.Expr
    w: sp.Expr
    force: sp.Expr          # f(phi, x)
    potential: sp.Expr      # U(phi, x), dU/dphi = f
    x: sp.Symbol
    phi: sp.Symbol
    momenta: dict = field(default_factory=dict)
    equations: Optional[FieldEquations] = field(default=None, repr=False)
    bindings: dict = field(default_factory=dict, repr=False)
    parameters: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._c0 = _numeric(self.c0, self.x)
        self._wc1 = _numeric(self.w * self.c1, self.x)
        self._w = _numeric(self.w, self.x)
        self._f = sp.lambdify((self.phi, self.x), self.force, "numpy")
        self._U = sp.lambdify((self.phi, self.x), self.potential, "numpy")
        self._cache = {}

    def coefficients(self, M: int, length: float) -> tuple:
        key = (M, length)
        if key not in self._cache:
            dx = length / M
            x = np.arange(M) * dx
            c0, w, wc1 = self._c0(x), self._w(x), self._wc1(x + dx / 2)
            if np.any(c0 <= 0) or np.any(w <= 0):
                raise NonHyperbolicSplit("c0 and w must be positive on the grid")
            self._cache[key] = (x, c0, w, wc1)
        return self._cache[key]

    def force_array(self, phi: np.ndarray, x: np.ndarray) -> np.ndarray:
        return np.broadcast_to(np.asarray(self._f(phi, x), dtype=float), phi.shape)

    def acceleration(self, phi: np.ndarray, length: float) -> np.ndarray:
        """pi_t as a function of phi."""
        x, _, w, wc1 = self.coefficients(phi.size, length)
        dx = length / phi.size
        flux = wc1 * (np.roll(phi, -1) - phi) / dx
        return -(flux - np.roll(flux, 1)) / dx / w - self.force_array(phi, x)

    def velocity(self, pi: np.ndarray, length: float) -> np.ndarray:
        _, c0, _, _ = self.coefficients(pi.size, length)
        return pi / c0

    def energy(self, state: GridState, dt: float) -> float:
        x, c0, w, wc1 = self.coefficients(state.M, state.length)
        dx = state.dx
        kick = 0.5 * dt * self.acceleration(state.phi, state.length)
        kinetic = (state.pi + kick) * (state.pi - kick) / (2 * c0)
        U = np.broadcast_to(np.asarray(self._U(state.phi, x), dtype=float), state.phi.shape)
        grad = (np.roll(state.phi, -1) - state.phi) / dx
        return float(dx * np.sum(w * (kinetic + U)) - 0.5 * dx * np.sum(wc1 * grad ** 2))

    def collocated_energy(self, state: GridState) -> float:
        """Energy with the integer-step momentum; oscillates at O(dt^2)."""
        return self.energy(state, 0.0)

    def pi1(self, phi: np.ndarray, length: float) -> np.ndarray:
        """Diagnostic spatial momentum c1 d_x phi with a central difference."""
        dx = length / phi.size
        x = np.arange(phi.size) * dx
        return _numeric(self.c1, self.x)(x) * (np.roll(phi, -1) - np.roll(phi, 1)) / (2 * dx)


def _numeric(e: sp.Expr, x: sp.Symbol) -> Callable:
    fn = sp.lambdify(x, e, "numpy")
    return lambda arr: np.broadcast_to(np.asarray(fn(arr), dtype=float), np.shape(arr)).copy()


def bind(e: sp.Expr, chart, bindings: Mapping[str, sp.Expr], parameters: Mapping[str, float]) -> sp.Expr:
    """Replace declared functions by their bound expressions and parameters by values."""
    e = sp.sympify(e)
    for name, app in chart.functions.items():
        if name in bindings:
            e = e.replace(app.func, sp.Lambda(app.args, sp.sympify(bindings[name])))
    e = e.doit()
    subs = {chart.parameters[k]: sp.nsimplify(v) for k, v in parameters.items() if k in chart.parameters}
    return e.xreplace(subs)


def _linear_part(e: sp.Expr, atoms: Mapping[sp.Expr, sp.Symbol]):
    """Coefficients of the listed atoms and the remainder; e must be affine in them."""
    rep = e.xreplace(dict(atoms))
    syms = list(atoms.values())
    coeffs = {}
    for atom, s in atoms.items():
        c = sp.diff(rep, s)
        if any(sp.diff(c, t) != 0 for t in syms):
            raise NonHyperbolicSplit(f"equation is not affine in {atom}")
        coeffs[atom] = canonical(c)
    rest = canonical(rep.xreplace({s: 0 for s in syms}))
    return coeffs, rest


def compile_evolution(eqs: FieldEquations, bindings: Optional[Mapping[str, sp.Expr]] = None,
                      parameters: Optional[Mapping[str, float]] = None) -> EvolutionRule:
    """Explicit update rule for a scalar field in 1+1 dimensions.

    ``bindings`` gives expressions in x for the declared opaque functions
    (metric factors, sources) and ``parameters`` numeric parameter values.
    """
    c = eqs.chart
    if (c.n, c.N) != (2, 1):
        raise NonHyperbolicSplit("the solver handles one scalar field in 1+1 dimensions")
    bindings, parameters = dict(bindings or {}), dict(parameters or {})
    s = eqs.section
    x0, x1 = c.x
    phi, p0, p1 = s.phi[0], s.pi[0][0], s.pi[1][0]
    sol = solve_momenta(eqs)

    Phi, Dt, Dx = sp.Symbol("Phi"), sp.Dummy("phi_t"), sp.Dummy("phi_x")
    k0, rest = _linear_part(sol[p0], {sp.Derivative(phi, x0): Dt, sp.Derivative(phi, x1): Dx})
    if k0[sp.Derivative(phi, x1)] != 0 or rest != 0:
        raise NonHyperbolicSplit("the time momentum is not proportional to d_0 phi")
    c0 = k0[sp.Derivative(phi, x0)]
    k1, rest = _linear_part(sol[p1], {sp.Derivative(phi, x0): Dt, sp.Derivative(phi, x1): Dx})
    if k1[sp.Derivative(phi, x0)] != 0 or rest != 0:
        raise NonHyperbolicSplit("the space momentum is not proportional to d_1 phi")
    c1 = k1[sp.Derivative(phi, x1)]

    atoms = {sp.Derivative(p0, x0): sp.Dummy("a"), sp.Derivative(p1, x1): sp.Dummy("b"),
             p0: sp.Dummy("c"), p1: sp.Dummy("d")}
    k, f = _linear_part(eqs.divergence[0], atoms)
    a0, a1 = k[sp.Derivative(p0, x0)], k[sp.Derivative(p1, x1)]
    h0, h1 = k[p0], k[p1]
    if a0 == 0 or not (canonical(a1 - a0) == 0 and h0 == 0):
        raise NonHyperbolicSplit("the divergence equation is not of the form d_0 pi^0 + (1/w) d_1(w pi^1) + f")

    def numeric(e):
        e = bind(canonical(e), c, bindings, parameters)
        e = sp.simplify(e.xreplace({phi: Phi}))
        if e.has(x0):
            raise NonHyperbolicSplit("coefficients depend on x0; only static backgrounds are supported")
        if e.free_symbols - {x1, Phi}:
            raise NonHyperbolicSplit(f"unbound symbols {sorted(map(str, e.free_symbols - {x1, Phi}))}")
        if e.atoms(sp.Derivative) or any(isinstance(a.func, sp.core.function.UndefinedFunction)
                                         for a in e.atoms(sp.Function)):
            raise NonHyperbolicSplit("unbound functions remain after binding")
        return e

    c0n, c1n, hn, fn = (numeric(e) for e in (c0, c1, h1 / a0, f / a0))
    if c0n.has(Phi) or c1n.has(Phi) or hn.has(Phi):
        raise NonHyperbolicSplit("kinetic coefficients depend on the field")
    w = sp.Integer(1) if hn == 0 else sp.simplify(sp.exp(sp.integrate(hn, x1)))
    if sp.simplify(sp.diff(w, x1) - hn * w) != 0:
        raise NonHyperbolicSplit("connection terms are not a logarithmic derivative")
    U = sp.integrate(fn, Phi)
    return EvolutionRule(c0n, c1n, w, fn, U, x1, Phi, sol, eqs, bindings, parameters)


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------

def step(state: GridState, rule: EvolutionRule, dt: float) -> GridState:
    """One kick-drift-kick leapfrog step."""
    L = state.length
    pi_half = state.pi + 0.5 * dt * rule.acceleration(state.phi, L)
    phi = state.phi + dt * rule.velocity(pi_half, L)
    pi = pi_half + 0.5 * dt * rule.acceleration(phi, L)
    return GridState(phi, pi, state.t + dt, state.step + 1, L)


def diagnostics(state: GridState, rule: EvolutionRule, dt: float) -> dict:
    dx = state.dx
    return {
        "step": state.step,
        "t": state.t,
        "energy": rule.energy(state, dt),
        "l2_phi": float(np.sqrt(dx * np.sum(state.phi ** 2))),
        "l2_pi": float(np.sqrt(dx * np.sum(state.pi ** 2))),
        "momentum": float(dx * np.sum(state.pi * (np.roll(state.phi, -1) - np.roll(state.phi, 1)) / (2 * dx))),
    }


def run(state: GridState, rule: EvolutionRule, config: SolverConfig,
        record: Optional[Callable[[GridState], None]] = None) -> tuple:
    """Advance ``config.steps`` steps; return the final state and diagnostic records."""
    records = [diagnostics(state, rule, config.dt)]
    if record:
        record(state)
    for _ in range(config.steps):
        state = step(state, rule, config.dt)
        if state.step % config.cadence == 0 or state.step == config.steps:
            records.append(diagnostics(state, rule, config.dt))
            if record:
                record(state)
    return state, records


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------

def mode_state(M: int, k: int = 1, length: float = 2 * math.pi, amplitude: float = 1.0) -> GridState:
    """phi = A cos(k x), pi = 0."""
    x = np.arange(M) * (length / M)
    return GridState(amplitude * np.cos(2 * math.pi * k * x / length), np.zeros(M), length=length)


def measure_frequency(rule: EvolutionRule, M: int = 256, k: int = 1, cfl: float = 0.5,
                      steps: int = 1000, length: float = 2 * math.pi) -> float:
    """Angular frequency of a single Fourier mode from its projection history.

    A mode amplitude A_n of a linear leapfrog run obeys
    A_{n+1} + A_{n-1} = 2 cos(omega dt) A_n, so cos(omega dt) is the
    least-squares ratio of the two sides.
    """
    state = mode_state(M, k, length)
    dt = cfl * state.dx
    basis = np.cos(2 * math.pi * k * state.x / length)
    amps = [float(state.phi @ basis)]
    for _ in range(steps):
        state = step(state, rule, dt)
        amps.append(float(state.phi @ basis))
    A = np.array(amps)
    ratio = np.dot(A[1:-1], A[2:] + A[:-2]) / (2 * np.dot(A[1:-1], A[1:-1]))
    return math.acos(max(-1.0, min(1.0, ratio))) / dt


def energy_drift(rule: EvolutionRule, M: int = 256, k: int = 1, cfl: float = 0.5,
                 steps: int = 1000, staggered: bool = True) -> float:
    """max_n |E_n - E_0| / |E_0| over a single-mode run."""
    state = mode_state(M, k)
    dt = cfl * state.dx
    energy = (lambda s: rule.energy(s, dt)) if staggered else rule.collocated_energy
    E0 = energy(state)
    worst = 0.0
    for _ in range(steps):
        state = step(state, rule, dt)
        worst = max(worst, abs(energy(state) - E0))
    return worst / abs(E0)


def flat_mass(rule: EvolutionRule) -> float:
    """m for a rule of the flat form phi_tt = phi_xx - m^2 phi; ValueError otherwise."""
    flat = rule.c0 == 1 and rule.c1 == -1 and rule.w == 1
    m2 = sp.diff(rule.force, rule.phi)
    if not flat or sp.diff(m2, rule.phi) != 0 or m2.free_symbols or rule.force.subs(rule.phi, 0) != 0:
        raise ValueError("the plane-wave oracle needs the flat Klein-Gordon form")
    return math.sqrt(float(m2))


def plane_wave_error(rule: EvolutionRule, M: int, k: int = 1, T: float = math.pi / 2,
                     cfl: float = 0.5) -> float:
    """Max error against cos(k x) cos(omega t), omega^2 = k^2 + m^2."""
    omega = math.sqrt(k * k + flat_mass(rule) ** 2)
    state = mode_state(M, k)
    steps = int(round(T / (cfl * state.dx)))
    dt = T / steps
    for _ in range(steps):
        state = step(state, rule, dt)
    exact = np.cos(k * state.x) * math.cos(omega * T)
    return float(np.max(np.abs(state.phi - exact)))


def observed_orders(errors) -> list:
    return [math.log2(a / b) for a, b in zip(errors, errors[1:])]


def convergence_study(rule: EvolutionRule, Ms=(128, 256, 512), k: int = 1,
                      T: float = math.pi / 2, cfl: float = 0.5) -> tuple:
    errors = [plane_wave_error(rule, M, k, T, cfl) for M in Ms]
    return errors, observed_orders(errors)


def _fd_bindings(rule: EvolutionRule, states, dt: float) -> dict:
    """Finite-difference values for the section atoms at the middle state."""
    eqs = rule.equations
    s, (x0, x1) = eqs.section, eqs.chart.x
    prev, mid, nxt = states
    L = mid.length
    dx = mid.dx

    def ddx(a):
        return (np.roll(a, -1) - np.roll(a, 1)) / (2 * dx)

    phi, p0, p1 = s.phi[0], s.pi[0][0], s.pi[1][0]
    pi1 = rule.pi1(mid.phi, L)
    return {
        sp.Derivative(phi, x0): (nxt.phi - prev.phi) / (2 * dt),
        sp.Derivative(phi, x1): ddx(mid.phi),
        sp.Derivative(p0, x0): (nxt.pi - prev.pi) / (2 * dt),
        sp.Derivative(p0, x1): ddx(mid.pi),
        sp.Derivative(p1, x1): ddx(pi1),
        phi: mid.phi, p0: mid.pi, p1: pi1,
    }


def residual_norms(rule: EvolutionRule, states, dt: float) -> list:
    """L2 norms of the first-order residuals evaluated by finite differences."""
    eqs = rule.equations
    values = _fd_bindings(rule, states, dt)
    dummies = {atom: sp.Dummy(f"u{k}") for k, atom in enumerate(values)}
    x1 = eqs.chart.x[1]
    mid = states[1]
    out = []
    for r in eqs.residuals():
        e = bind(r, eqs.chart, rule.bindings, rule.parameters)
        e = e.xreplace(dummies)
        if e.free_symbols - set(dummies.values()) - {x1}:
            raise NonHyperbolicSplit(f"residual has unbound symbols {e.free_symbols}")
        fn = sp.lambdify([x1] + list(dummies.values()), e, "numpy")
        val = np.broadcast_to(np.asarray(fn(mid.x, *values.values()), dtype=float), mid.phi.shape)
        out.append(float(np.sqrt(mid.dx * np.sum(val ** 2))))
    return out


def residual_study(rule: EvolutionRule, Ms=(128, 256, 512), T: float = 1.0, cfl: float = 0.5,
                   k: int = 1) -> tuple:
    """Residual norms at time T for each resolution and the observed orders."""
    norms = []
    for M in Ms:
        state = mode_state(M, k)
        steps = int(round(T / (cfl * state.dx)))
        dt = T / steps
        prev = None
        for _ in range(steps):
            prev, state = state, step(state, rule, dt)
        nxt = step(state, rule, dt)
        norms.append(max(residual_norms(rule, (prev, state, nxt), dt)))
    return norms, observed_orders(norms)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

CSV_COLUMNS = ("step", "t", "energy", "l2_phi", "l2_pi")


def write_series(path: Path, records) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for r in records:
            w.writerow([r["step"]] + [repr(float(r[c])) for c in CSV_COLUMNS[1:]])


def write_snapshots(path: Path, snapshots) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("step", "t", "j", "x", "phi", "pi"))
        for s in snapshots:
            for j in range(s.M):
                w.writerow([s.step, repr(s.t), j, repr(float(s.x[j])),
                            repr(float(s.phi[j])), repr(float(s.pi[j]))])


def content_hash(*blobs: bytes) -> str:
    h = hashlib.sha256()
    for b in blobs:
        h.update(b)
    return h.hexdigest()
