import csv
import math

import numpy as np
import pytest

from covham.dynamics import derive_projection_equations, legendre_transform
from covham.geometry import MetricField, VerticalProjection
from covham.modelfile import parse_model
from covham.scenarios import kg_chart, kg_lagrangian
from covham.solver import (CSV_COLUMNS, GridState, NonHyperbolicSplit, SolverConfig,
                           SolverDivergence, compile_evolution, content_hash, convergence_study,
                           energy_drift, flat_mass, measure_frequency, mode_state,
                           plane_wave_error, residual_study, run, step, write_series,
                           write_snapshots)

_RULES = {}


def rule(name, **parameters):
    key = (name, tuple(sorted(parameters.items())))
    if key not in _RULES:
        m = parse_model(name)
        params = dict(m.parameter_values, **parameters)
        _RULES[key] = compile_evolution(m.field_equations(0), m.bindings, params)
    return _RULES[key]


def test_flat_rule_coefficients():
    r = rule("kg_1d_flat")
    assert (r.c0, r.c1, r.w) == (1, -1, 1)
    assert r.force == r.phi and flat_mass(r) == 1.0
    assert flat_mass(rule("kg_1d_flat", m=0)) == 0.0


def test_hamiltonian_and_lagrangian_models_compile_alike():
    a, b = rule("kg_1d_flat"), rule("kg_1d_hamiltonian")
    assert (a.c0, a.c1, a.w, a.force) == (b.c0, b.c1, b.w, b.force)


def test_curved_routes_give_the_same_trajectory():
    r1, r2 = rule("kg_1d_curved"), rule("kg_1d_curved_topform")
    s1 = s2 = mode_state(64)
    dt = 0.5 * s1.dx
    for _ in range(50):
        s1, s2 = step(s1, r1, dt), step(s2, r2, dt)
    assert np.max(np.abs(s1.phi - s2.phi)) < 1e-12


def test_zero_data_stays_zero():
    r = rule("kg_1d_curved")
    s = GridState(np.zeros(32), np.zeros(32))
    for _ in range(10):
        s = step(s, r, 0.05)
    assert not s.phi.any() and not s.pi.any()


def test_constant_field_is_fixed_without_mass():
    r = rule("kg_1d_flat", m=0)
    s = GridState(np.full(32, 0.7), np.zeros(32))
    for _ in range(20):
        s = step(s, r, 0.05)
    assert np.allclose(s.phi, 0.7, atol=1e-15) and np.allclose(s.pi, 0, atol=1e-15)


def test_time_reversal():
    r = rule("kg_1d_curved")
    s0 = mode_state(64, 2)
    s = s0
    dt = 0.5 * s0.dx
    for _ in range(40):
        s = step(s, r, dt)
    back = GridState(s.phi, -s.pi, length=s.length)
    for _ in range(40):
        back = step(back, r, dt)
    assert np.max(np.abs(back.phi - s0.phi)) < 1e-12
    assert np.max(np.abs(back.pi + s0.pi)) < 1e-12


def test_single_step_local_error_is_third_order():
    # one step against a reference of many small steps over the same interval
    r = rule("kg_1d_flat")
    s0 = mode_state(64, 1)
    errs = []
    for dt in (0.04, 0.02):
        ref = s0
        for _ in range(64):
            ref = step(ref, r, dt / 64)
        one = step(s0, r, dt)
        # pi = 0 initially cancels the dt^3 term of phi; the momentum carries it
        errs.append(max(np.max(np.abs(one.phi - ref.phi)), np.max(np.abs(one.pi - ref.pi))))
    assert 2.7 < math.log2(errs[0] / errs[1]) < 3.3


def test_two_half_steps_against_one_step():
    # Richardson comparison: the two integrations differ by O(dt^3) after one step
    r = rule("kg_1d_curved")
    s0 = GridState(np.cos(mode_state(64).x), np.sin(mode_state(64).x))
    diffs = []
    for dt in (0.08, 0.04, 0.02):
        half = step(step(s0, r, dt / 2), r, dt / 2)
        one = step(s0, r, dt)
        diffs.append(max(np.max(np.abs(half.phi - one.phi)), np.max(np.abs(half.pi - one.pi))))
    assert all(2.8 < math.log2(a / b) < 3.2 for a, b in zip(diffs, diffs[1:])), diffs


def test_zero_state_has_zero_energy():
    from covham.solver import diagnostics
    d = diagnostics(GridState(np.zeros(16), np.zeros(16)), rule("kg_1d_curved"), 0.1)
    assert d["energy"] == 0 and d["l2_phi"] == 0 and d["momentum"] == 0


def test_staggered_energy_is_conserved():
    assert energy_drift(rule("kg_1d_flat"), M=128, steps=400) < 1e-12
    assert energy_drift(rule("kg_1d_curved"), M=128, steps=400) < 1e-12


def test_collocated_energy_oscillates_at_second_order():
    r = rule("kg_1d_flat")
    d1 = energy_drift(r, M=64, steps=200, cfl=0.5, staggered=False)
    d2 = energy_drift(r, M=64, steps=400, cfl=0.25, staggered=False)
    assert 3.0 < d1 / d2 < 5.0


def test_massless_frequency_is_wavenumber():
    w = measure_frequency(rule("kg_1d_flat", m=0), M=256, k=3, steps=600)
    assert abs(w - 3) / 3 < 1e-3


def test_frequency_of_a_mode():
    # discrete dispersion (2/dt)^2 sin^2(w dt/2) = (2/dx)^2 sin^2(k dx/2) + m^2 tends to k^2 + m^2
    r = rule("kg_1d_flat")
    w = measure_frequency(r, M=256, k=2, steps=600)
    assert abs(w - math.sqrt(5)) / math.sqrt(5) < 1e-3


def test_plane_wave_convergence():
    errors, orders = convergence_study(rule("kg_1d_flat", m=0), Ms=(64, 128, 256), k=1)
    assert all(1.8 < p < 2.2 for p in orders), orders
    errors, orders = convergence_study(rule("kg_1d_flat"), Ms=(64, 128, 256), k=2)
    assert all(1.8 < p < 2.2 for p in orders), orders


def test_plane_wave_oracle_needs_flat_rule():
    with pytest.raises(ValueError):
        plane_wave_error(rule("kg_1d_curved"), 32)


def test_curved_residuals_converge():
    norms, orders = residual_study(rule("kg_1d_curved"), Ms=(64, 128, 256), T=0.5)
    assert norms[-1] < norms[0] and all(p > 1.8 for p in orders), orders


def test_divergence_is_detected():
    r = rule("kg_1d_flat")
    s = mode_state(32)
    with pytest.raises(SolverDivergence) as err:
        step(GridState(s.phi, np.where(np.arange(32) == 5, np.nan, 0.0)), r, 0.1)
    assert err.value.index == 5
    with pytest.raises(SolverDivergence), np.errstate(over="ignore", invalid="ignore"):
        s = mode_state(32)
        for _ in range(400):
            s = step(s, r, 10.0)


def test_rejects_higher_dimensions():
    c = kg_chart(3)
    H = legendre_transform(kg_lagrangian(c, MetricField.minkowski(3, c.x)))
    with pytest.raises(NonHyperbolicSplit):
        compile_evolution(derive_projection_equations(H, VerticalProjection.zero(c)))


def test_rejects_unbound_functions():
    m = parse_model("kg_1d_curved")
    with pytest.raises(NonHyperbolicSplit):
        compile_evolution(m.field_equations(0), {}, m.parameter_values)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(dt=0, steps=1)
    with pytest.raises(ValueError):
        SolverConfig(dt=0.1, steps=1, scheme="rk4")
    assert SolverConfig(dt=0.1, steps=1).cfl(0.2) == 0.5


def test_run_is_deterministic_and_writes_csv(tmp_path):
    r = rule("kg_1d_curved")
    cfg = SolverConfig(dt=0.05, steps=20, cadence=5)
    outs = []
    for k in range(2):
        snaps = []
        final, records = run(mode_state(32), r, cfg, snaps.append)
        assert [rec["step"] for rec in records] == [0, 5, 10, 15, 20]
        write_series(tmp_path / f"s{k}.csv", records)
        write_snapshots(tmp_path / f"p{k}.csv", snaps)
        outs.append(((tmp_path / f"s{k}.csv").read_bytes(), (tmp_path / f"p{k}.csv").read_bytes()))
    assert outs[0] == outs[1]
    assert content_hash(*outs[0]) == content_hash(*outs[1])
    with open(tmp_path / "s0.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 6
    assert float(rows[-1][1]) == pytest.approx(1.0)
