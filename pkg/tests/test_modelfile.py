import pytest
import sympy as sp

from covham.dynamics import derive_projection_equations, legendre_transform
from covham.geometry import MetricField
from covham.kernel import is_zero
from covham.modelfile import (DualDefinitionError, IndexShapeError, ModelError, ModelSyntaxError,
                              UndeclaredName, bundled_models, model_path, parse_model,
                              parse_model_text)
from covham.scenarios import kg_lagrangian

KG2 = """\
[chart]
n = 2
N = 1
parameters = m

[lagrangian]
L = 1/2*(dphi0_0^2 - dphi0_1^2) - 1/2*m^2*phi0^2
"""


def test_kg_flat_model():
    model = parse_model("kg_flat")
    c = model.chart
    assert (c.n, c.N) == (4, 1) and model.route == "projection"
    H = model.hamiltonian_model()
    ref = legendre_transform(kg_lagrangian(c, MetricField.minkowski(4, c.x)))
    assert is_zero(H.H - ref.H)


@pytest.mark.parametrize("name", bundled_models())
def test_bundled_models_parse(name):
    model = parse_model(name)
    assert model.chart.n >= 2
    assert (model.lagrangian is None) != (model.hamiltonian is None)
    assert len(model.digest) == 64


def test_model_path_resolution(tmp_path):
    p = tmp_path / "m.model"
    p.write_text(KG2)
    assert parse_model(p).chart.n == 2
    assert model_path("kg_flat").name == "kg_flat.model"
    with pytest.raises(FileNotFoundError):
        model_path("no_such_model")


def test_comments_and_blank_lines():
    text = "# heading\n\n" + KG2.replace("N = 1", "N = 1   # one field")
    assert parse_model_text(text).chart.N == 1


def test_lagrangian_and_hamiltonian_together():
    text = KG2 + "\n[hamiltonian]\nH = pi^0_0^2\n"
    with pytest.raises(DualDefinitionError) as err:
        parse_model_text(text)
    assert err.value.line == 10


def test_projection_with_named_connection():
    text = KG2 + "\n[metric]\nmetric = minkowski\n[connection]\nmode = levi-civita\n[projection]\nV^0_0 = x1\n"
    with pytest.raises(DualDefinitionError):
        parse_model_text(text)


def test_metric_by_name_and_components():
    text = KG2 + "\n[metric]\nmetric = minkowski\ng_00 = 1\n"
    with pytest.raises(DualDefinitionError):
        parse_model_text(text)


def test_undeclared_symbol_location():
    text = KG2.replace("- 1/2*m^2*phi0^2", "- 1/2*q*phi0^2")
    with pytest.raises(UndeclaredName) as err:
        parse_model_text(text, "kg.model")
    e = err.value
    col = text.splitlines()[6].index("q") + 1
    assert e.name == "q" and (e.line, e.col) == (7, col)
    assert str(e) == f"kg.model:7:{col}: undeclared symbol q"


def test_expression_syntax_error_location():
    text = KG2.replace("L = 1/2*(dphi0_0^2", "L = 1/2*(dphi0_0^^2")
    with pytest.raises(ModelSyntaxError) as err:
        parse_model_text(text)
    assert err.value.line == 7 and err.value.col > 4


@pytest.mark.parametrize("text, line", [
    ("[chart]\nn = 2\n[sideways]\n", 3),
    ("n = 2\n", 1),
    ("[chart]\nn 2\n", 2),
    ("[chart]\nn = 2\nn = 3\n", 3),
    ("[chart]\nn =\n", 2),
    ("[chart]\n[chart]\n", 2),
])
def test_file_syntax_errors(text, line):
    with pytest.raises(ModelSyntaxError) as err:
        parse_model_text(text)
    assert err.value.line == line


def test_index_shape_errors():
    with pytest.raises(IndexShapeError):
        parse_model_text(KG2 + "\n[projection]\nV^1_0 = x0\n")
    with pytest.raises(IndexShapeError):
        parse_model_text(KG2 + "\n[metric]\ng_00 = 1\ng_11 = -1\ng_22 = -1\n")
    with pytest.raises(IndexShapeError):
        parse_model_text(KG2.replace("parameters = m", "parameters = m\nfunctions = a(x1)")
                         + "\n[solve]\na(x0) = 1\n")


def test_missing_pieces():
    with pytest.raises(ModelError):
        parse_model_text("[lagrangian]\nL = 1\n")
    with pytest.raises(ModelError):
        parse_model_text("[chart]\nn = 2\nN = 1\n")
    with pytest.raises(ModelError):
        parse_model_text(KG2 + "\n[metric]\ng_00 = 1\n")
    with pytest.raises(ModelError):
        parse_model_text(KG2.replace("L = 1/2", "mode = volume-form\nL = 1/2"))


def test_projection_section_builds_the_modified_equations():
    model = parse_model_text(KG2 + "\n[projection]\nV^0_1 = x0^2\nW^0_0_0 = 3*x1\n")
    V = model.projection
    assert V.field[0][1] == model.chart.x[0] ** 2
    assert V.momentum_or_zero()[0][0][0] == 3 * model.chart.x[1]
    eqs = model.field_equations()
    ref = derive_projection_equations(model.hamiltonian_model(), V, eqs.section)
    assert all(is_zero(a - b) for a, b in zip(eqs.residuals(), ref.residuals()))


def test_projection_rejects_momenta():
    with pytest.raises(ModelError):
        parse_model_text(KG2 + "\n[projection]\nV^0_0 = pi^0_0\n")


def test_explicit_zero_connection_matches_flat_projection():
    conn = parse_model_text(KG2 + "\n[connection]\nmode = explicit\nGamma^0_0_0 = 0\n")
    flat = parse_model_text(KG2)
    a, b = conn.field_equations(), flat.field_equations()
    assert conn.route == "connection"
    assert all(is_zero(x - y) for x, y in zip(a.residuals(), b.residuals()))


def test_explicit_gamma_must_be_base_only():
    with pytest.raises(ModelError):
        parse_model_text(KG2 + "\n[connection]\nmode = explicit\nGamma^0_0_0 = phi0\n")


def test_solve_section():
    text = KG2.replace("parameters = m", "parameters = m\nfunctions = a(x1)") + \
        "\n[solve]\nm = 1/2\na(x1) = 1 + sin(x1)/5\nM = 64\ninit_phi = cos(x1)\n"
    model = parse_model_text(text)
    assert model.parameter_values == {"m": sp.Rational(1, 2)}
    assert model.solve["M"] == 64 and model.solve["steps"] == 1000
    x1 = model.chart.x[1]
    assert model.bindings["a"] == 1 + sp.sin(x1) / 5
    with pytest.raises(UndeclaredName):
        parse_model_text(KG2 + "\n[solve]\nb(x1) = 1\n")
    with pytest.raises(ModelError):
        parse_model_text(KG2 + "\n[solve]\ncfl = -1\n")
    with pytest.raises(ModelSyntaxError):
        parse_model_text(KG2 + "\n[solve]\nsteps = many\n")


def test_helpers_and_sources():
    model = parse_model("maxwell_flat")
    assert model.chart.field == "covector" and model.hamiltonian_model().constraint is not None
