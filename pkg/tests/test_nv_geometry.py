import math

import numpy as np
import pytest

from magnetometro_nv.constantes import CONSTANTES, TETRAHEDRAL_ANGLE
from magnetometro_nv.errores import ErrorDominio
from magnetometro_nv.nv_geometry import (BiasField, NvAxes, bias_for_projection, project_field,
                                         sensing_projection, two_axis_angle_factor,
                                         zeeman_resonance)
from magnetometro_nv.sensor_chain import AP_DIRECTION


@pytest.fixture
def ejes():
    return NvAxes.standard()


def test_ejes_estandar_tetraedricos(ejes):
    productos = ejes.axes @ ejes.axes.T
    assert np.allclose(np.diag(productos), 1.0, atol=1e-12)
    assert np.allclose(productos[~np.eye(4, dtype=bool)], -1 / 3, atol=1e-12)


def test_ejes_sensores_perpendiculares_al_axon(ejes):
    e1, e2 = ejes.sensing
    assert e1[1] == pytest.approx(0.0, abs=1e-12)
    assert e2[1] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("ejes_malos", [
    np.eye(3),
    np.array([[1.0, 0, 0], [0, 1.0, 0], [0, 0, 1.0], [1.0, 0, 0]]),
    2 * NvAxes.standard().axes,
])
def test_ejes_invalidos(ejes_malos):
    with pytest.raises(ErrorDominio):
        NvAxes(ejes_malos)


def test_proyeccion_campo_nulo(ejes):
    assert np.array_equal(project_field([0.0, 0.0, 0.0], ejes), np.zeros(4))


def test_proyeccion_sobre_un_eje(ejes):
    proyecciones = project_field(ejes.axes[0], ejes)
    assert proyecciones == pytest.approx([1.0, -1 / 3, -1 / 3, -1 / 3], abs=1e-12)


def test_proyecciones_suman_cero_y_son_lineales(ejes, rng):
    for _ in range(10):
        b, c = rng.normal(size=3), rng.normal(size=3)
        assert np.sum(project_field(b, ejes)) == pytest.approx(0.0, abs=1e-12)
        assert project_field(2 * b + c, ejes) == pytest.approx(
            2 * project_field(b, ejes) + project_field(c, ejes), abs=1e-12)


def test_campo_del_ap_igual_en_los_ejes_sensores(ejes):
    p = project_field(AP_DIRECTION, ejes)
    assert abs(p[0]) == pytest.approx(abs(p[1]), abs=1e-12)
    assert abs(p[0]) == pytest.approx(0.8165, abs=1e-4)
    assert p[2:] == pytest.approx([0.0, 0.0], abs=1e-12)


def test_vector_invalido(ejes):
    with pytest.raises(ErrorDominio):
        project_field([1.0, 2.0], ejes)
    with pytest.raises(ErrorDominio):
        project_field([1.0, float("nan"), 0.0], ejes)


def test_factor_angular():
    assert two_axis_angle_factor() == pytest.approx(0.8165, abs=1e-4)
    assert math.degrees(TETRAHEDRAL_ANGLE) == pytest.approx(109.4712, abs=1e-4)


def test_zeeman():
    assert zeeman_resonance(0.0) == pytest.approx(CONSTANTES.omega_zfs)
    assert zeeman_resonance(7e-4) / (2 * math.pi) == pytest.approx(2.8896e9, abs=1e5)
    arriba = zeeman_resonance(1e-3, +1) - CONSTANTES.omega_zfs
    abajo = zeeman_resonance(1e-3, -1) - CONSTANTES.omega_zfs
    assert arriba == pytest.approx(-abajo)


@pytest.mark.parametrize("b", [0.01, -0.02, float("inf")])
def test_zeeman_fuera_de_regimen(b):
    with pytest.raises(ErrorDominio):
        zeeman_resonance(b)


def test_zeeman_rama_invalida():
    with pytest.raises(ErrorDominio):
        zeeman_resonance(1e-4, 0)


def test_sesgo_por_la_bisectriz(ejes):
    sesgo = bias_for_projection(7e-4, ejes)
    p = project_field(sesgo.vector, ejes)
    assert abs(p[0]) == pytest.approx(7e-4, rel=1e-12)
    assert abs(p[1]) == pytest.approx(7e-4, rel=1e-12)
    assert p[2:] == pytest.approx([0.0, 0.0], abs=1e-15)


def test_proyeccion_sensada_cambia_de_signo_con_el_sesgo(ejes):
    sesgo = bias_for_projection(axes=ejes)
    directa = sensing_projection(AP_DIRECTION, ejes, sesgo)
    invertida = sensing_projection(AP_DIRECTION, ejes, sesgo.reversed())
    assert directa == pytest.approx(0.8165, abs=1e-4)
    assert invertida == -directa


def test_sesgo_invalido():
    with pytest.raises(ErrorDominio):
        BiasField([0.0, 1.0])
