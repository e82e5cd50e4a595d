import numpy as np
import pytest
from scipy import integrate

from conftest import traza
from magnetometro_nv import neuro_source as ns
from magnetometro_nv.errores import ErrorDatos, ErrorDominio, ErrorSingular, ErrorUnidades


def test_constante_de_escala_del_gusano(axon):
    assert ns.scaling_constant(axon) == pytest.approx(7.6e-12, rel=0.02)
    ejemplo = ns.AxonParams(r_a=200e-6, rho=300e-6, sigma=1.47, v_c=9.0)
    assert ns.scaling_constant(ejemplo) == pytest.approx(13.7e-12, rel=0.02)


def test_constante_de_escala_inversa_a_velocidad_y_distancia(axon):
    s = ns.scaling_constant(axon)
    assert ns.scaling_constant(axon.replace(v_c=2 * axon.v_c)) == pytest.approx(s / 2)
    assert ns.scaling_constant(axon.replace(rho=2 * axon.rho)) == pytest.approx(s / 2)


@pytest.mark.parametrize("cambios", [
    {"r_a": 0.0},
    {"sigma": -1.0},
    {"v_c": 0.0},
    {"rho": 100e-6},
    {"direction": "lateral"},
])
def test_axon_invalido(cambios):
    with pytest.raises(ErrorDominio):
        ns.AxonParams(**cambios)


@pytest.mark.parametrize("cambios", [
    {"resting_potential": 0.01},
    {"peak_amplitude": 0.3},
    {"rise_time": 0.0},
    {"undershoot_fraction": -0.1},
])
def test_plantilla_invalida(cambios):
    with pytest.raises(ErrorDominio):
        ns.ApTemplate(**cambios)


def test_forma_del_pulso(phi_gusano):
    t = ns.WORM_TEMPLATE
    x = phi_gusano.samples
    assert np.max(x) == pytest.approx(t.resting_potential + t.peak_amplitude, abs=1e-9)
    assert x[0] == t.resting_potential
    assert x[-1] == t.resting_potential
    assert np.min(x) >= t.resting_potential - 1e-12


def test_pulso_con_sobretiro():
    phi = ns.synth_ap_waveform(ns.SQUID_TEMPLATE, 250e3, onset=1e-3, total=15e-3)
    assert np.min(phi.samples) < ns.SQUID_TEMPLATE.resting_potential - 0.01
    assert phi.samples[-1] == pytest.approx(ns.SQUID_TEMPLATE.resting_potential, abs=1e-6)


def test_pulso_no_cabe():
    with pytest.raises(ErrorDominio):
        ns.synth_ap_waveform(ns.WORM_TEMPLATE, 250e3, onset=1e-3, total=2e-3)


def test_campo_de_potencial_constante_es_nulo(axon):
    plano = traza(np.full(100, -0.07), unidad="volts_intracellular")
    assert np.array_equal(ns.ap_field_from_voltage(plano, axon).samples, np.zeros(100))


def test_campo_invierte_con_la_direccion(phi_gusano, axon):
    ida = ns.ap_field_from_voltage(phi_gusano, axon)
    vuelta = ns.ap_field_from_voltage(phi_gusano, axon.reversed())
    assert np.array_equal(vuelta.samples, -ida.samples)
    assert ida.unit == "tesla"


def test_campo_lineal_en_el_potencial(phi_gusano, axon):
    b = ns.ap_field_from_voltage(phi_gusano, axon)
    doble = ns.ap_field_from_voltage(phi_gusano.scaled(2.0), axon)
    assert doble.samples == pytest.approx(2 * b.samples, abs=1e-24)


def test_campo_con_pocas_muestras(axon):
    with pytest.raises(ErrorDatos):
        ns.ap_field_from_voltage(traza([0.0, 1.0], unidad="volts_intracellular"), axon)


def test_campo_exige_potencial(axon):
    with pytest.raises(ErrorUnidades):
        ns.ap_field_from_voltage(traza(np.zeros(10)), axon)


def test_campo_bipolar_de_area_nula(phi_gusano, axon):
    b = ns.ap_field_from_voltage(phi_gusano, axon)
    s = ns.scaling_constant(axon)
    area = integrate.trapezoid(b.samples, dx=b.dt)
    assert abs(area) < 1e-3 * s * ns.WORM_TEMPLATE.peak_amplitude
    assert np.max(b.samples) > 0 > np.min(b.samples)
    # el pico de |B| está en la máxima pendiente, no en el pico del AP
    assert np.argmax(np.abs(b.samples)) != np.argmax(phi_gusano.samples)


def test_plantilla_del_gusano_da_4_1_nT(axon):
    plantilla = ns.fit_template_slew(ns.WORM_TEMPLATE, 540.0)
    phi = ns.synth_ap_waveform(plantilla, 250e3, onset=5e-3, total=20e-3)
    assert ns.slew_peak_to_peak(phi) == pytest.approx(540.0, rel=1e-6)
    b = ns.ap_field_from_voltage(phi, axon)
    assert np.ptp(b.samples) == pytest.approx(4.1e-9, rel=0.02)


def test_ajuste_por_pendiente_maxima():
    plantilla = ns.fit_template_slew(ns.WORM_TEMPLATE, 339.0, metric="max")
    assert ns.slew_max(ns.synth_ap_waveform(plantilla)) == pytest.approx(339.0, rel=1e-6)


def test_ajuste_inalcanzable():
    with pytest.raises(ErrorDominio):
        ns.fit_template_slew(ns.WORM_TEMPLATE, 1e9)
    with pytest.raises(ErrorDominio):
        ns.fit_template_slew(ns.WORM_TEMPLATE, 540.0, metric="rms")


def test_asimetria_por_estrechamiento(phi_gusano, axon):
    posterior, anterior = ns.taper_scenario(0.6 * 12.0, 12.0, axon, phi_gusano)
    assert np.ptp(posterior.samples) / np.ptp(anterior.samples) == pytest.approx(1 / 0.6, rel=1e-9)
    distintos = posterior.samples != 0
    assert np.all(np.sign(posterior.samples[distintos]) == -np.sign(anterior.samples[distintos]))


def test_asimetria_en_el_borde_de_la_medida(phi_gusano, axon):
    posterior, anterior = ns.taper_scenario(0.6 * 12.0, 12.0, axon, phi_gusano)
    asimetria = np.ptp(posterior.samples) / np.ptp(anterior.samples) - 1.0
    media, incertidumbre = ns.ASIMETRIA_GUSANO
    assert asimetria == pytest.approx(0.67, abs=0.01)
    assert media < asimetria <= media + incertidumbre


def test_sin_estrechamiento_campos_opuestos(phi_gusano, axon):
    posterior, anterior = ns.taper_scenario(12.0, 12.0, axon, phi_gusano)
    assert np.array_equal(posterior.samples, -anterior.samples)


def test_estrechamiento_al_reves():
    phi = ns.synth_ap_waveform(ns.WORM_TEMPLATE)
    with pytest.raises(ErrorDominio):
        ns.taper_scenario(12.0, 6.0, ns.AxonParams(), phi)


def test_escala_con_la_distancia():
    assert ns.standoff_scaling(0.3e-3, 1.2e-3) == pytest.approx(4.0)
    assert ns.standoff_scaling(1e-3, 1e-3) == 1.0
    with pytest.raises(ErrorDominio):
        ns.standoff_scaling(0.0, 1e-3)


@pytest.mark.parametrize("r_a, esperado", [(1e-6, 0.6e-9), (2e-6, 1.1e-9), (3e-6, 1.7e-9)])
def test_estimacion_purkinje(r_a, esperado):
    assert ns.purkinje_estimate(r_a) == pytest.approx(esperado, rel=0.1)


def test_velocidad_entre_dos_puntos():
    v, direccion = ns.conduction_velocity_two_point(0.0, 1e-3, 9e-3)
    assert v == pytest.approx(9.0)
    assert direccion == "anterograde"
    v, direccion = ns.conduction_velocity_two_point(1e-3, 0.0, 9e-3)
    assert v == pytest.approx(9.0)
    assert direccion == "retrograde"
    with pytest.raises(ErrorSingular):
        ns.conduction_velocity_two_point(1e-3, 1e-3, 9e-3)


def test_direccion_desde_el_primer_lobulo(phi_gusano, axon):
    assert ns.leading_lobe_direction(ns.ap_field_from_voltage(phi_gusano, axon)) == "anterograde"
    retro = ns.ap_field_from_voltage(phi_gusano, axon.reversed())
    assert ns.leading_lobe_direction(retro) == "retrograde"
    with pytest.raises(ErrorSingular):
        ns.leading_lobe_direction(traza(np.zeros(10)))


def test_registro_extracelular(phi_gusano):
    disparo = ns.extracellular_trigger(phi_gusano)
    assert disparo.unit == "volts_extracellular"
    assert np.max(np.abs(disparo.samples)) == pytest.approx(200e-6)
    ruidoso = ns.extracellular_trigger(phi_gusano, noise_rms=10e-6, seed=1)
    assert not np.array_equal(ruidoso.samples, disparo.samples)
