import logging
import math

import numpy as np
import pytest

from conftest import traza
from magnetometro_nv import sensor_chain as sc
from magnetometro_nv.errores import ErrorDatos, ErrorDominio, ErrorSingular, ErrorUnidades
from magnetometro_nv.nv_geometry import bias_for_projection
from magnetometro_nv.trazas import TimeTrace


# --- calibración -----------------------------------------------------------

def test_constante_de_calibracion_inversa_a_la_pendiente():
    c = sc.calibration_constant(2e-3)
    assert sc.calibration_constant(4e-3) == pytest.approx(c / 2)
    assert sc.calibration_constant(-2e-3) == pytest.approx(-c)


def test_calibracion_pendiente_nula():
    with pytest.raises(ErrorSingular):
        sc.calibration_constant(0.0)


def test_calibracion_incluye_el_factor_angular():
    pendiente = 2e-3
    sin_factor = sc.H / (pendiente * sc.G_E_MU_B)
    assert sc.calibration_constant(pendiente) / sin_factor == pytest.approx(1 / 0.8165, rel=1e-4)


def test_calibrar_invierte_la_ganancia():
    assert sc.calibrate() * sc.chain_gain() == pytest.approx(1.0, rel=1e-9)


def test_ganancia_de_la_cadena():
    assert sc.chain_gain() * 1e-9 == pytest.approx(-2.76e-3, rel=0.01)


def test_ganancia_sigue_a_la_frecuencia_de_modulacion():
    base = sc.chain_gain()
    rapida = sc.chain_gain(cfg=sc.LockInConfig(f_mod=60e3))
    assert rapida / base == pytest.approx(1.6 / 2.56)
    assert abs(sc.chain_gain(cfg=sc.LockInConfig(f_mod=9e3))) > abs(base)
    cfg = sc.LockInConfig(f_mod=60e3)
    assert sc.calibrate(cfg=cfg) * sc.chain_gain(cfg=cfg) == pytest.approx(1.0, rel=1e-9)
    assert sc.fractional_lif_change(3e-9, cfg=cfg) / sc.fractional_lif_change(3e-9) == \
        pytest.approx(1.6 / 2.56)


def test_penalizacion_de_modulacion_fija():
    fija = sc.NoiseBudget(p_mod=1.6)
    assert sc.chain_gain(cfg=sc.LockInConfig(f_mod=60e3), noise=fija) == pytest.approx(sc.chain_gain())
    assert fija.penalty_product == pytest.approx(sc.NoiseBudget().penalty_product)
    with pytest.raises(ErrorDominio):
        sc.NoiseBudget(p_mod=0.5)


def test_campo_de_la_bobina():
    assert sc.coil_field(7, 0.044 / 50, 0.0235, 0.103) == pytest.approx(1.8e-9, rel=0.02)
    assert sc.coil_field(1, 1.0, 0.1, 0.0) == pytest.approx(sc.MU0 / 0.2)
    assert sc.coil_field(10, 2e-3, 0.01, 0.05) == pytest.approx(2 * sc.coil_field(10, 1e-3, 0.01, 0.05))


def test_bobina_invalida():
    with pytest.raises(ErrorDominio):
        sc.coil_field(1, 1.0, 0.0, 0.1)
    with pytest.raises(ErrorDominio):
        sc.coil_field(1, 1.0, 0.1, -0.1)


def test_cambio_fraccional_de_fluorescencia():
    assert sc.fractional_lif_change(3e-9) == pytest.approx(1.4e-6, rel=0.25)
    assert sc.fractional_lif_change(6e-9) == pytest.approx(2 * sc.fractional_lif_change(3e-9))


def test_volts_a_campo_exige_voltios():
    with pytest.raises(ErrorUnidades):
        sc.volts_to_field(traza([1.0, 2.0]), 1.0)


# --- filtro del lock-in ----------------------------------------------------

def test_enbw_y_corte_de_la_cascada():
    assert sc.enbw_cascade(30e-6, 4) == pytest.approx(5 / (64 * 30e-6), rel=1e-12)
    assert sc.enbw_cascade(1e-3, 1) == pytest.approx(1 / 4e-3, rel=1e-12)
    assert sc.cutoff_cascade(1e-3, 1) == pytest.approx(1 / (2 * math.pi * 1e-3))


def test_configuracion_por_defecto_reproduce_el_ancho_medido(lockin):
    assert lockin.enbw == pytest.approx(4000.0, rel=1e-12)
    assert lockin.tau_effective == pytest.approx(19.53e-6, rel=1e-3)
    assert lockin.cutoff == pytest.approx(3600.0, rel=0.3)


def test_sin_ancho_medido_usa_tau_nominal(lockin):
    nominal = lockin.replace(f_enbw_measured=None)
    assert nominal.tau_effective == nominal.tau_lia
    assert nominal.enbw == pytest.approx(2604.2, rel=1e-3)


@pytest.mark.parametrize("cambios", [
    {"tau_lia": 0.0},
    {"rolloff_stages": 5},
    {"expand": 0.5},
    {"slope_sign": 0},
    {"gain": -1.0},
    {"f_enbw_measured": 0.0},
])
def test_lock_in_invalido(cambios):
    with pytest.raises(ErrorDominio):
        sc.LockInConfig(**cambios)


def test_enbw_digital_cerca_del_analitico(lockin):
    assert sc.digital_enbw(lockin, 250e3) == pytest.approx(lockin.enbw, rel=0.05)


def test_filtro_conserva_la_continua(lockin):
    constante = traza(np.full(2000, 0.5), unidad="volts")
    salida = sc.filter_cascade(constante, lockin)
    assert np.allclose(salida.samples, 0.5, rtol=0, atol=1e-12)


def test_tiempo_de_subida_un_polo():
    cfg = sc.LockInConfig(tau_lia=10e-6, rolloff_stages=1, f_enbw_measured=None)
    escalon = traza(np.r_[np.zeros(2000), np.ones(2000)], fs=2e6, unidad="volts")
    subida = sc.rise_time_10_90(sc.filter_cascade(escalon, cfg))
    assert subida == pytest.approx(math.log(9) * 10e-6, rel=0.03)


def test_tiempo_de_subida_con_el_pasa_bajos_de_salida():
    cfg = sc.LockInConfig(tau_lia=10e-6, rolloff_stages=1, f_enbw_measured=None)
    escalon = traza(np.r_[np.zeros(2000), np.ones(2000)], fs=2e6, unidad="volts")
    subida = sc.rise_time_10_90(sc.fft_lowpass(sc.filter_cascade(escalon, cfg), 45e3))
    assert subida == pytest.approx(32e-6, rel=0.4)


def test_tiempo_de_subida_sin_escalon():
    with pytest.raises(ErrorSingular):
        sc.rise_time_10_90(traza(np.ones(100), unidad="volts"))


# --- digitalización --------------------------------------------------------

def test_digitalizador_cuantiza_y_recorta(caplog):
    dig = sc.DigitizerConfig()
    v = traza([0.0, dig.lsb * 0.4, dig.lsb * 0.6, 3.0, -3.0], unidad="volts")
    with caplog.at_level(logging.WARNING):
        salida = sc.digitize(v, dig)
    assert salida.samples == pytest.approx([0.0, 0.0, dig.lsb, 2.0, -2.0])
    assert "recorta" in caplog.text


def test_digitalizador_invalido():
    with pytest.raises(ErrorDominio):
        sc.DigitizerConfig(bits=0)


# --- modelo directo --------------------------------------------------------

def test_campo_estatico_sin_ruido_se_recupera():
    campo = traza(np.full(5000, 3e-9))
    v = sc.synthesize_measurement(campo, with_noise=False)
    recuperado = sc.volts_to_field(v, sc.calibrate())
    assert np.mean(recuperado.samples) == pytest.approx(3e-9, rel=0.01)


def test_senoide_de_250_hz_sin_ruido():
    campo = sc.sine_test_field(1e-9, 250.0, 0.1)
    v = sc.synthesize_measurement(campo, with_noise=False)
    recuperado = sc.volts_to_field(v, sc.calibrate()).samples
    amplitud = math.sqrt(2) * np.sqrt(np.mean(recuperado ** 2))
    assert amplitud == pytest.approx(1e-9, rel=0.05)


def test_onda_cuadrada_de_la_bobina_se_recupera():
    b_test = sc.coil_field(7, 0.044 / 50, 0.0235, 0.103)
    campo = sc.square_test_field(b_test, 100.0, 0.05)
    v = sc.synthesize_measurement(campo, with_noise=False)
    recuperado = sc.volts_to_field(v, sc.calibrate()).samples
    arriba = np.median(recuperado[campo.samples > 0])
    abajo = np.median(recuperado[campo.samples < 0])
    assert arriba == pytest.approx(1.8e-9, rel=0.05)
    assert abajo == pytest.approx(-1.8e-9, rel=0.05)


def test_ruido_rms_igual_a_eta_por_raiz_del_enbw():
    cero = traza(np.zeros(250_000))
    v = sc.synthesize_measurement(cero, seed=3)
    campo = sc.volts_to_field(v, sc.calibrate())
    assert np.std(campo.samples) == pytest.approx(15e-12 * math.sqrt(4000.0), rel=0.1)


def test_misma_semilla_misma_salida():
    campo = traza(np.zeros(3000))
    a = sc.synthesize_measurement(campo, seed=11)
    b = sc.synthesize_measurement(campo, seed=11)
    c = sc.synthesize_measurement(campo, seed=12)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


def test_modelo_directo_exige_tesla():
    with pytest.raises(ErrorUnidades):
        sc.synthesize_measurement(traza(np.zeros(10), unidad="volts"))


def test_inversiones_exactas(lockin):
    campo = sc.sine_test_field(2e-9, 300.0, 0.02)
    base = sc.synthesize_measurement(campo, cfg=lockin, with_noise=False).samples
    pendiente = sc.synthesize_measurement(campo, cfg=lockin.replace(slope_sign=-1),
                                          with_noise=False).samples
    fase = sc.synthesize_measurement(campo, cfg=lockin.replace(phase_deg=180.0),
                                     with_noise=False).samples
    sesgo = sc.synthesize_measurement(campo, cfg=lockin, bias=bias_for_projection().reversed(),
                                      with_noise=False).samples
    assert np.array_equal(pendiente, -base)
    assert np.array_equal(fase, -base)
    assert np.array_equal(sesgo, -base)


def test_promediar_reduce_el_ruido_como_raiz_de_n():
    from magnetometro_nv.analysis import averaging_exponent
    cero = traza(np.zeros(10_000))
    c_lia = sc.calibrate()
    semillas = np.random.SeedSequence(5).spawn(1000)
    ensayos = [sc.volts_to_field(sc.synthesize_measurement(cero, seed=s), c_lia) for s in semillas]
    k = averaging_exponent(ensayos, [1, 10, 100, 1000])
    assert k == pytest.approx(-0.5, abs=0.05)


# --- presupuestos de sensibilidad -------------------------------------------

def test_cadena_del_presupuesto(ruido):
    shot, cw, completo = sc.noise_budget_chain(ruido)
    assert shot == pytest.approx(2.9e-12, rel=0.05)
    assert cw == pytest.approx(4.9e-12, rel=0.05)
    assert completo == pytest.approx(17e-12, rel=0.05)
    assert completo / shot == pytest.approx(ruido.penalty_product)


def test_tasa_de_fotones_inconsistente():
    with pytest.raises(ErrorDominio):
        sc.NoiseBudget(photon_rate=1e15)


def test_penalizacion_menor_que_uno():
    with pytest.raises(ErrorDominio):
        sc.NoiseBudget(p_amp=0.9)


def test_eta_cae_al_presupuesto_sin_medida():
    teorico = sc.NoiseBudget(eta_measured=None)
    assert teorico.eta == pytest.approx(sc.noise_budget_chain(teorico)[2])


def test_limite_de_proyeccion_de_espin():
    eta_q = sc.spin_projection_limit(8e11, 450e-9)
    assert eta_q == pytest.approx(9.5e-15, rel=0.1)
    assert sc.spin_projection_limit(3.2e12, 450e-9) == pytest.approx(eta_q / 2)
    assert 1e3 < 15e-12 / eta_q < 3e3


def test_ramsey():
    mejora = sc.ramsey_improvement()
    assert 2.5 < mejora < 10
    corto = sc.ramsey_sensitivity(1e-6, 1e-6, 400e-9, 0.095, 8e16)
    largo = sc.ramsey_sensitivity(1e-6, 4e-6, 400e-9, 0.095, 8e16)
    assert largo < corto
    assert sc.ramsey_sensitivity(1e-6, 450e-9, 400e-9, 0.0475, 8e16) == pytest.approx(
        2 * sc.ramsey_sensitivity(1e-6, 450e-9, 400e-9, 0.095, 8e16))


def test_mejora_con_t2_estrella_largo():
    assert sc.t2_star_gain() == pytest.approx(16.7, rel=0.1)


def test_penalizacion_por_modulacion(caplog):
    assert sc.modulation_penalty(0.0) == 1.0
    assert sc.modulation_penalty(18e3) == pytest.approx(1.6)
    assert 1.0 < sc.modulation_penalty(9e3) < 1.6
    with caplog.at_level(logging.WARNING):
        assert sc.modulation_penalty(80e3) == pytest.approx(2.56)
    assert "fuera" in caplog.text


def test_ruido_del_fotodiodo():
    solo_disparo = sc.photodiode_noise_model(0.4, 4000.0, include_amp=False)
    assert solo_disparo == pytest.approx(math.sqrt(2 * sc.Q_E * 0.4 * 50 * 4000.0))
    assert sc.photodiode_noise_model(0.0, 4000.0, include_amp=False) == 0.0
    con_amp = sc.photodiode_noise_model(0.4, 4000.0)
    assert con_amp > solo_disparo
    assert sc.photodiode_noise_model(0.4, 8000.0) == pytest.approx(math.sqrt(2) * con_amp)
    assert sc.amplifier_penalty() == pytest.approx(1.23, abs=0.01)


def test_ajuste_de_la_curva_de_ruido():
    x = np.linspace(0.0, 0.5, 20)
    y = np.sqrt(1e-18 + 4e-17 * x)
    a, b, c = sc.fit_noise_curve(x, y)
    assert c == pytest.approx(2.0, abs=0.1)
    assert b == pytest.approx(4e-17, rel=0.2)


def test_ajuste_con_pocos_puntos():
    with pytest.raises(ErrorDatos):
        sc.fit_noise_curve([0.0, 1.0], [1.0, 2.0])


def test_calentamiento_del_diamante():
    assert sc.diamond_temperature_rise(0.0) == 0.0
    assert sc.diamond_temperature_rise(1.0) == pytest.approx(2.4)
    assert sc.diamond_temperature_rise(4.5) == pytest.approx(10.8)
    with pytest.raises(ErrorDominio):
        sc.diamond_temperature_rise(-1.0)


def test_servo_sin_deriva():
    quieta = TimeTrace(np.zeros(1000), 100.0, "rad_per_s")
    assert np.array_equal(sc.drift_servo(quieta).samples, np.zeros(1000))


def test_servo_con_deriva_lineal():
    fs, tasa = 100.0, 2 * math.pi * 1000
    t = np.arange(int(20 * fs)) / fs
    deriva = TimeTrace(tasa * t, fs, "rad_per_s")
    residuo = sc.drift_servo(deriva, update_rate=0.4).samples
    assert np.max(residuo) == pytest.approx(tasa * (2.5 - 1 / fs), rel=1e-6)
    assert np.min(residuo) == pytest.approx(0.0, abs=1e-6)


def test_servo_exige_radianes():
    with pytest.raises(ErrorUnidades):
        sc.drift_servo(traza(np.zeros(10)))
