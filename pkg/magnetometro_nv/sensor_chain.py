"""Cadena de medida: transducción, filtro del lock-in, ruido, calibración y presupuestos.

El lock-in se modela después de la demodulación: la señal de dispersión
ideal pasa por una cascada de filtros de un polo. El ruido se inyecta como
ruido blanco gaussiano en unidades de campo, anclado a la sensibilidad
medida; el presupuesto de penalizaciones es un informe analítico paralelo.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import optimize, signal, special

from .constantes import CONSTANTES, G_E_MU_B, H, HBAR, K_B, MU0, Q_E
from .errores import (ErrorDatos, ErrorDominio, ErrorSingular, verificar_finito,
                      verificar_positivo)
from .nv_geometry import BiasField, NvAxes, sensing_projection, two_axis_angle_factor
from .odmr import OdmrParams, small_signal_gain
from .trazas import DEFAULT_SAMPLE_RATE, TimeTrace, resample

logger = logging.getLogger(__name__)

# campo del AP en el plano del diamante, perpendicular al axón
AP_DIRECTION = (1.0, 0.0, 0.0)

# (f_mod en Hz, 𝒫_mod) medidos; la pendiente cae al subir f_mod
ANCLAS_P_MOD = ((0.0, 1.0), (18e3, 1.6), (60e3, 2.56))
F_MOD_REFERENCIA = 18e3

# °C por watt de láser
COEF_CALENTAMIENTO = 2.4

# servo de la frecuencia de MW
TASA_SERVO = 0.4


def enbw_cascade(tau: float, stages: int) -> float:
    """Ancho de banda equivalente de ruido (unilateral) de n polos idénticos"""
    verificar_positivo(tau, "tau")
    n = stages
    factor = math.sqrt(math.pi) * special.gamma(n - 0.5) / (2 * special.gamma(n))
    return factor / (2 * math.pi * tau)


def cutoff_cascade(tau: float, stages: int) -> float:
    """Frecuencia de −3 dB de n polos idénticos"""
    verificar_positivo(tau, "tau")
    return math.sqrt(2 ** (1.0 / stages) - 1) / (2 * math.pi * tau)


@dataclass(frozen=True)
class LockInConfig:
    """Ajustes del amplificador lock-in

    gain agrupa LNA y LIA (V/V); expand es la expansión temporal de la
    salida. Si f_enbw_measured está definido, la constante de tiempo
    efectiva se reescala para reproducir ese ENBW.
    """

    f_mod: float = F_MOD_REFERENCIA
    tau_lia: float = 30e-6
    rolloff_stages: int = 4
    gain: float = 1000.0
    expand: float = 5.0
    f_enbw_measured: Optional[float] = 4000.0
    slope_sign: int = 1
    phase_deg: float = 0.0

    def __post_init__(self):
        verificar_positivo(self.f_mod, "f_mod")
        verificar_positivo(self.tau_lia, "tau_lia")
        verificar_positivo(self.gain, "gain")
        if self.rolloff_stages not in (1, 2, 3, 4):
            raise ErrorDominio(f"rolloff_stages debe estar en 1..4, se recibió {self.rolloff_stages}")
        if verificar_finito(self.expand, "expand") < 1:
            raise ErrorDominio(f"expand debe ser >= 1, se recibió {self.expand}")
        if self.f_enbw_measured is not None:
            verificar_positivo(self.f_enbw_measured, "f_enbw_measured")
        if self.slope_sign not in (-1, 1):
            raise ErrorDominio("slope_sign debe ser +1 o −1")
        verificar_finito(self.phase_deg, "phase_deg")

    def replace(self, **cambios) -> "LockInConfig":
        return dataclasses.replace(self, **cambios)

    @property
    def tau_effective(self) -> float:
        if self.f_enbw_measured is None:
            return self.tau_lia
        return enbw_cascade(1.0, self.rolloff_stages) / self.f_enbw_measured

    @property
    def enbw(self) -> float:
        return enbw_cascade(self.tau_effective, self.rolloff_stages)

    @property
    def cutoff(self) -> float:
        return cutoff_cascade(self.tau_effective, self.rolloff_stages)

    @property
    def phase_factor(self) -> float:
        """Proyección de la señal en la fase de demodulación"""
        return math.cos(math.radians(self.phase_deg % 360.0))


def modulation_penalty(f_mod: float) -> float:
    """𝒫_mod por interpolación lineal entre los puntos medidos"""
    f_mod = verificar_finito(f_mod, "f_mod")
    if f_mod < 0:
        raise ErrorDominio("f_mod no puede ser negativa")
    frecuencias, penalizaciones = zip(*ANCLAS_P_MOD)
    if f_mod > frecuencias[-1]:
        logger.warning("f_mod = %g Hz fuera de los puntos medidos; se usa 𝒫_mod = %g",
                       f_mod, penalizaciones[-1])
    return float(np.interp(f_mod, frecuencias, penalizaciones))


@dataclass(frozen=True)
class NoiseBudget:
    """Tasa de fotoelectrones y factores de penalización de la sensibilidad

    photon_rate se deduce de v_sig/(r_load·q) si no se indica. eta_measured
    es la densidad espectral (T/√Hz, unilateral) que se inyecta al simular;
    si es None se usa el presupuesto teórico completo. p_mod fijo sustituye
    a la penalización interpolada en f_mod de la cadena.
    """

    v_sig: float = 0.4
    r_load: float = 50.0
    photon_rate: Optional[float] = None
    delta_f: float = 1.5e6
    contrast2: float = 0.053
    p_ref: float = math.sqrt(2)
    p_slope: float = 1.19
    p_mod: Optional[float] = None
    p_amp: float = 1.23
    p_mw: float = 1.76
    eta_measured: Optional[float] = 15e-12

    def __post_init__(self):
        verificar_positivo(self.v_sig, "v_sig")
        verificar_positivo(self.r_load, "r_load")
        verificar_positivo(self.delta_f, "delta_f")
        if not 0 < verificar_finito(self.contrast2, "contrast2") < 1:
            raise ErrorDominio("contrast2 debe estar en (0, 1)")
        for nombre in ("p_ref", "p_slope", "p_mod", "p_amp", "p_mw"):
            if getattr(self, nombre) is None:
                continue
            if verificar_finito(getattr(self, nombre), nombre) < 1:
                raise ErrorDominio(f"{nombre} debe ser >= 1, se recibió {getattr(self, nombre)}")
        tasa = self.v_sig / (self.r_load * Q_E)
        if self.photon_rate is None:
            object.__setattr__(self, "photon_rate", tasa)
        elif not math.isclose(self.photon_rate, tasa, rel_tol=1e-6):
            raise ErrorDominio(
                f"photon_rate = {self.photon_rate:.4g}/s no es consistente con "
                f"V_sig/(R_L q) = {tasa:.4g}/s")
        if self.eta_measured is not None and verificar_finito(self.eta_measured, "eta_measured") < 0:
            raise ErrorDominio("eta_measured no puede ser negativa")

    def replace(self, **cambios) -> "NoiseBudget":
        cambios.setdefault("photon_rate", None)
        return dataclasses.replace(self, **cambios)

    def mod_penalty(self, f_mod: float = F_MOD_REFERENCIA) -> float:
        return self.p_mod if self.p_mod is not None else modulation_penalty(f_mod)

    @property
    def penalty_product(self) -> float:
        """Producto de penalizaciones en la frecuencia de modulación de referencia"""
        return self.p_mw * self.p_amp * self.mod_penalty() * self.p_slope * self.p_ref

    @property
    def eta(self) -> float:
        """Densidad de ruido en campo que usa la simulación"""
        if self.eta_measured is not None:
            return self.eta_measured
        return noise_budget_chain(self)[2]


@dataclass(frozen=True)
class DigitizerConfig:
    sample_rate: float = DEFAULT_SAMPLE_RATE
    bits: int = 16
    v_range: float = 2.0

    def __post_init__(self):
        verificar_positivo(self.sample_rate, "sample_rate")
        verificar_positivo(self.v_range, "v_range")
        if not 1 <= self.bits <= 32:
            raise ErrorDominio(f"bits debe estar en 1..32, se recibió {self.bits}")

    @property
    def lsb(self) -> float:
        return 2 * self.v_range / 2 ** self.bits


# --- calibración ---------------------------------------------------------

def calibration_constant(slope: float) -> float:
    """C_LIA = h/(pendiente·g_eμ_B·cos[π/2 − θ_tet/2]) en T/V

    slope es dV/df referida al desplazamiento de la resonancia producido
    por el campo, con signo.
    """
    slope = verificar_finito(slope, "slope")
    if slope == 0:
        raise ErrorSingular("pendiente nula: el cruce por cero no es detectable")
    return H / (slope * G_E_MU_B * two_axis_angle_factor())


def coil_field(n_turns: int, i_coil: float, r_coil: float, z_coil: float) -> float:
    """Campo en el eje de una espira circular de n vueltas"""
    if r_coil <= 0:
        raise ErrorDominio(f"el radio de la bobina debe ser positivo, se recibió {r_coil}")
    if z_coil < 0:
        raise ErrorDominio(f"z_coil no puede ser negativa, se recibió {z_coil}")
    return MU0 * n_turns * i_coil * r_coil ** 2 / (2 * (z_coil ** 2 + r_coil ** 2) ** 1.5)


def chain_gain(odmr: OdmrParams = None, cfg: LockInConfig = None, noise: NoiseBudget = None,
               bias: BiasField = None, direction: Sequence[float] = AP_DIRECTION,
               axes: NvAxes = None) -> float:
    """Ganancia extremo a extremo en V/T para un campo a lo largo de direction

    El 2 corresponde a sensar con dos ejes a la vez; 𝒫_slope y 𝒫_mod
    reducen la pendiente respecto del modelo ideal. 𝒫_mod sale de cfg.f_mod
    salvo que noise fije p_mod.
    """
    odmr = odmr or OdmrParams()
    cfg = cfg or LockInConfig()
    noise = noise or NoiseBudget()
    proyeccion = sensing_projection(direction, axes, bias)
    p_mod = noise.mod_penalty(cfg.f_mod)
    pendiente = 2 * small_signal_gain(odmr) * proyeccion / (noise.p_slope * p_mod)
    return pendiente * cfg.gain * cfg.expand * cfg.slope_sign * cfg.phase_factor


def calibrate(odmr: OdmrParams = None, cfg: LockInConfig = None, noise: NoiseBudget = None,
              bias: BiasField = None, axes: NvAxes = None) -> float:
    """C_LIA de la configuración de referencia, a partir de su pendiente en V/Hz"""
    ganancia = chain_gain(odmr, cfg, noise, bias, axes=axes)
    pendiente = ganancia * H / (G_E_MU_B * two_axis_angle_factor())
    c_lia = calibration_constant(pendiente)
    logger.debug("pendiente %.4g V/Hz, C_LIA = %.4g T/V", pendiente, c_lia)
    return c_lia


def volts_to_field(traza: TimeTrace, c_lia: float) -> TimeTrace:
    traza.require_unit("volts")
    return traza.scaled(c_lia, unit="tesla")


def fractional_lif_change(b: float, odmr: OdmrParams = None, noise: NoiseBudget = None,
                          cfg: LockInConfig = None) -> float:
    """ΔF/F producido por un campo estático b sobre los dos ejes sensores"""
    odmr = odmr or OdmrParams()
    noise = noise or NoiseBudget()
    cfg = cfg or LockInConfig()
    gain = 2 * small_signal_gain(odmr) * two_axis_angle_factor() / (
        noise.p_slope * noise.mod_penalty(cfg.f_mod))
    return abs(gain * b / odmr.v0)


# --- filtro y digitalización --------------------------------------------

def filter_cascade(traza: TimeTrace, cfg: LockInConfig) -> TimeTrace:
    """Cascada de polos idénticos con estado inicial estacionario"""
    traza.require_unit("volts", "tesla")
    tau = cfg.tau_effective
    a = math.exp(-traza.dt / tau)
    b_coef, a_coef = [1.0 - a], [1.0, -a]
    zi = signal.lfilter_zi(b_coef, a_coef)
    y = np.asarray(traza.samples)
    for _ in range(cfg.rolloff_stages):
        if y.size == 0:
            break
        y, _ = signal.lfilter(b_coef, a_coef, y, zi=zi * y[0])
    logger.debug("filtro LIA: %d polos, τ = %.3g s, f_c = %.0f Hz, ENBW = %.0f Hz",
                 cfg.rolloff_stages, tau, cfg.cutoff, cfg.enbw)
    return traza.with_samples(y)


def digital_enbw(cfg: LockInConfig, sample_rate: float) -> float:
    """ENBW del filtro discreto a la tasa dada, desde su respuesta al impulso"""
    n = int(max(64, 50 * cfg.tau_effective * sample_rate * cfg.rolloff_stages))
    h = np.zeros(n)
    h[0] = 1.0
    a = math.exp(-1.0 / (cfg.tau_effective * sample_rate))
    for _ in range(cfg.rolloff_stages):
        h = signal.lfilter([1.0 - a], [1.0, -a], h)
    return sample_rate / 2 * float(np.sum(h ** 2) / np.sum(h) ** 2)


def fft_lowpass(traza: TimeTrace, f_corte: float) -> TimeTrace:
    """Pasa-bajos de pared en el dominio de la frecuencia

    Se refleja la traza antes de transformar para evitar el salto en los
    extremos.
    """
    verificar_positivo(f_corte, "f_corte")
    x = np.concatenate([traza.samples, traza.samples[::-1]])
    espectro = np.fft.rfft(x)
    frecuencias = np.fft.rfftfreq(x.size, traza.dt)
    espectro[frecuencias > f_corte] = 0.0
    return traza.with_samples(np.fft.irfft(espectro, n=x.size)[:len(traza)])


def rise_time_10_90(traza: TimeTrace) -> float:
    """Tiempo de subida 10 %–90 % de un escalón, con interpolación lineal"""
    y = np.asarray(traza.samples)
    if y.size < 10:
        raise ErrorDatos("traza demasiado corta para medir el tiempo de subida")
    borde = max(1, y.size // 10)
    inicial, final = np.median(y[:borde]), np.median(y[-borde:])
    salto = final - inicial
    if salto == 0:
        raise ErrorSingular("la traza no contiene un escalón")
    yn = (y - inicial) / salto
    i90 = int(np.argmax(yn >= 0.9))
    debajo = np.flatnonzero(yn[:i90] < 0.1)
    if i90 == 0 or debajo.size == 0:
        raise ErrorDatos("no se encontró un flanco de subida completo")
    i10 = int(debajo[-1])

    def cruce(i, nivel):
        return (i + (nivel - yn[i]) / (yn[i + 1] - yn[i])) * traza.dt

    return cruce(i90 - 1, 0.9) - cruce(i10, 0.1)


def digitize(traza: TimeTrace, dig: DigitizerConfig = None) -> TimeTrace:
    """Remuestrea a la tasa del digitalizador, recorta al rango y cuantiza"""
    dig = dig or DigitizerConfig()
    traza.require_unit("volts")
    traza = resample(traza, dig.sample_rate)
    v = traza.samples
    if np.any(np.abs(v) > dig.v_range):
        logger.warning("%s: la señal supera el rango de ±%g V y se recorta",
                       traza.name or "traza", dig.v_range)
    v = np.clip(v, -dig.v_range, dig.v_range)
    return traza.with_samples(np.round(v / dig.lsb) * dig.lsb)


def synthesize_measurement(true_field: TimeTrace, odmr: OdmrParams = None,
                           cfg: LockInConfig = None, noise: NoiseBudget = None,
                           seed: int = 0, digitizer: DigitizerConfig = None,
                           bias: BiasField = None, axes: NvAxes = None,
                           with_noise: bool = True) -> TimeTrace:
    """Modelo directo campo → tensión digitalizada del lock-in

    El ruido es blanco con densidad unilateral noise.eta, de modo que tras
    el filtro su RMS en campo es η·√ENBW. Para una semilla dada la salida
    es idéntica bit a bit.
    """
    true_field.require_unit("tesla")
    odmr = odmr or OdmrParams()
    cfg = cfg or LockInConfig()
    noise = noise or NoiseBudget()
    b = np.asarray(true_field.samples)
    if with_noise and noise.eta > 0:
        rng = np.random.default_rng(seed)
        sigma = noise.eta * math.sqrt(true_field.sample_rate / 2)
        b = b + rng.normal(0.0, sigma, b.size)
    ganancia = chain_gain(odmr, cfg, noise, bias, axes=axes)
    voltaje = true_field.with_samples(b * ganancia, unit="volts",
                                      name=f"{true_field.name or 'campo'}_medido")
    return digitize(filter_cascade(voltaje, cfg), digitizer)


def square_test_field(amplitude: float, frequency: float, duration: float,
                      sample_rate: float = DEFAULT_SAMPLE_RATE) -> TimeTrace:
    """Onda cuadrada de la bobina de prueba, ±amplitude"""
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    return TimeTrace(amplitude * signal.square(2 * np.pi * frequency * t), sample_rate,
                     "tesla", "B_test")


def sine_test_field(amplitude: float, frequency: float, duration: float,
                    sample_rate: float = DEFAULT_SAMPLE_RATE) -> TimeTrace:
    """Senoide de prueba de amplitud de pico amplitude"""
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    return TimeTrace(amplitude * np.sin(2 * np.pi * frequency * t), sample_rate, "tesla", "B_test")


# --- sensibilidad teórica ------------------------------------------------

def shot_noise_sensitivity_cwesr(delta_f: float, contrast: float, photon_rate: float) -> float:
    """η^shot de CW-ESR en T/√Hz

    contrast es el de los dos ejes sensados; incluye el factor angular y el
    1/√2 del rechazo de la cuadratura.
    """
    for valor, nombre in ((delta_f, "delta_f"), (contrast, "contrast"), (photon_rate, "photon_rate")):
        verificar_positivo(valor, nombre)
    eta = 4 / (3 * math.sqrt(3)) * H * delta_f / (
        G_E_MU_B * contrast * two_axis_angle_factor() * math.sqrt(photon_rate))
    return eta / math.sqrt(2)


def noise_budget_chain(noise: NoiseBudget = None) -> Tuple[float, float, float]:
    """(η^shot, η^shot·𝒫_ref𝒫_slope, η con todas las penalizaciones)"""
    noise = noise or NoiseBudget()
    shot = shot_noise_sensitivity_cwesr(noise.delta_f, noise.contrast2, noise.photon_rate)
    return shot, shot * noise.p_ref * noise.p_slope, shot * noise.penalty_product


def spin_projection_limit(n_spins: float, t2_star: float) -> float:
    verificar_positivo(n_spins, "n_spins")
    verificar_positivo(t2_star, "t2_star")
    return HBAR / G_E_MU_B / math.sqrt(n_spins * t2_star)


def ramsey_sensitivity(t_i: float, tau: float, t_r: float, contrast: float,
                       photon_rate: float) -> float:
    """Límite de ruido de disparo de un esquema Ramsey (β = ℛ t_R fotones)"""
    for valor, nombre in ((t_i, "t_i"), (tau, "tau"), (t_r, "t_r"),
                          (contrast, "contrast"), (photon_rate, "photon_rate")):
        verificar_positivo(valor, nombre)
    return HBAR / G_E_MU_B * math.sqrt(t_i + tau + t_r) / tau / (contrast * math.sqrt(photon_rate * t_r))


def ramsey_improvement(noise: NoiseBudget = None, t_i: float = 1e-6, tau: float = 450e-9,
                       t_r: float = 400e-9, contrast: float = 0.095) -> float:
    """Mejora de Ramsey frente a CW-ESR optimizado con la misma ℛ"""
    noise = noise or NoiseBudget()
    cw = noise_budget_chain(noise)[1]
    return cw / ramsey_sensitivity(t_i, tau, t_r, contrast, noise.photon_rate)


def t2_star_gain(t2_actual: float = 450e-9, t2_nuevo: float = 32e-6,
                 t_i: float = 1e-6, t_r: float = 400e-9) -> float:
    """Mejora Ramsey al cambiar de diamante con τ = T₂* (igual brillo y contraste)"""
    def factor(t2):
        return math.sqrt(t_i + t2 + t_r) / t2
    return factor(t2_actual) / factor(t2_nuevo)


def photodiode_noise_model(v_sig: float, f_enbw: float, include_amp: bool = True,
                           r_load: float = 50.0, noise_figure_db: float = 1.8,
                           temperature: float = CONSTANTES.temperatura_ambiente) -> float:
    """RMS de tensión del fotodiodo sobre R_L en el ancho f_enbw

    Sin amplificador solo queda el ruido de disparo; con él se suma el
    térmico de R_L y todo se multiplica por la figura de ruido.
    """
    if verificar_finito(v_sig, "v_sig") < 0:
        raise ErrorDominio("v_sig no puede ser negativa")
    verificar_positivo(f_enbw, "f_enbw")
    disparo = 2 * Q_E * v_sig * r_load * f_enbw
    if not include_amp:
        return math.sqrt(disparo)
    termico = 4 * K_B * temperature * r_load * f_enbw
    figura = 10 ** (noise_figure_db / 10)
    return math.sqrt(figura * (disparo + termico))


def amplifier_penalty(noise_figure_db: float = 1.8) -> float:
    """𝒫_amp = √F con F la figura de ruido lineal"""
    return math.sqrt(10 ** (noise_figure_db / 10))


def fit_noise_curve(x, y) -> Tuple[float, float, float]:
    """Ajuste de y = (a + b x)^(1/c); retorna (a, b, c)"""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3 or x.size != y.size:
        raise ErrorDatos("se necesitan al menos 3 puntos (x, y) para ajustar la curva de ruido")
    xs = float(np.max(np.abs(x))) or 1.0
    ys = float(np.max(np.abs(y)))
    if ys == 0:
        raise ErrorDatos("la curva de ruido es idénticamente nula")
    xn, yn = x / xs, y / ys

    def modelo(x, a, b, c):
        return np.maximum(a + b * x, 1e-300) ** (1.0 / c)

    a0 = float(yn[np.argmin(xn)] ** 2)
    b0 = max(float(yn[np.argmax(xn)] ** 2) - a0, 1e-6)
    (an, bn, c), _ = optimize.curve_fit(modelo, xn, yn, p0=(a0, b0, 2.0),
                                        bounds=([0.0, 0.0, 0.5], [np.inf, np.inf, 10.0]))
    escala = ys ** c
    return an * escala, bn * escala / xs, float(c)


# --- térmica y deriva ---------------------------------------------------

def diamond_temperature_rise(p_laser: float) -> float:
    if verificar_finito(p_laser, "p_laser") < 0:
        raise ErrorDominio("la potencia del láser no puede ser negativa")
    return COEF_CALENTAMIENTO * p_laser


def drift_servo(omega0_drift: TimeTrace, update_rate: float = TASA_SERVO) -> TimeTrace:
    """Residuo ω₀ − ω_c con ω_c re-centrado en retención de orden cero"""
    omega0_drift.require_unit("rad_per_s")
    verificar_positivo(update_rate, "update_rate")
    t = omega0_drift.times - omega0_drift.t0
    actualizaciones = np.floor(t * update_rate + 1e-9) / update_rate
    omega_c = np.interp(actualizaciones, t, omega0_drift.samples)
    return omega0_drift.with_samples(omega0_drift.samples - omega_c,
                                     name=f"{omega0_drift.name or 'deriva'}_residuo")
