"""Modelos cerrados de fluorescencia ODMR y de la señal de dispersión del lock-in.

Se ignora el ensanchamiento por potencia de MW y óptico: el ancho de línea
medido entra solo como valor de Γ. Las unidades de fluorescencia son
arbitrarias y V₀ absorbe la ganancia del detector.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import optimize, signal

from .constantes import GAMMA, CONSTANTES
from .errores import ErrorDatos, ErrorDominio, verificar_finito

logger = logging.getLogger(__name__)

MODOS = ("single_feature", "hyperfine", "three_tone")

# resonancia m_s=0 -> m_s=+1 con 7 G de proyección del campo de sesgo
OMEGA0_SESGO = CONSTANTES.omega_zfs + GAMMA * 7e-4


@dataclass(frozen=True)
class OdmrParams:
    """Parámetros de la resonancia NV (frecuencias angulares en rad/s)

    Si omega_dev no se indica se usa Γ/(2√3), la desviación que maximiza la
    pendiente del cruce por cero.
    """

    omega0: float = OMEGA0_SESGO
    gamma: float = 2 * math.pi * 1.5e6
    contrast: float = 0.0265
    f0: float = 1.0
    delta_hf: float = 2 * math.pi * 2.16e6
    omega_dev: Optional[float] = None
    v0: float = 1.0

    def __post_init__(self):
        for nombre in ("omega0", "gamma", "contrast", "f0", "delta_hf", "v0"):
            verificar_finito(getattr(self, nombre), nombre)
        if self.gamma <= 0:
            raise ErrorDominio(f"gamma debe ser positivo, se recibió {self.gamma}")
        if not 0 < self.contrast < 1:
            raise ErrorDominio(f"el contraste debe estar en (0, 1), se recibió {self.contrast}")
        if self.f0 <= 0:
            raise ErrorDominio(f"f0 debe ser positivo, se recibió {self.f0}")
        if self.delta_hf < 0:
            raise ErrorDominio(f"delta_hf no puede ser negativo, se recibió {self.delta_hf}")
        if self.omega_dev is None:
            object.__setattr__(self, "omega_dev", self.gamma / (2 * math.sqrt(3)))
        elif verificar_finito(self.omega_dev, "omega_dev") <= 0:
            raise ErrorDominio(f"omega_dev debe ser positivo, se recibió {self.omega_dev}")

    def replace(self, **cambios) -> "OdmrParams":
        return dataclasses.replace(self, **cambios)


def _frecuencias(omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if not np.all(np.isfinite(omega)):
        raise ErrorDominio("la frecuencia angular debe ser finita")
    return omega


def _salida(valor, omega_original):
    return float(valor) if np.ndim(omega_original) == 0 else valor


def unit_lorentzian(detuning, gamma: float):
    """Lorentziana de pico unitario y ancho completo gamma"""
    media = (gamma / 2) ** 2
    return media / (media + np.square(detuning))


def lorentzian_fluorescence(omega, p: OdmrParams):
    """F(ω) = F₀(1 − 𝒞 L(ω − ω₀)) para un único rasgo"""
    w = _frecuencias(omega)
    f = p.f0 * (1 - p.contrast * unit_lorentzian(w - p.omega0, p.gamma))
    return _salida(f, omega)


def hyperfine_fluorescence(omega, p: OdmrParams):
    """Triplete hiperfino del ¹⁴N barrido con un solo tono"""
    w = _frecuencias(omega)
    suma = sum(unit_lorentzian(w - (p.omega0 + q * p.delta_hf), p.gamma) for q in (-1, 0, 1))
    return _salida(p.f0 * (1 - p.contrast * suma), omega)


def three_tone_fluorescence(omega, p: OdmrParams):
    """Tres tonos separados por Δω_HF sobre el triplete (doble suma p, q)"""
    w = _frecuencias(omega)
    suma = 0.0
    for tono in (-1, 0, 1):
        for linea in (-1, 0, 1):
            suma = suma + unit_lorentzian(
                (w + tono * p.delta_hf) - (p.omega0 + linea * p.delta_hf), p.gamma)
    return _salida(p.f0 * (1 - p.contrast * suma), omega)


_FLUORESCENCIA = {
    "single_feature": lorentzian_fluorescence,
    "hyperfine": hyperfine_fluorescence,
    "three_tone": three_tone_fluorescence,
}


def fluorescence(omega, p: OdmrParams, mode: str = "single_feature"):
    if mode not in _FLUORESCENCIA:
        raise ErrorDominio(f"modo no reconocido: {mode!r}. Use uno de: {list(MODOS)}")
    return _FLUORESCENCIA[mode](omega, p)


def lia_dispersion(omega_c, p: OdmrParams, mode: str = "single_feature"):
    """Salida DC del lock-in: V₀[F(ω_c + ω_dev) − F(ω_c − ω_dev)]/(2F₀)

    La demodulación por onda cuadrada se reduce a la diferencia de dos
    puntos. Con pendiente positiva el lóbulo negativo precede al positivo.
    """
    w = _frecuencias(omega_c)
    arriba = fluorescence(w + p.omega_dev, p, mode)
    abajo = fluorescence(w - p.omega_dev, p, mode)
    return _salida(p.v0 * (arriba - abajo) / (2 * p.f0), omega_c)


def zero_crossing_slope(p: OdmrParams, mode: str = "single_feature",
                        paso: Optional[float] = None) -> float:
    """dV/dω_c numérica en ω₀ (V por rad/s)"""
    h = paso if paso is not None else 1e-4 * min(p.gamma, p.omega_dev)
    return (lia_dispersion(p.omega0 + h, p, mode) - lia_dispersion(p.omega0 - h, p, mode)) / (2 * h)


def optimal_modulation_deviation(p: OdmrParams, mode: str = "single_feature") -> float:
    """ω_dev que maximiza la pendiente del cruce por cero (búsqueda dorada)"""

    def menos_pendiente(x):
        if x <= 0:
            return math.inf
        q = p.replace(omega_dev=x * p.gamma)
        return -zero_crossing_slope(q, mode) * p.gamma / (p.v0 * p.contrast)

    resultado = optimize.minimize_scalar(menos_pendiente, bracket=(0.05, 0.3, 1.0),
                                         method="golden", tol=1e-10)
    logger.debug("ω_dev óptimo = %.6f Γ (%s)", resultado.x, mode)
    return resultado.x * p.gamma


def small_signal_gain(p: OdmrParams) -> float:
    """Coeficiente lineal V/T de la dispersión de un rasgo frente a B

    Con ω_dev = Γ/(2√3) se reduce a −3√3 V₀ 𝒞 γ / (4Γ).
    """
    media = (p.gamma / 2) ** 2
    x = p.omega_dev
    pendiente = 2 * p.v0 * p.contrast * x * media / (media + x * x) ** 2
    return -GAMMA * pendiente


def count_dips(values) -> int:
    """Número de mínimos locales de un barrido"""
    return int(signal.argrelmin(np.asarray(values, dtype=float))[0].size)


def fit_lorentzian(omega, fluor) -> Tuple[float, float, float, float]:
    """Ajuste por mínimos cuadrados de un rasgo lorentziano

    Retorna (omega0, gamma, contrast, f0).
    """
    w = _frecuencias(omega)
    y = np.asarray(fluor, dtype=float)
    if w.size < 4 or w.size != y.size:
        raise ErrorDatos("se necesitan al menos 4 puntos para ajustar la lorentziana")
    i_min = int(np.argmin(y))
    f0 = float(np.max(y))
    profundidad = f0 - y[i_min]
    if profundidad <= 0:
        raise ErrorDatos("el barrido no contiene ninguna caída")
    debajo = w[y < f0 - profundidad / 2]
    ancho = max(debajo.max() - debajo.min(), abs(w[1] - w[0]))
    centro = w[i_min]

    # variables normalizadas para un ajuste bien condicionado
    x = (w - centro) / ancho
    yn = y / f0

    def modelo(x, x0, g, c, a):
        return a * (1 - c * unit_lorentzian(x - x0, g))

    (x0, g, c, a), _ = optimize.curve_fit(modelo, x, yn, p0=(0.0, 1.0, profundidad / f0, 1.0))
    return centro + x0 * ancho, abs(g) * ancho, float(c), float(a * f0)
