"""Recuperación de la señal: filtro en peine, alineado, filtro adaptado, SNR y sensibilidad.

Convención espectral: densidad espectral de amplitud unilateral en T/√Hz,
ventana rectangular y ancho de bin 1/T_trial. Los filtros FFT anulan bines
y no son causales (análisis fuera de línea).
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, signal

from .errores import ErrorDatos, ErrorDominio, ErrorSingular, verificar_positivo
from .trazas import TimeTrace, average, stack

logger = logging.getLogger(__name__)

F_HIGHPASS = 80.0
F_RED = 60.0
F_MAX_ARMONICO = 660.0
ANCHO_NOTCH = 1.0

VENTANA_PLANTILLA = 1.4e-3

# SNR mínima para dar un evento por detectado
DETECTION_THRESHOLD = 3.0

F_TEST = 250.0
BANDA = (300.0, 600.0)
F_ENBW = 4000.0


@dataclass(frozen=True)
class SensitivityReport:
    """Estimaciones de η (T/√Hz) y, opcionalmente, el presupuesto teórico"""

    eta1: Optional[float] = None
    eta2: Optional[float] = None
    eta3: Optional[float] = None
    n_trials: int = 0
    t_trial: float = 1.0
    band: Tuple[float, float] = BANDA
    theoretical: Optional[Dict[str, float]] = None

    def __post_init__(self):
        for nombre in ("eta1", "eta2", "eta3"):
            valor = getattr(self, nombre)
            if valor is not None and not (math.isfinite(valor) and valor >= 0):
                raise ErrorDominio(f"{nombre} debe ser finita y no negativa, se recibió {valor}")
        if not self.band[0] < self.band[1]:
            raise ErrorDominio(f"la banda debe estar ordenada, se recibió {self.band}")

    def as_dict(self) -> dict:
        return {
            "eta1": self.eta1,
            "eta2": self.eta2,
            "eta3": self.eta3,
            "n_trials": self.n_trials,
            "t_trial": self.t_trial,
            "band": list(self.band),
            "theoretical": dict(self.theoretical) if self.theoretical else None,
        }


@dataclass(frozen=True)
class MatchedTemplate:
    """Señal esperada invertida en el tiempo, ya recortada a la ventana"""

    samples: np.ndarray
    sample_rate: float
    window: float = VENTANA_PLANTILLA
    source_count: int = 1
    low_energy: bool = False

    def __post_init__(self):
        h = np.array(self.samples, dtype=float, copy=True).ravel()
        if h.size == 0 or not np.all(np.isfinite(h)):
            raise ErrorDominio("la plantilla debe tener muestras finitas")
        verificar_positivo(self.sample_rate, "sample_rate")
        h.setflags(write=False)
        object.__setattr__(self, "samples", h)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def energy(self) -> float:
        """Σh²·Δt, la salida del filtro a desfase nulo sobre la propia señal"""
        return float(np.sum(self.samples ** 2) / self.sample_rate)


@dataclass(frozen=True)
class SnrResult:
    snr_avg: float
    snr_single: float
    n_avg: int
    metric: str = "p2p"

    @property
    def detected(self) -> bool:
        return self.snr_avg >= DETECTION_THRESHOLD


@dataclass
class Alineamiento:
    """Trazas alineadas y los índices descartados por disparo plano"""

    trazas: List[TimeTrace] = field(default_factory=list)
    rechazadas: List[int] = field(default_factory=list)


# --- filtros FFT ---------------------------------------------------------

def _bines_notch(frecuencias: np.ndarray, centro: float, ancho: float) -> np.ndarray:
    dentro = np.abs(frecuencias - centro) <= ancho / 2
    if not np.any(dentro):
        dentro = np.zeros_like(frecuencias, dtype=bool)
        dentro[int(np.argmin(np.abs(frecuencias - centro)))] = True
    return dentro


def comb_filter(trace: TimeTrace, f_highpass: float = F_HIGHPASS,
                extra_notches: Sequence[float] = (), notch_width: float = ANCHO_NOTCH,
                f_line: float = F_RED, f_max_harmonic: float = F_MAX_ARMONICO) -> TimeTrace:
    """Pasa-altos en f_highpass y notches en los armónicos de la red

    Los notches de extra_notches usan el mismo ancho. Si ningún bin cae en
    el ancho del notch se anula el más cercano.
    """
    if (f_line > 0 or len(extra_notches)) and trace.duration < 1.0 / notch_width:
        logger.warning("%s dura %.3g s: los notches de %g Hz no quedan resueltos",
                       trace.name or "traza", trace.duration, notch_width)
    x = np.asarray(trace.samples)
    espectro = np.fft.rfft(x)
    frecuencias = np.fft.rfftfreq(x.size, trace.dt)
    mascara = frecuencias < f_highpass
    armonicos = np.arange(f_line, f_max_harmonic + f_line / 2, f_line) if f_line > 0 else []
    for centro in list(armonicos) + list(extra_notches):
        if centro <= frecuencias[-1]:
            mascara |= _bines_notch(frecuencias, centro, notch_width)
    espectro[mascara] = 0.0
    return trace.with_samples(np.fft.irfft(espectro, n=x.size))


def highpass(trace: TimeTrace, f_highpass: float = F_HIGHPASS) -> TimeTrace:
    return comb_filter(trace, f_highpass=f_highpass, f_line=0.0, extra_notches=())


# --- alineado y promedio -------------------------------------------------

def _indice_disparo(disparo: TimeTrace, modo: str, extremo: str) -> Optional[int]:
    v = np.asarray(disparo.samples)
    if v.size == 0 or np.ptp(v) == 0:
        return None
    if modo == "onset":
        return int(np.argmax(np.abs(v - v[0]) >= np.ptp(v) / 2))
    return int(np.argmax(v) if extremo == "max" else np.argmin(v))


def align_traces(traces: Sequence[TimeTrace], triggers: Sequence[TimeTrace] = None,
                 mode: str = "extremum", extremo: str = "max") -> Alineamiento:
    """Desplaza cada traza (circularmente, a la muestra) para que coincidan los disparos

    mode="extremum" usa el máximo o mínimo del registro extracelular;
    mode="onset" usa el flanco del pulso de estimulación, y sin disparos
    supone que t = 0 ya es el inicio del estímulo.
    """
    if not traces:
        raise ErrorDatos("no hay trazas para alinear")
    if mode not in ("extremum", "onset"):
        raise ErrorDominio(f"modo de alineado no reconocido: {mode!r}")
    if extremo not in ("max", "min"):
        raise ErrorDominio("extremo debe ser 'max' o 'min'")
    if triggers is None:
        if mode == "extremum":
            raise ErrorDatos("el alineado por extremo necesita las trazas de disparo")
        return Alineamiento(trazas=list(traces))
    if len(triggers) != len(traces):
        raise ErrorDatos(f"{len(traces)} trazas pero {len(triggers)} disparos")

    resultado = Alineamiento()
    referencia = None
    for i, (traza, disparo) in enumerate(zip(traces, triggers)):
        indice = _indice_disparo(disparo, mode, extremo)
        if indice is None:
            resultado.rechazadas.append(i)
            continue
        if referencia is None:
            referencia = indice
        resultado.trazas.append(traza.with_samples(np.roll(traza.samples, referencia - indice)))
    if resultado.rechazadas:
        logger.warning("%d de %d disparos sin extremo: trazas descartadas %s",
                       len(resultado.rechazadas), len(traces), resultado.rechazadas)
    if not resultado.trazas:
        raise ErrorDatos("todos los disparos fueron rechazados")
    return resultado


def align_and_average(traces: Sequence[TimeTrace], triggers: Sequence[TimeTrace] = None,
                      mode: str = "extremum", extremo: str = "max") -> TimeTrace:
    alineadas = align_traces(traces, triggers, mode, extremo)
    promedio = average(alineadas.trazas)
    return promedio.with_samples(promedio.samples,
                                 name=f"{promedio.name or 'promedio'}_N{len(alineadas.trazas)}")


# --- filtro adaptado -----------------------------------------------------

def build_template(traces: Sequence[TimeTrace], window: float = VENTANA_PLANTILLA,
                   f_highpass: float = F_HIGHPASS) -> MatchedTemplate:
    """Promedio, pasa-altos, recorte a la ventana del par de extremos e inversión temporal"""
    if not traces:
        raise ErrorDatos("no hay trazas para construir la plantilla")
    verificar_positivo(window, "window")
    media = highpass(average(traces), f_highpass)
    x = np.asarray(media.samples)
    n = min(x.size, max(1, int(round(window * media.sample_rate))))
    i_max, i_min = int(np.argmax(x)), int(np.argmin(x))
    centro = (i_max + i_min) // 2 if abs(i_max - i_min) < n else int(np.argmax(np.abs(x)))
    inicio = min(max(0, centro - n // 2), x.size - n)
    segmento = x[inicio:inicio + n]

    energia_total = float(np.sum(x ** 2))
    energia = float(np.sum(segmento ** 2))
    bajo = energia_total == 0 or (energia / energia_total) / (n / x.size) < 3.0
    if bajo:
        logger.warning("plantilla de baja energía: la ventana no contiene una señal clara")
    return MatchedTemplate(samples=segmento[::-1], sample_rate=media.sample_rate, window=window,
                           source_count=len(traces), low_energy=bajo)


def matched_filter(trace: TimeTrace, h: MatchedTemplate) -> TimeTrace:
    """y[n] = Σ_k h[k] x[n−k]·Δt, causal y del largo de la traza"""
    trace.require_unit("tesla")
    if len(h) > len(trace):
        raise ErrorDatos("la plantilla es más larga que la traza")
    if h.sample_rate != trace.sample_rate:
        raise ErrorDatos("la plantilla y la traza tienen distinta tasa de muestreo")
    y = np.convolve(trace.samples, h.samples)[:len(trace)] * trace.dt
    return trace.with_samples(y, unit="tesla2_s", name=f"{trace.name or 'traza'}_mf")


# --- SNR -----------------------------------------------------------------

def _indices_ventana(trace: TimeTrace, ventana: Tuple[float, float]) -> slice:
    t0, t1 = ventana
    if not t0 < t1:
        raise ErrorDominio(f"ventana desordenada: {ventana}")
    i0 = int(round((t0 - trace.t0) * trace.sample_rate))
    i1 = int(round((t1 - trace.t0) * trace.sample_rate))
    if i0 < 0 or i1 > len(trace):
        raise ErrorDominio(f"la ventana {ventana} s cae fuera de la traza")
    return slice(i0, i1)


def snr(trace: TimeTrace, signal_window: Tuple[float, float], quiet_window: Tuple[float, float],
        n_avg: int = 1, metric: str = "p2p", reference: TimeTrace = None) -> SnrResult:
    """SNR del promedio y de un disparo único (dividida por √N_avg)

    metric="p2p" usa el pico a pico en signal_window; "peak" el máximo de |x|.
    Con reference (la señal esperada sin ruido, misma rejilla) la amplitud se
    lee en las muestras donde reference tiene sus extremos y no en los
    extremos de la traza: el máximo y el mínimo de señal más ruido crecen
    con el ruido, y ese sesgo haría que snr_single bajara al aumentar N_avg.
    """
    if n_avg < 1:
        raise ErrorDominio("n_avg debe ser >= 1")
    if metric not in ("p2p", "peak"):
        raise ErrorDominio(f"métrica no reconocida: {metric!r}")
    s, q = _indices_ventana(trace, signal_window), _indices_ventana(trace, quiet_window)
    if s.start < q.stop and q.start < s.stop:
        raise ErrorDominio("las ventanas de señal y de ruido se solapan")
    x = np.asarray(trace.samples)
    sigma = float(np.std(x[q]))
    if sigma == 0:
        raise ErrorSingular("desviación estándar nula en la ventana sin señal")
    tramo = x[s]
    if reference is None:
        amplitud = float(np.ptp(tramo)) if metric == "p2p" else float(np.max(np.abs(tramo)))
    else:
        if len(reference) != len(trace) or reference.sample_rate != trace.sample_rate:
            raise ErrorDatos("la referencia debe tener la rejilla temporal de la traza")
        r = np.asarray(reference.samples)[s]
        if metric == "p2p":
            amplitud = float(tramo[np.argmax(r)] - tramo[np.argmin(r)])
        else:
            i = int(np.argmax(np.abs(r)))
            amplitud = float(tramo[i] * np.sign(r[i]))
    snr_avg = amplitud / sigma
    return SnrResult(snr_avg=snr_avg, snr_single=snr_avg / math.sqrt(n_avg), n_avg=n_avg,
                     metric=metric)


def predict_snr(snr_single: float, n: int) -> float:
    return snr_single * math.sqrt(n)


# --- espectros -----------------------------------------------------------

def amplitude_spectral_density(trace: TimeTrace, nperseg: int = None) -> Tuple[np.ndarray, np.ndarray]:
    """(f, ASD) unilateral; con nperseg se promedia por Welch"""
    x = np.asarray(trace.samples)
    if nperseg is None:
        f, psd = signal.periodogram(x, trace.sample_rate, window="boxcar", scaling="density")
    else:
        f, psd = signal.welch(x, trace.sample_rate, nperseg=nperseg, scaling="density")
    return f, np.sqrt(psd)


def averaging_exponent(traces: Sequence[TimeTrace], counts: Sequence[int]) -> float:
    """Exponente k de RMS ∝ N^k al promediar las primeras N trazas"""
    counts = [int(n) for n in counts]
    if len(counts) < 2 or min(counts) < 1 or max(counts) > len(traces):
        raise ErrorDatos("se necesitan al menos dos tamaños N válidos para el ajuste")
    datos = stack(list(traces))
    acumulado = np.cumsum(datos, axis=0)
    rms = [float(np.std(acumulado[n - 1] / n)) for n in counts]
    if min(rms) == 0:
        raise ErrorSingular("RMS nulo: no hay ruido que promediar")
    k, _ = np.polyfit(np.log(counts), np.log(rms), 1)
    return float(k)


# --- estimadores de sensibilidad ----------------------------------------

def _comprobar_trazas(traces: Sequence[TimeTrace], minimo: int = 1) -> None:
    if len(traces) < minimo:
        raise ErrorDatos(f"se necesitan al menos {minimo} ensayos, se recibieron {len(traces)}")
    for traza in traces:
        traza.require_unit("tesla")


def sensitivity_method1(traces: Sequence[TimeTrace], b_test: float,
                        f_test: float = F_TEST) -> float:
    """Proyección de cada ensayo sobre la senoide de prueba de amplitud de pico b_test

    η₁ = (B_rms·√2/μ)·std(x)·√T_trial con x_i = (1/T)∫B_meas·B_test dt.
    """
    _comprobar_trazas(traces, 2)
    x = []
    for traza in traces:
        t = traza.times - traza.t0
        referencia = b_test * np.sin(2 * np.pi * f_test * t)
        t_trial = t[-1]
        x.append(integrate.trapezoid(traza.samples * referencia, dx=traza.dt) / t_trial)
    x = np.asarray(x)
    mu, desviacion = float(np.mean(x)), float(np.std(x, ddof=1))
    if mu <= 0 or mu < 3 * desviacion / math.sqrt(x.size):
        raise ErrorSingular("la proyección media sobre la señal de prueba no es significativa")
    b_rms = abs(b_test) / math.sqrt(2)
    return b_rms * math.sqrt(2) / mu * desviacion * math.sqrt(t_trial)


def sensitivity_method2(traces: Sequence[TimeTrace], b_test: float, f_test: float = F_TEST,
                        band: Tuple[float, float] = BANDA) -> float:
    """Media en la banda de la ASD calibrada con el bin del tono de prueba

    El espectro se escala para que el bin de f_test valga B_rms; la media en
    la banda es cuadrática y excluye los armónicos de f_test.
    """
    _comprobar_trazas(traces)
    f_start, f_stop = band
    base = traces[0]
    nyquist = base.sample_rate / 2
    if not 0 <= f_start < f_stop or f_stop > nyquist:
        raise ErrorDatos(f"la banda {band} Hz excede Nyquist ({nyquist} Hz) o está desordenada")
    espectros = np.abs(np.fft.rfft(stack(list(traces)), axis=1))
    frecuencias = np.fft.rfftfreq(len(base), base.dt)
    bin_ancho = frecuencias[1] - frecuencias[0]
    k_test = int(np.argmin(np.abs(frecuencias - f_test)))
    en_banda = (frecuencias >= f_start) & (frecuencias <= f_stop)
    armonicos = np.abs(frecuencias / f_test - np.round(frecuencias / f_test)) * f_test <= bin_ancho
    en_banda &= ~armonicos
    if not np.any(en_banda):
        raise ErrorDatos(f"la banda {band} Hz no contiene bines útiles")
    tono = float(np.mean(espectros[:, k_test]))
    if tono == 0:
        raise ErrorSingular("el tono de prueba no aparece en el espectro")
    calibracion = abs(b_test) / math.sqrt(2) / tono
    potencia = float(np.mean(espectros[:, en_banda] ** 2))
    return calibracion * math.sqrt(potencia) / math.sqrt(bin_ancho)


def sensitivity_method3(traces: Sequence[TimeTrace], f_enbw: float = F_ENBW) -> float:
    """RMS de ensayos sin campo de prueba dividida por √f_ENBW (ENBW unilateral)

    Con f_ENBW unilateral el resultado es la densidad unilateral, la misma
    convención de η₁ y η₂. Dividir por √(2·f_ENBW) daría la densidad
    bilateral, un factor √2 por debajo de las otras dos estimaciones.
    """
    if not f_enbw > 0:
        raise ErrorDominio(f"f_enbw debe ser positivo, se recibió {f_enbw}")
    _comprobar_trazas(traces)
    return float(np.mean([np.std(t.samples) for t in traces])) / math.sqrt(f_enbw)


class EstimadorSensibilidad(ABC):
    """Estimador de η sobre un conjunto de ensayos"""

    NOMBRE = ""
    USA_TONO = True

    @abstractmethod
    def estimar(self, traces: Sequence[TimeTrace]) -> float:
        pass

    def __str__(self) -> str:
        return self.NOMBRE


class MetodoProyeccion(EstimadorSensibilidad):
    NOMBRE = "eta1"

    def __init__(self, b_test: float, f_test: float = F_TEST):
        self.b_test, self.f_test = b_test, f_test

    def estimar(self, traces):
        return sensitivity_method1(traces, self.b_test, self.f_test)


class MetodoEspectral(EstimadorSensibilidad):
    NOMBRE = "eta2"

    def __init__(self, b_test: float, f_test: float = F_TEST, band: Tuple[float, float] = BANDA):
        self.b_test, self.f_test, self.band = b_test, f_test, band

    def estimar(self, traces):
        return sensitivity_method2(traces, self.b_test, self.f_test, self.band)


class MetodoRms(EstimadorSensibilidad):
    NOMBRE = "eta3"
    USA_TONO = False

    def __init__(self, f_enbw: float = F_ENBW):
        self.f_enbw = f_enbw

    def estimar(self, traces):
        return sensitivity_method3(traces, self.f_enbw)


METODOS = {
    "eta1": MetodoProyeccion,
    "eta2": MetodoEspectral,
    "eta3": MetodoRms,
}
