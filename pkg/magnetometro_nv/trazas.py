"""Trazas temporales uniformemente muestreadas y su formato de archivo."""

import dataclasses
import logging
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, List, Union

import numpy as np
from scipy import signal

from .errores import ErrorConfiguracion, ErrorDatos, ErrorDominio, ErrorUnidades

logger = logging.getLogger(__name__)

UNIDADES = frozenset({
    "tesla",
    "volts",
    "volts_intracellular",
    "volts_extracellular",
    "rad_per_s",
    "tesla2_s",
})

# tasa de adquisición del digitalizador
DEFAULT_SAMPLE_RATE = 250e3


@dataclass(frozen=True)
class TimeTrace:
    """Serie temporal uniforme con tasa de muestreo y unidad

    samples se guarda como arreglo de solo lectura; t0 es el instante de la
    primera muestra.
    """

    samples: np.ndarray
    sample_rate: float = DEFAULT_SAMPLE_RATE
    unit: str = "tesla"
    name: str = ""
    t0: float = 0.0

    def __post_init__(self):
        muestras = np.array(self.samples, dtype=float, copy=True).ravel()
        if not np.all(np.isfinite(muestras)):
            raise ErrorDominio("la traza contiene muestras no finitas")
        if not np.isfinite(self.sample_rate) or self.sample_rate <= 0:
            raise ErrorDominio(f"sample_rate debe ser positivo, se recibió {self.sample_rate}")
        if self.unit not in UNIDADES:
            raise ErrorUnidades(f"unidad desconocida: {self.unit!r}")
        muestras.setflags(write=False)
        object.__setattr__(self, "samples", muestras)
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    def __eq__(self, otra) -> bool:
        if not isinstance(otra, TimeTrace):
            return NotImplemented
        return (self.sample_rate == otra.sample_rate and self.unit == otra.unit
                and self.name == otra.name and self.t0 == otra.t0
                and np.array_equal(self.samples, otra.samples))

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) / self.sample_rate

    def with_samples(self, muestras, **cambios) -> "TimeTrace":
        """Copia de la traza con otras muestras (y campos opcionales)"""
        return dataclasses.replace(self, samples=muestras, **cambios)

    def scaled(self, factor: float, unit: str = None) -> "TimeTrace":
        return self.with_samples(self.samples * factor, unit=unit or self.unit)

    def require_unit(self, *unidades: str) -> None:
        if self.unit not in unidades:
            raise ErrorUnidades(
                f"la traza {self.name or '(sin nombre)'} está en {self.unit}, "
                f"se esperaba {' o '.join(unidades)}")

    def window(self, t_inicio: float, t_fin: float) -> np.ndarray:
        """Muestras con t_inicio <= t < t_fin"""
        t = self.times
        return self.samples[(t >= t_inicio) & (t < t_fin)]


def resample(traza: TimeTrace, sample_rate: float) -> TimeTrace:
    """Remuestrea a otra tasa (polifásico si la razón es racional sencilla)"""
    if sample_rate == traza.sample_rate:
        return traza
    razon = Fraction(sample_rate / traza.sample_rate).limit_denominator(1000)
    if abs(float(razon) * traza.sample_rate - sample_rate) < 1e-9 * sample_rate:
        nuevas = signal.resample_poly(traza.samples, razon.numerator, razon.denominator)
    else:
        n = int(round(traza.duration * sample_rate))
        t_nuevo = traza.t0 + np.arange(n) / sample_rate
        nuevas = np.interp(t_nuevo, traza.times, traza.samples)
    logger.debug("remuestreo %s: %g Hz -> %g Hz", traza.name, traza.sample_rate, sample_rate)
    return traza.with_samples(nuevas, sample_rate=sample_rate)


def average(trazas: Iterable[TimeTrace]) -> TimeTrace:
    """Promedio punto a punto de trazas compatibles"""
    trazas = list(trazas)
    if not trazas:
        raise ErrorDatos("no hay trazas para promediar")
    base = trazas[0]
    for traza in trazas[1:]:
        if traza.sample_rate != base.sample_rate or len(traza) != len(base):
            raise ErrorDatos("las trazas a promediar deben tener igual tasa y longitud")
        if traza.unit != base.unit:
            raise ErrorUnidades("las trazas a promediar deben tener la misma unidad")
    media = np.mean(np.vstack([t.samples for t in trazas]), axis=0)
    return base.with_samples(media)


def save_trace(traza: TimeTrace, ruta: Union[str, Path]) -> Path:
    """Escribe la traza en texto: 3 líneas de cabecera y columnas (t, valor)

    Se usan 17 cifras significativas para que la lectura sea exacta.
    """
    ruta = Path(ruta)
    cabecera = "\n".join([
        f"name: {traza.name}",
        f"unit: {traza.unit}",
        f"sample_rate: {traza.sample_rate:.17g}",
    ])
    datos = np.column_stack([traza.times, traza.samples])
    np.savetxt(ruta, datos, fmt="%.17g", delimiter=",", header=cabecera, comments="# ")
    return ruta


def load_trace(ruta: Union[str, Path]) -> TimeTrace:
    ruta = Path(ruta)
    with open(ruta, "r", encoding="utf-8") as archivo:
        cabecera = [archivo.readline() for _ in range(3)]
    campos = {}
    for numero, linea in enumerate(cabecera, start=1):
        if not linea.startswith("# ") or ":" not in linea:
            raise ErrorConfiguracion(f"cabecera de traza inválida en {ruta}", linea=numero)
        clave, valor = linea[2:].split(":", 1)
        campos[clave.strip()] = valor.strip()
    try:
        datos = np.loadtxt(ruta, delimiter=",", skiprows=3, ndmin=2)
        tasa = float(campos["sample_rate"])
    except (KeyError, ValueError) as error:
        raise ErrorConfiguracion(f"no se pudo leer {ruta}: {error}")
    if datos.shape[0] == 0:
        raise ErrorDatos(f"{ruta} no contiene muestras")
    return TimeTrace(samples=datos[:, 1], sample_rate=tasa, unit=campos.get("unit", "tesla"),
                     name=campos.get("name", ""), t0=float(datos[0, 0]))


def stack(trazas: List[TimeTrace]) -> np.ndarray:
    """Matriz (n_trazas, n_muestras) para operaciones vectorizadas"""
    return np.vstack([t.samples for t in trazas])
