"""Escenarios de simulación: registro, escenarios incorporados y archivos YAML.

En los archivos las frecuencias del ODMR van en Hz y se convierten a rad/s
al leerlas. Los errores de forma o de tipo se informan con la línea de la
clave responsable.
"""

import dataclasses
import logging
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Dict, Optional, Union

import yaml

from .errores import ErrorConfiguracion, ErrorDominio, ErrorMagnetometro, verificar_positivo
from .neuro_source import SQUID_TEMPLATE, WORM_TEMPLATE, ApTemplate, AxonParams
from .odmr import OdmrParams
from .sensor_chain import DigitizerConfig, LockInConfig, NoiseBudget

logger = logging.getLogger(__name__)

# tasa máxima de estimulación por especie (Hz)
LIMITES_ESTIMULO = {
    "worm": 1.0,
    "squid": 300.0,
    "mammal": 300.0,
}

# campos del ODMR que en el archivo se escriben en Hz
_ODMR_HZ = {
    "center_hz": "omega0",
    "linewidth_hz": "gamma",
    "hyperfine_hz": "delta_hf",
    "deviation_hz": "omega_dev",
}


@dataclass(frozen=True)
class RunSettings:
    """Ajustes del experimento simulado

    onset es el inicio del AP dentro de cada ensayo; jitter > 0 desplaza el
    AP de cada ensayo y obliga a alinear con el registro extracelular.
    """

    n_avg: int = 150
    f_stim: float = 0.4
    seed: int = 0
    trial_duration: float = 0.05
    onset: float = 0.02
    target_slew: Optional[float] = None
    slew_metric: str = "p2p"
    with_noise: bool = True
    jitter: float = 0.0
    n_sets: int = 1

    def __post_init__(self):
        if self.n_avg < 1:
            raise ErrorDominio(f"n_avg debe ser >= 1, se recibió {self.n_avg}")
        if self.n_sets < 1:
            raise ErrorDominio(f"n_sets debe ser >= 1, se recibió {self.n_sets}")
        verificar_positivo(self.f_stim, "f_stim")
        verificar_positivo(self.trial_duration, "trial_duration")
        if not 0 <= self.onset < self.trial_duration:
            raise ErrorDominio("onset debe caer dentro del ensayo")
        if self.jitter < 0:
            raise ErrorDominio("jitter no puede ser negativo")
        if self.target_slew is not None:
            verificar_positivo(self.target_slew, "target_slew")
        if self.slew_metric not in ("p2p", "max"):
            raise ErrorDominio(f"slew_metric no reconocida: {self.slew_metric!r}")


@dataclass(frozen=True)
class Scenario:
    name: str
    species: str = "worm"
    axon: AxonParams = field(default_factory=AxonParams)
    template: ApTemplate = WORM_TEMPLATE
    odmr: OdmrParams = field(default_factory=OdmrParams)
    lockin: LockInConfig = field(default_factory=LockInConfig)
    noise: NoiseBudget = field(default_factory=NoiseBudget)
    digitizer: DigitizerConfig = field(default_factory=DigitizerConfig)
    run: RunSettings = field(default_factory=RunSettings)

    def __post_init__(self):
        if not self.name:
            raise ErrorDominio("el escenario necesita un nombre")
        if self.species not in LIMITES_ESTIMULO:
            raise ErrorDominio(f"especie no reconocida: {self.species!r}. "
                               f"Use una de: {list(LIMITES_ESTIMULO)}")
        limite = LIMITES_ESTIMULO[self.species]
        if self.run.f_stim > limite:
            raise ErrorDominio(f"f_stim = {self.run.f_stim} Hz supera el límite de {limite} Hz "
                               f"para {self.species}")

    # atajos a los ajustes de run
    @property
    def n_avg(self) -> int:
        return self.run.n_avg

    @property
    def f_stim(self) -> float:
        return self.run.f_stim

    @property
    def seed(self) -> int:
        return self.run.seed

    def replace(self, **cambios) -> "Scenario":
        return dataclasses.replace(self, **cambios)

    def same_as(self, otro: "Scenario", rel: float = 1e-12) -> bool:
        """Igualdad campo a campo con tolerancia relativa en los flotantes"""
        return _parecidos(scenario_to_dict(self), scenario_to_dict(otro), rel)


def _parecidos(a, b, rel) -> bool:
    if isinstance(a, dict) and isinstance(b, dict):
        return a.keys() == b.keys() and all(_parecidos(a[k], b[k], rel) for k in a)
    if isinstance(a, float) and isinstance(b, float):
        return math.isclose(a, b, rel_tol=rel, abs_tol=0.0)
    return a == b


# --- escenarios incorporados --------------------------------------------

# ruido efectivo de los escenarios del gusano: σ de un disparo tras el lock-in ≈ 2.9 nT,
# SNR de un disparo ≈ 1.2 con la amplitud de 3.6 nT que deja el peine
ETA_GUSANO = 46e-12


def _worm_excised() -> Scenario:
    return Scenario(
        name="worm_excised",
        species="worm",
        axon=AxonParams(r_a=172e-6, rho=300e-6, sigma=1.47, v_c=12.0),
        template=WORM_TEMPLATE,
        noise=NoiseBudget(eta_measured=ETA_GUSANO),
        run=RunSettings(n_avg=150, f_stim=0.4, seed=20161, target_slew=540.0, n_sets=4),
    )


def _worm_whole() -> Scenario:
    base = _worm_excised()
    return base.replace(
        name="worm_whole",
        axon=base.axon.replace(rho=1.2e-3),
        run=dataclasses.replace(base.run, seed=20162, jitter=0.5e-3),
    )


def _squid_excised() -> Scenario:
    return Scenario(
        name="squid_excised",
        species="squid",
        axon=AxonParams(r_a=250e-6, rho=300e-6, sigma=1.47, v_c=20.0),
        template=SQUID_TEMPLATE,
        run=RunSettings(n_avg=375, f_stim=25.0, seed=20163, trial_duration=0.03, onset=0.01),
    )


def _purkinje_r2um() -> Scenario:
    return Scenario(
        name="purkinje_r2um",
        species="mammal",
        axon=AxonParams(r_a=2e-6, rho=2e-6, sigma=0.66, v_c=0.25),
        template=ApTemplate(resting_potential=-0.065, peak_amplitude=0.1, rise_time=0.3e-3,
                            fall_time=0.6e-3, duration=2e-3),
        run=RunSettings(n_avg=1, f_stim=10.0, seed=20164, trial_duration=0.03, onset=0.01,
                        target_slew=339.0, slew_metric="max"),
    )


BUILTINS: Dict[str, Callable[[], Scenario]] = {
    "worm_excised": _worm_excised,
    "worm_whole": _worm_whole,
    "squid_excised": _squid_excised,
    "purkinje_r2um": _purkinje_r2um,
}


def builtin(nombre: str) -> Scenario:
    if nombre not in BUILTINS:
        raise ErrorConfiguracion(f"escenario incorporado desconocido: {nombre!r}. "
                                 f"Disponibles: {', '.join(BUILTINS)}")
    return BUILTINS[nombre]()


# --- YAML ----------------------------------------------------------------

def _seccion_a_dict(registro) -> dict:
    return {f.name: getattr(registro, f.name) for f in fields(registro)}


def scenario_to_dict(s: Scenario) -> dict:
    odmr = _seccion_a_dict(s.odmr)
    for clave_hz, clave in _ODMR_HZ.items():
        odmr[clave_hz] = odmr.pop(clave) / (2 * math.pi)
    ruido = _seccion_a_dict(s.noise)
    ruido.pop("photon_rate")
    return {
        "name": s.name,
        "species": s.species,
        "axon": _seccion_a_dict(s.axon),
        "template": _seccion_a_dict(s.template),
        "odmr": odmr,
        "lockin": _seccion_a_dict(s.lockin),
        "noise": ruido,
        "digitizer": _seccion_a_dict(s.digitizer),
        "run": _seccion_a_dict(s.run),
    }


def dump_scenario(s: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(s), sort_keys=False, allow_unicode=True)


def _lineas_claves(texto: str) -> Dict[tuple, int]:
    """Línea (1-based) de cada clave, por ruta (sección, clave)"""
    lineas = {}
    raiz = yaml.compose(texto)
    if not isinstance(raiz, yaml.MappingNode):
        return lineas
    for clave, valor in raiz.value:
        lineas[(clave.value,)] = clave.start_mark.line + 1
        if isinstance(valor, yaml.MappingNode):
            for subclave, _ in valor.value:
                lineas[(clave.value, subclave.value)] = subclave.start_mark.line + 1
    return lineas


_TIPOS = {
    "axon": AxonParams,
    "template": ApTemplate,
    "odmr": OdmrParams,
    "lockin": LockInConfig,
    "noise": NoiseBudget,
    "digitizer": DigitizerConfig,
    "run": RunSettings,
}

_ENTEROS = {"rolloff_stages", "slope_sign", "bits", "n_avg", "seed", "n_sets"}
_TEXTOS = {"direction", "slew_metric"}
_BOOLEANOS = {"with_noise"}


def _convertir(seccion: str, clave: str, valor, linea: Optional[int]):
    if valor is None:
        return None
    if clave in _BOOLEANOS:
        if not isinstance(valor, bool):
            raise ErrorConfiguracion(f"{seccion}.{clave} debe ser true o false", linea)
        return valor
    if clave in _TEXTOS:
        if not isinstance(valor, str):
            raise ErrorConfiguracion(f"{seccion}.{clave} debe ser texto", linea)
        return valor
    if isinstance(valor, bool) or not isinstance(valor, (int, float)):
        raise ErrorConfiguracion(f"{seccion}.{clave} debe ser numérico, se leyó {valor!r}", linea)
    if clave in _ENTEROS:
        if float(valor) != int(valor):
            raise ErrorConfiguracion(f"{seccion}.{clave} debe ser entero", linea)
        return int(valor)
    return float(valor)


def _construir_seccion(seccion: str, datos, lineas: dict):
    linea_seccion = lineas.get((seccion,))
    if not isinstance(datos, dict):
        raise ErrorConfiguracion(f"la sección {seccion!r} debe ser un mapeo", linea_seccion)
    tipo = _TIPOS[seccion]
    validas = {f.name for f in fields(tipo)}
    if seccion == "odmr":
        validas = (validas - set(_ODMR_HZ.values())) | set(_ODMR_HZ)
    if seccion == "noise":
        validas.discard("photon_rate")
    argumentos = {}
    for clave, valor in datos.items():
        linea = lineas.get((seccion, clave), linea_seccion)
        if clave not in validas:
            raise ErrorConfiguracion(f"clave desconocida {seccion}.{clave}", linea)
        valor = _convertir(seccion, clave, valor, linea)
        if clave in _ODMR_HZ:
            clave, valor = _ODMR_HZ[clave], None if valor is None else 2 * math.pi * valor
        argumentos[clave] = valor
    try:
        return tipo(**argumentos)
    except ErrorMagnetometro as error:
        raise ErrorConfiguracion(f"sección {seccion}: {error}", linea_seccion)


def parse_scenario(texto: str) -> Scenario:
    try:
        datos = yaml.safe_load(texto)
        lineas = _lineas_claves(texto)
    except yaml.YAMLError as error:
        marca = getattr(error, "problem_mark", None)
        linea = marca.line + 1 if marca is not None else None
        raise ErrorConfiguracion(f"YAML inválido: {getattr(error, 'problem', error)}", linea)
    if not isinstance(datos, dict):
        raise ErrorConfiguracion("el archivo de escenario debe ser un mapeo de secciones", 1)
    argumentos = {}
    for clave, valor in datos.items():
        linea = lineas.get((clave,))
        if clave in ("name", "species"):
            if not isinstance(valor, str):
                raise ErrorConfiguracion(f"{clave} debe ser texto", linea)
            argumentos[clave] = valor
        elif clave in _TIPOS:
            argumentos[clave] = _construir_seccion(clave, valor or {}, lineas)
        else:
            raise ErrorConfiguracion(f"sección desconocida {clave!r}", linea)
    if "name" not in argumentos:
        raise ErrorConfiguracion("falta la clave 'name'", 1)
    try:
        return Scenario(**argumentos)
    except ErrorMagnetometro as error:
        raise ErrorConfiguracion(str(error))


def load_scenario(fuente: Union[str, Path]) -> Scenario:
    """Escenario incorporado por nombre o archivo YAML"""
    if isinstance(fuente, str) and fuente in BUILTINS:
        return builtin(fuente)
    ruta = Path(fuente)
    if not ruta.exists():
        raise ErrorConfiguracion(f"no existe el escenario {fuente!r} (ni archivo ni incorporado)")
    logger.info("leyendo escenario %s", ruta)
    return parse_scenario(ruta.read_text(encoding="utf-8"))


def save_scenario(s: Scenario, ruta: Union[str, Path]) -> Path:
    ruta = Path(ruta)
    ruta.write_text(dump_scenario(s), encoding="utf-8")
    return ruta
