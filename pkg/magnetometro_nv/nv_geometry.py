"""Geometría tetraédrica de los ejes NV, proyección de campos y efecto Zeeman.

Marco de laboratorio fijo: la normal de la cara superior del diamante es +z
y el axón corre a lo largo de +y. Los ejes 1 y 2 quedan en el plano xz
(perpendicular al axón), de modo que un campo de AP en el plano y
perpendicular al axón (dirección x) se proyecta con igual magnitud sobre
ambos y con proyección nula sobre los ejes 3 y 4.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .constantes import CONSTANTES, GAMMA, TETRAHEDRAL_ANGLE
from .errores import ErrorDominio

logger = logging.getLogger(__name__)

# filas: x, y, z del laboratorio expresadas en el marco del cristal
_CRISTAL_A_LAB = np.array([
    [0.0, 1.0, 1.0],
    [0.0, -1.0, 1.0],
    [math.sqrt(2.0), 0.0, 0.0],
]) / math.sqrt(2.0)

_EJES_CRISTAL = np.array([
    [1.0, 1.0, 1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
]) / math.sqrt(3.0)

# campo de sesgo por eje sensor, 7 gauss
B_SESGO_EJE = 7e-4

# régimen Zeeman lineal
B_MAX_LINEAL = 0.01

TOLERANCIA = 1e-12


def _vector(b, nombre: str = "b") -> np.ndarray:
    v = np.asarray(b, dtype=float).reshape(-1)
    if v.size != 3:
        raise ErrorDominio(f"{nombre} debe ser un vector de 3 componentes")
    if not np.all(np.isfinite(v)):
        raise ErrorDominio(f"{nombre} debe tener componentes finitas")
    return v


@dataclass(frozen=True)
class NvAxes:
    """Los cuatro ejes ⟨111⟩ del diamante como vectores unitarios (4x3)"""

    axes: np.ndarray

    def __post_init__(self):
        ejes = np.array(self.axes, dtype=float, copy=True)
        if ejes.shape != (4, 3):
            raise ErrorDominio("se necesitan exactamente cuatro ejes de 3 componentes")
        if np.any(np.abs(np.linalg.norm(ejes, axis=1) - 1.0) > TOLERANCIA):
            raise ErrorDominio("cada eje NV debe tener norma unitaria")
        productos = ejes @ ejes.T
        fuera = productos[~np.eye(4, dtype=bool)]
        if np.any(np.abs(fuera + 1.0 / 3.0) > TOLERANCIA):
            raise ErrorDominio("los ejes NV deben formar el conjunto tetraédrico (producto −1/3)")
        ejes.setflags(write=False)
        object.__setattr__(self, "axes", ejes)

    @classmethod
    def standard(cls) -> "NvAxes":
        """Ejes en el marco de laboratorio descrito en el módulo"""
        return cls(_EJES_CRISTAL @ _CRISTAL_A_LAB.T)

    @property
    def sensing(self) -> Tuple[np.ndarray, np.ndarray]:
        """Los dos ejes perpendiculares al axón"""
        return self.axes[0], self.axes[1]


@dataclass(frozen=True)
class BiasField:
    """Campo de sesgo B₀ en tesla"""

    vector: np.ndarray

    def __post_init__(self):
        v = _vector(self.vector, "BiasField.vector")
        v.setflags(write=False)
        object.__setattr__(self, "vector", v)

    def reversed(self) -> "BiasField":
        return BiasField(-self.vector)


def project_field(b, axes: NvAxes) -> np.ndarray:
    """Proyecciones del campo sobre los cuatro ejes, en el orden de axes"""
    return axes.axes @ _vector(b)


def two_axis_angle_factor() -> float:
    """cos(π/2 − θ_tet/2): factor geométrico por eje (0.8165)

    El doble de contraste por sensar en dos ejes se aplica en sensor_chain.
    """
    return math.cos(math.pi / 2 - TETRAHEDRAL_ANGLE / 2)


def zeeman_resonance(b_proj: float, branch: int = +1) -> float:
    """Frecuencia angular de la transición m_s=0 → m_s=branch

    Válida solo en el régimen lineal |b_proj| < 0.01 T.
    """
    if branch not in (-1, 1):
        raise ErrorDominio("branch debe ser +1 o −1")
    if not math.isfinite(b_proj) or abs(b_proj) >= B_MAX_LINEAL:
        raise ErrorDominio(f"|b_proj| = {b_proj} T fuera del régimen Zeeman lineal")
    return CONSTANTES.omega_zfs + branch * GAMMA * b_proj


def bias_for_projection(b_axis: float = B_SESGO_EJE, axes: NvAxes = None) -> BiasField:
    """Campo de sesgo a lo largo de la bisectriz de los ejes sensores

    Da la misma |proyección| b_axis sobre los ejes 1 y 2 y nula sobre 3 y 4.
    """
    axes = axes or NvAxes.standard()
    e1, e2 = axes.sensing
    bisectriz = e1 - e2
    bisectriz = bisectriz / np.linalg.norm(bisectriz)
    return BiasField(bisectriz * b_axis / float(e1 @ bisectriz))


def sensing_projection(direction, axes: NvAxes = None, bias: BiasField = None) -> float:
    """Desplazamiento (en unidades de γ·B) de las resonancias sensadas

    Se direcciona en cada eje sensor la rama superior (la que sube con el
    sesgo), así las dos resonancias coinciden cerca de 2.89 GHz. Un campo
    unitario en `direction` desplaza ambas por el valor devuelto; invertir
    B₀ cambia la rama direccionada y con ello el signo.
    """
    axes = axes or NvAxes.standard()
    bias = bias or bias_for_projection(axes=axes)
    d = _vector(direction, "direction")
    desplazamientos = []
    for eje in axes.sensing:
        rama = math.copysign(1.0, float(eje @ bias.vector))
        desplazamientos.append(rama * float(eje @ d))
    if not math.isclose(desplazamientos[0], desplazamientos[1], rel_tol=1e-9, abs_tol=1e-12):
        logger.warning("las dos resonancias sensadas se desplazan distinto: %s", desplazamientos)
    return float(np.mean(desplazamientos))
