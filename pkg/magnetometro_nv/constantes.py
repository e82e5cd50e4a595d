"""Constantes físicas compartidas por todos los módulos."""

import math
from dataclasses import dataclass

from scipy import constants as sc


@dataclass(frozen=True)
class ConstantesFisicas:
    """Registro único de constantes (unidades SI)"""

    mu0: float = sc.mu_0
    h: float = sc.h
    hbar: float = sc.hbar
    q: float = sc.e
    k_b: float = sc.k
    g_e: float = abs(sc.physical_constants["electron g factor"][0])
    mu_b: float = sc.physical_constants["Bohr magneton"][0]
    # desdoblamiento a campo cero del estado base del NV
    d_zfs_hz: float = 2.87e9
    temperatura_ambiente: float = 290.0

    @property
    def gamma(self) -> float:
        """Razón giromagnética g_e μ_B / ħ en s⁻¹ T⁻¹ (≈ 1.761e11)"""
        return self.g_e * self.mu_b / self.hbar

    @property
    def gamma_hz(self) -> float:
        """g_e μ_B / h en Hz/T"""
        return self.g_e * self.mu_b / self.h

    @property
    def omega_zfs(self) -> float:
        return 2 * math.pi * self.d_zfs_hz


CONSTANTES = ConstantesFisicas()

GAMMA = CONSTANTES.gamma
MU0 = CONSTANTES.mu0
H = CONSTANTES.h
HBAR = CONSTANTES.hbar
Q_E = CONSTANTES.q
K_B = CONSTANTES.k_b
G_E_MU_B = CONSTANTES.g_e * CONSTANTES.mu_b

# ángulo tetraédrico de enlace del diamante, arccos(-1/3)
TETRAHEDRAL_ANGLE = math.acos(-1.0 / 3.0)
