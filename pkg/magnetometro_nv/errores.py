"""Jerarquía de excepciones del paquete."""

import math
from typing import Optional


class ErrorMagnetometro(Exception):
    """Clase base para todos los errores del simulador"""


class ErrorDominio(ErrorMagnetometro, ValueError):
    """Parámetro fuera de su dominio válido"""


class ErrorSingular(ErrorDominio):
    """Configuración singular (pendiente nula, Δt nulo, σ nula...)"""


class ErrorUnidades(ErrorMagnetometro, ValueError):
    """La traza no tiene la unidad que requiere la operación"""


class ErrorDatos(ErrorMagnetometro, ValueError):
    """Datos insuficientes o inutilizables"""


class ErrorConfiguracion(ErrorMagnetometro):
    """Error en un archivo de escenario, con la línea si se conoce"""

    def __init__(self, mensaje: str, linea: Optional[int] = None):
        self.mensaje = mensaje
        self.linea = linea
        if linea is not None:
            mensaje = f"línea {linea}: {mensaje}"
        super().__init__(mensaje)


class ErrorVerificacion(ErrorMagnetometro):
    """Una verificación sistemática no se cumplió"""


def verificar_finito(valor: float, nombre: str) -> float:
    """Devuelve el valor como float o lanza ErrorDominio si no es finito"""
    try:
        valor = float(valor)
    except (TypeError, ValueError):
        raise ErrorDominio(f"{nombre} debe ser numérico, se recibió {valor!r}")
    if not math.isfinite(valor):
        raise ErrorDominio(f"{nombre} debe ser finito, se recibió {valor}")
    return valor


def verificar_positivo(valor: float, nombre: str) -> float:
    valor = verificar_finito(valor, nombre)
    if valor <= 0:
        raise ErrorDominio(f"{nombre} debe ser positivo, se recibió {valor}")
    return valor
