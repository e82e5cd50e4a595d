"""Informes jerárquicos (texto clave/valor o JSON) y archivos de datos para gráficas."""

import json
import logging
from pathlib import Path
from typing import Iterable, Mapping, Union

import numpy as np

from .errores import ErrorConfiguracion
from .trazas import TimeTrace, save_trace

logger = logging.getLogger(__name__)

FORMATOS = ("text", "json")


def _limpiar(valor):
    """Convierte tipos de numpy y tuplas a tipos serializables"""
    if isinstance(valor, Mapping):
        return {str(k): _limpiar(v) for k, v in valor.items()}
    if isinstance(valor, (list, tuple)):
        return [_limpiar(v) for v in valor]
    if isinstance(valor, np.generic):
        return valor.item()
    if isinstance(valor, np.ndarray):
        return valor.tolist()
    return valor


def _formatear(valor) -> str:
    if isinstance(valor, float):
        return f"{valor:.6g}"
    if isinstance(valor, list):
        return "[" + ", ".join(_formatear(v) for v in valor) + "]"
    if valor is None:
        return "null"
    return str(valor)


def render_text(arbol: Mapping, sangria: int = 0) -> str:
    """Árbol clave: valor, con dos espacios por nivel"""
    lineas = []
    for clave, valor in _limpiar(arbol).items():
        prefijo = "  " * sangria
        if isinstance(valor, dict):
            lineas.append(f"{prefijo}{clave}:")
            lineas.append(render_text(valor, sangria + 1))
        else:
            lineas.append(f"{prefijo}{clave}: {_formatear(valor)}")
    return "\n".join(l for l in lineas if l)


def render(arbol: Mapping, formato: str = "text") -> str:
    if formato not in FORMATOS:
        raise ErrorConfiguracion(f"formato de informe no reconocido: {formato!r}. "
                                 f"Use uno de: {list(FORMATOS)}")
    if formato == "json":
        return json.dumps(_limpiar(arbol), indent=2, ensure_ascii=False)
    return render_text(arbol)


def parse_text(texto: str) -> dict:
    """Lee un árbol escrito por render_text (los valores quedan como texto)"""
    raiz: dict = {}
    pila = [(-1, raiz)]
    for numero, linea in enumerate(texto.splitlines(), start=1):
        if not linea.strip():
            continue
        nivel = (len(linea) - len(linea.lstrip(" "))) // 2
        if ":" not in linea:
            raise ErrorConfiguracion("línea de informe sin ':'", numero)
        clave, valor = linea.strip().split(":", 1)
        while pila[-1][0] >= nivel:
            pila.pop()
        padre = pila[-1][1]
        if valor.strip():
            padre[clave] = valor.strip()
        else:
            padre[clave] = {}
            pila.append((nivel, padre[clave]))
    return raiz


def save_report(arbol: Mapping, ruta: Union[str, Path], formato: str = "text") -> Path:
    ruta = Path(ruta)
    ruta.write_text(render(arbol, formato) + "\n", encoding="utf-8")
    return ruta


def save_plot_data(ruta: Union[str, Path], x, y, encabezado: str = "x,y") -> Path:
    """Columnas (x, y) para reproducir una figura sin depender de matplotlib"""
    ruta = Path(ruta)
    np.savetxt(ruta, np.column_stack([x, y]), fmt="%.17g", delimiter=",", header=encabezado)
    return ruta


def write_bundle(directorio: Union[str, Path], nombre: str, trazas: Iterable[TimeTrace],
                 arbol: Mapping, formato: str = "text") -> Path:
    """Escribe trazas, informe y datos de gráficas de un escenario en directorio/nombre"""
    destino = Path(directorio) / nombre
    destino.mkdir(parents=True, exist_ok=True)
    for traza in trazas:
        save_trace(traza, destino / f"{traza.name}.csv")
        save_plot_data(destino / f"{traza.name}.plot.csv", traza.times * 1e3, traza.samples,
                       encabezado=f"t_ms,{traza.unit}")
    extension = "json" if formato == "json" else "txt"
    save_report(arbol, destino / f"informe.{extension}", formato)
    logger.info("resultados de %s escritos en %s", nombre, destino)
    return destino
