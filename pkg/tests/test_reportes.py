import json

import numpy as np
import pytest

from magnetometro_nv import reportes
from magnetometro_nv.errores import ErrorConfiguracion
from magnetometro_nv.trazas import TimeTrace, load_trace

ARBOL = {
    "scenario": "worm_excised",
    "snr": {"snr_avg": np.float64(14.7), "n_avg": 150, "detected": True},
    "matched_filter": {"snr": (15.1, 14.2)},
    "theoretical": None,
}


def test_texto_con_sangria():
    texto = reportes.render(ARBOL)
    assert "scenario: worm_excised" in texto
    assert "  snr_avg: 14.7" in texto
    assert "  snr: [15.1, 14.2]" in texto
    assert "theoretical: null" in texto


def test_texto_se_relee():
    leido = reportes.parse_text(reportes.render_text(ARBOL))
    assert leido["snr"]["n_avg"] == "150"
    assert leido["snr"]["detected"] == "True"
    assert leido["scenario"] == "worm_excised"


def test_texto_mal_formado():
    with pytest.raises(ErrorConfiguracion) as info:
        reportes.parse_text("a: 1\nsin separador\n")
    assert info.value.linea == 2


def test_json():
    datos = json.loads(reportes.render(ARBOL, "json"))
    assert datos["snr"]["snr_avg"] == 14.7
    assert datos["matched_filter"]["snr"] == [15.1, 14.2]


def test_formato_desconocido():
    with pytest.raises(ErrorConfiguracion):
        reportes.render(ARBOL, "xml")


@pytest.mark.parametrize("formato, archivo", [("text", "informe.txt"), ("json", "informe.json")])
def test_paquete_en_disco(tmp_path, formato, archivo):
    traza = TimeTrace(np.linspace(0.0, 1e-9, 20), 250e3, "tesla", "B_avg")
    destino = reportes.write_bundle(tmp_path, "gusano", [traza], ARBOL, formato)
    assert (destino / archivo).exists()
    assert load_trace(destino / "B_avg.csv") == traza
    datos = np.loadtxt(destino / "B_avg.plot.csv", delimiter=",")
    assert datos.shape == (20, 2)
    assert datos[:, 0] == pytest.approx(traza.times * 1e3)
