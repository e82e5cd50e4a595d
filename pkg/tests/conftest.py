import numpy as np
import pytest

from magnetometro_nv.escenarios import Scenario, RunSettings
from magnetometro_nv.neuro_source import WORM_TEMPLATE, AxonParams, synth_ap_waveform
from magnetometro_nv.odmr import OdmrParams
from magnetometro_nv.sensor_chain import LockInConfig, NoiseBudget
from magnetometro_nv.trazas import TimeTrace


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def odmr():
    return OdmrParams()


@pytest.fixture
def lockin():
    return LockInConfig()


@pytest.fixture
def ruido():
    return NoiseBudget()


@pytest.fixture
def phi_gusano():
    return synth_ap_waveform(WORM_TEMPLATE, 250e3, onset=5e-3, total=20e-3)


@pytest.fixture
def axon():
    return AxonParams(r_a=172e-6, rho=300e-6, sigma=1.47, v_c=12.0)


@pytest.fixture
def escenario_corto():
    """Escenario de pocos ensayos para pruebas rápidas del flujo completo"""
    return Scenario(name="corto", run=RunSettings(n_avg=20, f_stim=0.4, seed=7,
                                                  trial_duration=0.05, onset=0.02))


def ruido_blanco(rng, eta, fs, n):
    """Ruido blanco en campo con densidad unilateral eta (T/√Hz)"""
    return rng.normal(0.0, eta * np.sqrt(fs / 2), n)


def traza(muestras, fs=250e3, unidad="tesla", nombre=""):
    return TimeTrace(np.asarray(muestras, dtype=float), fs, unidad, nombre)
