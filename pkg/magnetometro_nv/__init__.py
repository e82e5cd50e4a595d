"""Simulador de magnetometría NV-diamante de potenciales de acción de una neurona."""

from .analysis import (SensitivityReport, MatchedTemplate, align_and_average, build_template,
                       comb_filter, matched_filter, sensitivity_method1, sensitivity_method2,
                       sensitivity_method3, snr)
from .errores import (ErrorConfiguracion, ErrorDatos, ErrorDominio, ErrorMagnetometro,
                      ErrorSingular, ErrorUnidades, ErrorVerificacion)
from .escenarios import Scenario, builtin, load_scenario
from .neuro_source import ApTemplate, AxonParams, ap_field_from_voltage, scaling_constant
from .nv_geometry import BiasField, NvAxes, project_field
from .odmr import OdmrParams, lia_dispersion, small_signal_gain
from .sensor_chain import (DigitizerConfig, LockInConfig, NoiseBudget, calibrate,
                           synthesize_measurement, volts_to_field)
from .trazas import TimeTrace, load_trace, save_trace

__version__ = "0.1.0"
