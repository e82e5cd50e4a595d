"""Ejecución de escenarios, verificaciones sistemáticas y la interfaz de línea de comandos.

Códigos de salida: 0 éxito, 2 error de configuración, 3 verificación
fallida, 1 cualquier otro error del simulador.
"""

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from . import analysis, escenarios, neuro_source, reportes, sensor_chain
from .errores import ErrorConfiguracion, ErrorMagnetometro, ErrorVerificacion
from .escenarios import Scenario
from .nv_geometry import bias_for_projection
from .trazas import TimeTrace, load_trace

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_CHECK = 3

# campo de la bobina de calibración y parámetros de la bobina
B_TEST = 1.8e-9
N_SPINS = 8e11
T2_STAR = 450e-9

# márgenes de las ventanas de señal y de ruido (s)
_MARGEN_SENAL = 0.3e-3
_SEPARACION_RUIDO = 5e-3


@dataclass
class ScenarioBundle:
    """Resultado de un escenario; snr corresponde al primer conjunto promediado

    expected es el promedio filtrado sin ruido y set_snr la SNR de cada
    conjunto de n_avg ensayos.
    """

    name: str
    true_field: TimeTrace
    measured: TimeTrace
    averaged: TimeTrace
    filtered: TimeTrace
    snr: analysis.SnrResult
    c_lia: float
    signal_window: Tuple[float, float]
    quiet_window: Tuple[float, float]
    expected: Optional[TimeTrace] = None
    set_snr: List[analysis.SnrResult] = field(default_factory=list)
    matched_snr: List[float] = field(default_factory=list)

    @property
    def p2p_true(self) -> float:
        return float(np.ptp(self.true_field.samples))

    @property
    def peak_true(self) -> float:
        return float(np.max(np.abs(self.true_field.samples)))

    def report_tree(self) -> dict:
        arbol = {
            "scenario": self.name,
            "field": {
                "p2p_true_nT": self.p2p_true * 1e9,
                "peak_true_nT": self.peak_true * 1e9,
                "p2p_filtered_nT": float(np.ptp(self.filtered.window(*self.signal_window))) * 1e9,
                "direction": neuro_source.leading_lobe_direction(self.true_field),
            },
            "snr": {
                "metric": self.snr.metric,
                "n_avg": self.snr.n_avg,
                "snr_avg": self.snr.snr_avg,
                "snr_single": self.snr.snr_single,
                "detected": self.snr.detected,
                "snr_single_sets": [float(r.snr_single) for r in self.set_snr],
            },
            "calibration": {"c_lia_T_per_V": self.c_lia},
        }
        if self.matched_snr:
            arbol["matched_filter"] = {
                "n_sets": len(self.matched_snr),
                "snr": [float(v) for v in self.matched_snr],
            }
        return arbol


def prepare_template(s: Scenario) -> neuro_source.ApTemplate:
    if s.run.target_slew is None:
        return s.template
    return neuro_source.fit_template_slew(s.template, s.run.target_slew,
                                          s.digitizer.sample_rate, s.run.slew_metric)


def _ventanas(b_true: TimeTrace, duracion: float) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    """Ventana de señal alrededor del pulso y la ventana sin señal más larga"""
    x = np.abs(b_true.samples)
    activos = np.flatnonzero(x > 0.01 * np.max(x)) if np.max(x) > 0 else np.array([0, 0])
    t = b_true.times
    inicio = max(t[0], t[activos[0]] - _MARGEN_SENAL)
    fin = min(t[-1], t[activos[-1]] + _MARGEN_SENAL)
    despues = (fin + _SEPARACION_RUIDO, duracion - 1e-3)
    antes = (1e-3, inicio - _SEPARACION_RUIDO)
    quieta = max((despues, antes), key=lambda v: v[1] - v[0])
    if quieta[1] - quieta[0] <= 0:
        raise ErrorConfiguracion("el ensayo es demasiado corto para tener una ventana sin señal")
    return (inicio, fin), quieta


def expected_average(b_true: TimeTrace, s: Scenario, c_lia: float,
                     extra_notches: Sequence[float] = ()) -> TimeTrace:
    """El promedio que se obtendría sin ruido: cadena del sensor, calibración y peine"""
    v = sensor_chain.synthesize_measurement(b_true, s.odmr, s.lockin, s.noise,
                                            digitizer=s.digitizer, with_noise=False)
    esperada = analysis.comb_filter(sensor_chain.volts_to_field(v, c_lia),
                                    extra_notches=extra_notches)
    return esperada.with_samples(esperada.samples, name="B_esperado")


def analyze_average(averaged: TimeTrace, signal_window, quiet_window, n_avg: int,
                    extra_notches: Sequence[float] = (),
                    reference: TimeTrace = None) -> Tuple[TimeTrace, analysis.SnrResult]:
    filtrada = analysis.comb_filter(averaged, extra_notches=extra_notches)
    filtrada = filtrada.with_samples(filtrada.samples, name=f"{averaged.name}_filtrada")
    return filtrada, analysis.snr(filtrada, signal_window, quiet_window, n_avg,
                                  reference=reference)


def run_scenario(s: Scenario) -> ScenarioBundle:
    """Simula n_avg·n_sets ensayos, promedia, filtra y calcula la SNR

    Cada ensayo usa una semilla derivada de s.seed, así el resultado es
    reproducible bit a bit.
    """
    fs = s.digitizer.sample_rate
    run = s.run
    plantilla = prepare_template(s)
    c_lia = sensor_chain.calibrate(s.odmr, s.lockin, s.noise)
    n_total = run.n_avg * run.n_sets
    semillas = np.random.SeedSequence(run.seed).spawn(n_total + 1)
    jitter = np.random.default_rng(semillas[-1]).integers(
        -int(run.jitter * fs), int(run.jitter * fs) + 1, n_total) if run.jitter > 0 else np.zeros(n_total, int)
    logger.info("escenario %s: %d ensayos de %.3g s", s.name, n_total, run.trial_duration)

    phi_base = neuro_source.synth_ap_waveform(plantilla, fs, onset=run.onset, total=run.trial_duration)
    medidas, disparos = [], []
    b_true = medida_0 = None
    for i in range(n_total):
        phi = phi_base if jitter[i] == 0 else phi_base.with_samples(np.roll(phi_base.samples, jitter[i]))
        campo = neuro_source.ap_field_from_voltage(phi, s.axon)
        voltios = sensor_chain.synthesize_measurement(
            campo, s.odmr, s.lockin, s.noise, seed=semillas[i], digitizer=s.digitizer,
            with_noise=run.with_noise)
        if i == 0:
            b_true, medida_0 = campo, voltios
        medidas.append(sensor_chain.volts_to_field(voltios, c_lia))
        if run.jitter > 0:
            disparos.append(neuro_source.extracellular_trigger(phi))

    ventana_senal, ventana_quieta = _ventanas(b_true, run.trial_duration)
    esperada = expected_average(b_true, s, c_lia)
    modo = "extremum" if run.jitter > 0 else "onset"
    promedios, snr_conjuntos = [], []
    for j in range(run.n_sets):
        tramo = slice(j * run.n_avg, (j + 1) * run.n_avg)
        promedio = analysis.align_and_average(medidas[tramo], disparos[tramo] or None, mode=modo)
        filtrada_j, resultado_j = analyze_average(promedio, ventana_senal, ventana_quieta,
                                                  run.n_avg, reference=esperada)
        promedios.append(promedio)
        snr_conjuntos.append(resultado_j)
        if j == 0:
            filtrada, resultado = filtrada_j, resultado_j

    snr_adaptado = []
    if run.n_sets > 1:
        alineadas = analysis.align_traces(medidas, disparos or None, mode=modo).trazas
        h = analysis.build_template(alineadas)
        fin_mf = min(ventana_senal[1] + h.window + _MARGEN_SENAL, ventana_quieta[0] - 1e-3)
        y_esperada = analysis.matched_filter(esperada, h)
        for promedio in promedios:
            y = analysis.matched_filter(analysis.comb_filter(promedio), h)
            snr_adaptado.append(analysis.snr(y, (ventana_senal[0], fin_mf), ventana_quieta,
                                             run.n_avg, metric="peak",
                                             reference=y_esperada).snr_avg)
    logger.info("escenario %s: SNR = %.3g (un disparo %.3g)", s.name, resultado.snr_avg,
                resultado.snr_single)
    return ScenarioBundle(name=s.name, true_field=b_true, measured=medida_0,
                          averaged=promedios[0], filtered=filtrada, snr=resultado, c_lia=c_lia,
                          signal_window=ventana_senal, quiet_window=ventana_quieta,
                          expected=esperada, set_snr=snr_conjuntos, matched_snr=snr_adaptado)


# --- verificaciones sistemáticas -----------------------------------------

def run_checks(s: Scenario = None) -> List[dict]:
    """Una fila por inversión: esperado, observado y si se cumple exactamente

    Todas se evalúan sin ruido y con la C_LIA de la configuración de
    referencia.
    """
    s = s or escenarios.builtin("worm_excised")
    fs = s.digitizer.sample_rate
    phi = neuro_source.synth_ap_waveform(prepare_template(s), fs, onset=s.run.onset,
                                         total=s.run.trial_duration)
    campo = neuro_source.ap_field_from_voltage(phi, s.axon)
    c_lia = sensor_chain.calibrate(s.odmr, s.lockin, s.noise)

    def recuperar(b, lockin=None, bias=None):
        v = sensor_chain.synthesize_measurement(b, s.odmr, lockin or s.lockin, s.noise, seed=s.seed,
                                                digitizer=s.digitizer, bias=bias, with_noise=False)
        return sensor_chain.volts_to_field(v, c_lia).samples

    base = recuperar(campo)
    disparo = neuro_source.extracellular_trigger(phi)
    filas = [
        ("source off", "B_meas -> 0", recuperar(campo.scaled(0.0)), np.zeros_like(base)),
        ("slope sign flip", "B_meas -> -B_meas",
         recuperar(campo, lockin=s.lockin.replace(slope_sign=-s.lockin.slope_sign)), -base),
        ("demodulation phase +180 deg", "B_meas -> -B_meas",
         recuperar(campo, lockin=s.lockin.replace(phase_deg=s.lockin.phase_deg + 180.0)), -base),
        ("B0 reversal", "B_meas -> -B_meas",
         recuperar(campo, bias=bias_for_projection().reversed()), -base),
    ]
    resultado = []
    for nombre, esperado, observado, referencia in filas:
        resultado.append({
            "check": nombre,
            "expected": esperado,
            "max_deviation_T": float(np.max(np.abs(observado - referencia))),
            "passed": bool(np.array_equal(observado, referencia)),
        })
    # el electrodo solo cambia el signo del registro extracelular: alinear dos
    # ensayos desplazados por el mínimo del disparo invertido debe dar el mismo
    # promedio que por el máximo del original, y ese promedio es el campo sin desplazar
    medido = campo.with_samples(base)
    desplazamientos = (0, -7)
    ensayos = [medido.with_samples(np.roll(base, k)) for k in desplazamientos]
    disparos = [disparo.with_samples(np.roll(disparo.samples, k)) for k in desplazamientos]
    original = analysis.align_and_average(ensayos, disparos, extremo="max").samples
    invertido = analysis.align_and_average(ensayos, [d.scaled(-1.0) for d in disparos],
                                           extremo="min").samples
    resultado.append({
        "check": "electrode placement",
        "expected": "B_meas unchanged, trigger inverted",
        "max_deviation_T": float(np.max(np.abs(invertido - base))),
        "passed": bool(np.array_equal(invertido, original) and np.array_equal(invertido, base)),
    })
    for fila in resultado:
        logger.info("%-28s %s", fila["check"], "ok" if fila["passed"] else "FALLA")
    return resultado


# --- sensibilidad --------------------------------------------------------

def _ensayo(argumentos) -> TimeTrace:
    campo, s, semilla, c_lia = argumentos
    v = sensor_chain.synthesize_measurement(campo, s.odmr, s.lockin, s.noise, seed=semilla,
                                            digitizer=s.digitizer)
    return sensor_chain.volts_to_field(v, c_lia)


def generate_trials(campo: TimeTrace, s: Scenario, semillas, c_lia: float,
                    jobs: int = 1) -> List[TimeTrace]:
    tareas = [(campo, s, semilla, c_lia) for semilla in semillas]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as grupo:
            return list(grupo.map(_ensayo, tareas, chunksize=max(1, len(tareas) // (4 * jobs))))
    return [_ensayo(t) for t in tareas]


def theoretical_budget(noise: sensor_chain.NoiseBudget = None) -> Dict[str, float]:
    noise = noise or sensor_chain.NoiseBudget()
    shot, cw, completo = sensor_chain.noise_budget_chain(noise)
    return {
        "eta_shot": shot,
        "eta_shot_ref_slope": cw,
        "eta_full": completo,
        "eta_q": sensor_chain.spin_projection_limit(N_SPINS, T2_STAR),
        "ramsey_improvement": sensor_chain.ramsey_improvement(noise),
    }


def report_sensitivity(s: Scenario, methods: Iterable[str] = ("eta1", "eta2", "eta3"),
                       n_trials: int = 150, t_trial: float = 1.0, b_test: float = B_TEST,
                       f_test: float = analysis.F_TEST, band: Tuple[float, float] = analysis.BANDA,
                       jobs: int = 1) -> analysis.SensitivityReport:
    """Estimadores pedidos sobre ensayos simulados con y sin tono de prueba"""
    methods = set(methods)
    desconocidos = methods - set(analysis.METODOS)
    if desconocidos:
        raise ErrorConfiguracion(f"métodos desconocidos: {sorted(desconocidos)}")
    fs = s.digitizer.sample_rate
    c_lia = sensor_chain.calibrate(s.odmr, s.lockin, s.noise)
    semillas = np.random.SeedSequence(s.seed).spawn(2 * n_trials)
    estimadores = {
        "eta1": analysis.MetodoProyeccion(b_test, f_test),
        "eta2": analysis.MetodoEspectral(b_test, f_test, band),
        "eta3": analysis.MetodoRms(s.lockin.enbw),
    }
    con_tono = sin_tono = None
    etas = {}
    for nombre in sorted(methods):
        estimador = estimadores[nombre]
        if estimador.USA_TONO:
            if con_tono is None:
                tono = sensor_chain.sine_test_field(b_test, f_test, t_trial, fs)
                con_tono = generate_trials(tono, s, semillas[:n_trials], c_lia, jobs)
            etas[nombre] = estimador.estimar(con_tono)
        else:
            if sin_tono is None:
                cero = TimeTrace(np.zeros(int(round(t_trial * fs))), fs, "tesla", "B_cero")
                sin_tono = generate_trials(cero, s, semillas[n_trials:], c_lia, jobs)
            etas[nombre] = estimador.estimar(sin_tono)
        logger.info("%s = %.3g pT/√Hz", nombre, etas[nombre] * 1e12)
    return analysis.SensitivityReport(n_trials=n_trials, t_trial=t_trial, band=tuple(band),
                                      theoretical=theoretical_budget(s.noise), **etas)


def detect(trace: TimeTrace, expected: TimeTrace,
           threshold: float = analysis.DETECTION_THRESHOLD) -> dict:
    """Filtro adaptado con la señal esperada; SNR = pico / σ fuera del pico"""
    h = analysis.build_template([expected.with_samples(expected.samples, unit="tesla")])
    y = analysis.matched_filter(trace, h)
    salida = np.abs(y.samples)
    pico = int(np.argmax(salida))
    fuera = np.ones(salida.size, dtype=bool)
    fuera[max(0, pico - 2 * len(h)):pico + 2 * len(h)] = False
    sigma = float(np.std(y.samples[fuera])) if np.any(fuera) else 0.0
    valor = float(salida[pico] / sigma) if sigma > 0 else float("inf")
    return {"peak_time_s": float(y.times[pico]), "snr": valor, "detected": valor >= threshold,
            "template_low_energy": h.low_energy}


# --- interfaz ------------------------------------------------------------

def _run_fuente(fuente: str) -> ScenarioBundle:
    return run_scenario(escenarios.load_scenario(fuente))


def _cmd_simulate(args) -> int:
    if args.jobs > 1 and len(args.scenarios) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as grupo:
            paquetes = list(grupo.map(_run_fuente, args.scenarios))
    else:
        paquetes = [_run_fuente(f) for f in args.scenarios]
    for paquete in paquetes:
        arbol = paquete.report_tree()
        print(reportes.render(arbol, args.format))
        if args.out:
            destino = reportes.write_bundle(args.out, paquete.name,
                                            [paquete.true_field, paquete.measured,
                                             paquete.averaged, paquete.filtered, paquete.expected],
                                            arbol, args.format)
            if args.plot:
                from . import graficas
                graficas.plot_bundle(paquete, destino / f"{paquete.name}.png")
    return EXIT_OK


def _cmd_sensitivity(args) -> int:
    s = escenarios.load_scenario(args.scenario)
    metodos = [m.strip() for m in args.methods.split(",") if m.strip()]
    informe = report_sensitivity(s, metodos, n_trials=args.trials, t_trial=args.trial_duration,
                                 jobs=args.jobs)
    print(reportes.render(informe.as_dict(), args.format))
    return EXIT_OK


def _cmd_detect(args) -> int:
    traza = load_trace(args.trace)
    esperada = load_trace(args.template)
    resultado = detect(traza, esperada, args.threshold)
    print(reportes.render(resultado, args.format))
    return EXIT_OK


def _cmd_checks(args) -> int:
    filas = run_checks(escenarios.load_scenario(args.scenario))
    print(f"{'verificación':<30}{'esperado':<36}{'desviación máx (T)':<20}resultado")
    for fila in filas:
        print(f"{fila['check']:<30}{fila['expected']:<36}{fila['max_deviation_T']:<20.3g}"
              f"{'ok' if fila['passed'] else 'FALLA'}")
    if not all(f["passed"] for f in filas):
        raise ErrorVerificacion("al menos una verificación sistemática falló")
    return EXIT_OK


def _cmd_dump_builtin(args) -> int:
    texto = escenarios.dump_scenario(escenarios.builtin(args.name))
    if args.output:
        Path(args.output).write_text(texto, encoding="utf-8")
    else:
        print(texto, end="")
    return EXIT_OK


def _cmd_report(args) -> int:
    paquete = run_scenario(escenarios.load_scenario(args.scenario))
    print(reportes.render(paquete.report_tree(), args.format))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="magnetometro_nv",
        description="Simulador de magnetometría NV de potenciales de acción")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="más mensajes (-v info, -vv depuración)")
    sub = parser.add_subparsers(dest="comando", required=True)

    p = sub.add_parser("simulate", help="ejecuta uno o más escenarios")
    p.add_argument("scenarios", nargs="+", help="archivo YAML o nombre incorporado")
    p.add_argument("--jobs", type=int, default=1, help="procesos en paralelo")
    p.add_argument("--out", type=Path, help="directorio para trazas e informes")
    p.add_argument("--plot", action="store_true", help="guarda una figura PNG (requiere --out)")
    p.add_argument("--format", choices=reportes.FORMATOS, default="text")
    p.set_defaults(funcion=_cmd_simulate)

    p = sub.add_parser("sensitivity", help="estima η por los tres métodos")
    p.add_argument("scenario")
    p.add_argument("--methods", default="eta1,eta2,eta3")
    p.add_argument("--trials", type=int, default=150)
    p.add_argument("--trial-duration", type=float, default=1.0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--format", choices=reportes.FORMATOS, default="text")
    p.set_defaults(funcion=_cmd_sensitivity)

    p = sub.add_parser("detect", help="filtro adaptado sobre una traza guardada")
    p.add_argument("trace")
    p.add_argument("--template", required=True, help="traza de la señal esperada")
    p.add_argument("--threshold", type=float, default=analysis.DETECTION_THRESHOLD)
    p.add_argument("--format", choices=reportes.FORMATOS, default="text")
    p.set_defaults(funcion=_cmd_detect)

    p = sub.add_parser("checks", help="verificaciones sistemáticas por inversión")
    p.add_argument("--scenario", default="worm_excised")
    p.set_defaults(funcion=_cmd_checks)

    p = sub.add_parser("dump-builtin", help="escribe un escenario incorporado en YAML")
    p.add_argument("name", choices=sorted(escenarios.BUILTINS))
    p.add_argument("-o", "--output", type=Path)
    p.set_defaults(funcion=_cmd_dump_builtin)

    p = sub.add_parser("report", help="informe de un escenario")
    p.add_argument("scenario")
    p.add_argument("--format", choices=reportes.FORMATOS, default="text")
    p.set_defaults(funcion=_cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    nivel = {0: logging.WARNING, 1: logging.INFO}.get(args.verbose, logging.DEBUG)
    logging.basicConfig(level=nivel, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.funcion(args)
    except ErrorConfiguracion as error:
        print(f"Error de configuración: {error}", file=sys.stderr)
        return EXIT_CONFIG
    except ErrorVerificacion as error:
        print(f"Verificación fallida: {error}", file=sys.stderr)
        return EXIT_CHECK
    except ErrorMagnetometro as error:
        print(f"Error: {error}", file=sys.stderr)
        return EXIT_ERROR
