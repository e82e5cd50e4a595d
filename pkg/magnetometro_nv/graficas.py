"""Figuras opcionales de un escenario (matplotlib, sin ventana)."""

import logging
from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

logger = logging.getLogger(__name__)


def plot_bundle(paquete, ruta: Union[str, Path]) -> Path:
    """Campo verdadero, promedio y promedio filtrado en nT frente a t en ms"""
    ruta = Path(ruta)
    fig, (ax_verdadero, ax_medido) = plt.subplots(2, 1, figsize=(12, 6), sharex=True)

    t = paquete.true_field.times * 1e3
    ax_verdadero.plot(t, paquete.true_field.samples * 1e9, 'b-', lw=1.5, label='B verdadero')
    ax_verdadero.set_ylabel('B (nT)')
    ax_verdadero.legend(loc='upper right')
    ax_verdadero.grid(True, alpha=0.3)

    ax_medido.plot(paquete.averaged.times * 1e3, paquete.averaged.samples * 1e9, color='0.6',
                   lw=0.8, label=f'promedio (N = {paquete.snr.n_avg})')
    ax_medido.plot(paquete.filtered.times * 1e3, paquete.filtered.samples * 1e9, 'r-', lw=1.2,
                   label='filtrado')
    for limite in paquete.signal_window:
        ax_medido.axvline(limite * 1e3, color='k', ls='--', lw=0.8)
    ax_medido.set_xlabel('t (ms)')
    ax_medido.set_ylabel('B (nT)')
    ax_medido.legend(loc='upper right')
    ax_medido.grid(True, alpha=0.3)

    fig.suptitle(f'{paquete.name}: SNR = {paquete.snr.snr_avg:.3g} '
                 f'(un disparo {paquete.snr.snr_single:.2g})')
    plt.tight_layout()
    fig.savefig(ruta, dpi=120)
    plt.close(fig)
    logger.info("figura guardada en %s", ruta)
    return ruta
