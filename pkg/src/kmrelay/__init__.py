"""Outage analysis of a harvesting full-duplex decode-and-forward relay over kappa-mu fading."""
from .analytic import (
    Method,
    OutageResult,
    cdf_loopback,
    cdf_product,
    outage,
    outage_nakagami,
    outage_rayleigh,
    outage_rayleigh_highsnr,
    outage_rice,
    outage_unified,
)
from .fading import KappaMuParams, nakagami, rayleigh, rice
from .series import SeriesConvergenceError, SeriesPolicy
from .sysmodel import MonteCarloReport, ParameterError, SystemParams, mc_outage

__all__ = [
    "KappaMuParams", "Method", "MonteCarloReport", "OutageResult", "ParameterError",
    "SeriesConvergenceError", "SeriesPolicy", "SystemParams", "cdf_loopback", "cdf_product",
    "mc_outage", "nakagami", "outage", "outage_nakagami", "outage_rayleigh",
    "outage_rayleigh_highsnr", "outage_rice", "outage_unified", "rayleigh", "rice",
]
