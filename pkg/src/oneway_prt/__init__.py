"""Exact one-way partition bound, zero-communication protocols, and one-way
public-coin communication complexity for small partial functions."""

from .fnspec import PartialFunction, generate, parse_function, serialize_function
from .prtlp import AccuracyParams, DualWitness, PrimalSolution, compute_prt, verify_solution, verify_witness
from .protocols import (
    BoostedProtocol,
    OneWayProtocol,
    ZeroCommProtocol,
    boost,
    compile_protocol,
    exact_stats,
    extract_weights,
    oneway_to_zerocomm,
    simulate,
)
from .exactrcc import exact_rcc, min_error_at_cost, verify_sandwich

__all__ = [
    "AccuracyParams",
    "BoostedProtocol",
    "DualWitness",
    "OneWayProtocol",
    "PartialFunction",
    "PrimalSolution",
    "ZeroCommProtocol",
    "boost",
    "compile_protocol",
    "compute_prt",
    "exact_rcc",
    "exact_stats",
    "extract_weights",
    "generate",
    "min_error_at_cost",
    "oneway_to_zerocomm",
    "parse_function",
    "serialize_function",
    "simulate",
    "verify_sandwich",
    "verify_solution",
    "verify_witness",
]
