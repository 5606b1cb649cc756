"""Face mobilities: averaging e^{-S} between adjacent cells.

Four averaging rules are supported for the value of e^{-S} at the staggered
face between cells carrying exponents S_i and S_{i+1}:

    harmonic     2 e^{-S_i} e^{-S_{i+1}} / (e^{-S_i} + e^{-S_{i+1}})
    geometric    e^{-(S_i + S_{i+1})/2}
    arithmetic   (e^{-S_i} + e^{-S_{i+1}}) / 2
    entropic     (S_{i+1} - S_i) / (e^{S_{i+1}} - e^{S_i})

All four coincide for equal exponents and are symmetric under swapping the
pair.  For any face the values are ordered

    harmonic <= entropic <= geometric <= arithmetic,

the classical mean inequalities applied to the pair (e^{-S_i}, e^{-S_{i+1}})
(the entropic rule is the squared geometric mean over the logarithmic mean).
The entropic rule turns the drift-diffusion face flux into the
Scharfetter-Gummel flux and limits to pure upwinding for large |ΔS|.

Every rule is evaluated in a factored form, exp(-S_lo) times a bounded shape
factor of d = S_hi - S_lo >= 0, so no intermediate can overflow or lose the
sign; the removable 0/0 of the entropic rule is handled by a Bernoulli
kernel x/(e^x - 1) with a series branch for |x| < 1e-5.

This module is valence-agnostic: callers build the exponent field S = q ψ.
"""

from __future__ import annotations

import enum

import numpy as np

from .grid import CellField, FaceField

__all__ = ["MeanKind", "SlotboomExponent", "face_mobility", "pair_mean"]

# Exponent field S at cell centers; mobility is some mean of e^{-S} per face.
SlotboomExponent = CellField

_SERIES_CUT = 1e-5


class MeanKind(enum.Enum):
    HARMONIC = "harmonic"
    GEOMETRIC = "geometric"
    ARITHMETIC = "arithmetic"
    ENTROPIC = "entropic"

    @classmethod
    def from_name(cls, name: str) -> "MeanKind":
        try:
            return cls(name.strip().lower())
        except ValueError:
            options = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown mobility mean '{name}' (expected one of: {options})")


def _bernoulli(x: np.ndarray) -> np.ndarray:
    """x / (e^x - 1) for x >= 0, stable at 0 and free of overflow.

    Series branch below 1e-5 (next omitted term is O(x^3/720)); elsewhere the
    equivalent x e^{-x} / (1 - e^{-x}) keeps every intermediate bounded.
    """
    small = x < _SERIES_CUT
    xs = np.where(small, 1.0, x)  # sentinel keeps the general branch away from 0/0
    general = xs * np.exp(-xs) / (-np.expm1(-xs))
    series = 1.0 - x / 2.0 + x * x / 12.0
    return np.where(small, series, general)


def pair_mean(s0: np.ndarray, s1: np.ndarray, kind: MeanKind) -> np.ndarray:
    """Mean of (e^{-s0}, e^{-s1}) per the selected rule, elementwise."""
    s0 = np.asarray(s0, dtype=np.float64)
    s1 = np.asarray(s1, dtype=np.float64)
    lo = np.minimum(s0, s1)
    d = np.maximum(s0, s1) - lo  # >= 0
    base = np.exp(-lo)
    t = np.exp(-d)  # in (0, 1]
    if kind is MeanKind.HARMONIC:
        shape = 2.0 * t / (1.0 + t)
    elif kind is MeanKind.GEOMETRIC:
        shape = np.sqrt(t)
    elif kind is MeanKind.ARITHMETIC:
        shape = 0.5 * (1.0 + t)
    elif kind is MeanKind.ENTROPIC:
        shape = _bernoulli(d)
    else:  # pragma: no cover
        raise ValueError(f"unhandled mean kind {kind}")
    return base * shape


def face_mobility(S: SlotboomExponent, kind: MeanKind) -> FaceField:
    """Evaluate the face mobility e^{-S} at every staggered point of every axis.

    Output is strictly positive for any finite S whose mobility is
    representable in float64; an unrepresentable exponent range raises
    instead of returning 0, inf or NaN.
    """
    if not np.all(np.isfinite(S.values)):
        raise ValueError("Slotboom exponent must be finite")
    comps = []
    for ax in range(S.spec.dim):
        m = pair_mean(S.values, np.roll(S.values, -1, axis=ax), kind)
        if not np.all(np.isfinite(m)) or not np.all(m > 0.0):
            raise OverflowError(
                "face mobility not representable in float64; "
                f"exponent range [{S.values.min():.3g}, {S.values.max():.3g}] is too wide"
            )
        comps.append(m)
    return FaceField(S.spec, comps)
