"""Apparatus geometry and the dimensionless screen coordinate.

A biphoton source sits behind a double slit (separation ``d``, width ``a``).
Signal photons reach the scanning detector D0 in the far field; idler photons
reach D1/D2 through an optional 50/50 beam splitter.  All analysis happens in
the dimensionless coordinate

    u = x * d / (wavelength * L)

so one interference fringe always spans ``u = 1`` regardless of geometry.
Physical units enter only through :class:`ApparatusConfig`.
"""
from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass


class SlitLabel(enum.Enum):
    A = "A"
    B = "B"


class IdlerDetector(enum.Enum):
    D1 = "D1"
    D2 = "D2"


@dataclass(frozen=True)
class ApparatusConfig:
    """One experiment setup: geometry, beam-splitter state, derived scales.

    Parameters
    ----------
    wavelength_nm, slit_separation_um, slit_width_um, screen_distance_m :
        Source wavelength and double-slit geometry.  Defaults are plausible
        SPDC-source values; every analysis quantity is dimensionless, so the
        defaults carry no weight beyond the coordinate map.
    beam_splitter_in :
        True when the idler-arm beam splitter erases which-path information.
    envelope_offset :
        Signed per-slit shift of the single-slit envelope center, in fringe
        units (slit A centered at +offset, slit B at -offset).  0 keeps the
        pure far-field picture of coincident envelopes.
    detector_range :
        Half-width U of the D0 scan in fringe units; densities live on
        [-U, U].
    idler_delay_ns, detector_response_ns :
        The idler detection lag and the detector response time; the lag must
        exceed the response so the signal/idler time order is unambiguous.
    """

    wavelength_nm: float = 702.0
    slit_separation_um: float = 300.0
    slit_width_um: float = 60.0
    screen_distance_m: float = 2.0
    beam_splitter_in: bool = False
    envelope_offset: float = 0.0
    detector_range: float = 5.0
    idler_delay_ns: float = 8.0
    detector_response_ns: float = 1.0

    def __post_init__(self) -> None:
        if not (self.wavelength_nm > 0 and self.slit_separation_um > 0
                and self.slit_width_um > 0 and self.screen_distance_m > 0):
            raise ValueError("wavelength, slit separation/width and distance must be positive")
        if not self.slit_width_um < self.slit_separation_um:
            raise ValueError("slit width must be smaller than slit separation")
        if not self.detector_range > 0:
            raise ValueError("detector_range must be positive")
        if not self.idler_delay_ns > self.detector_response_ns:
            raise ValueError("idler delay must exceed the detector response time")

    @property
    def slit_ratio(self) -> float:
        """a/d, the envelope-to-fringe frequency ratio."""
        return self.slit_width_um / self.slit_separation_um

    @property
    def fringe_period_m(self) -> float:
        """Physical fringe period wavelength*L/d at the D0 plane."""
        return self.wavelength_nm * 1e-9 * self.screen_distance_m / (self.slit_separation_um * 1e-6)

    def fingerprint(self) -> str:
        """Short stable hash of the physically relevant fields."""
        raw = repr((self.wavelength_nm, self.slit_separation_um, self.slit_width_um,
                    self.screen_distance_m, self.beam_splitter_in, self.envelope_offset,
                    self.detector_range, self.idler_delay_ns, self.detector_response_ns))
        return hashlib.sha256(raw.encode()).hexdigest()[:16]


def to_dimensionless(x_m, config: ApparatusConfig):
    """Map physical D0 displacement (m) to fringe-period units."""
    return x_m * config.slit_separation_um * 1e-6 / (
        config.wavelength_nm * 1e-9 * config.screen_distance_m)


def to_physical(u, config: ApparatusConfig):
    """Inverse of :func:`to_dimensionless`: fringe units back to meters."""
    return u * config.wavelength_nm * 1e-9 * config.screen_distance_m / (
        config.slit_separation_um * 1e-6)
