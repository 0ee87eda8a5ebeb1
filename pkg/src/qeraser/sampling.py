"""Inverse-CDF sampling from tabulated detection densities.

A density on [-U, U] is tabulated once on the standard quadrature grid, its
CDF accumulated by cumulative Simpson, and draws are produced by binary
search plus linear interpolation.  The table is deterministic for a given
config, so sampled runs are reproducible down to the byte.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from .apparatus import ApparatusConfig, IdlerDetector
from .amplitudes import (
    QUAD_POINTS,
    joint_density,
    marginal_density_d0,
    normalized_marginal,
    symmetric_grid,
)


class SamplerConstructionError(ValueError):
    """Density is negative or does not integrate to one."""


class ImpossibleEventError(ValueError):
    """Conditioning on a zero-probability signal coordinate."""


@dataclass
class SamplerTable:
    """Tabulated CDF of a normalized density over [-U, U].

    ``cdf`` is nondecreasing with cdf[0] = 0 and cdf[-1] = 1; flat stretches
    (density zeros) are tolerated and resolved to their left edge on
    inversion.
    """

    u: np.ndarray
    cdf: np.ndarray
    density_id: str
    fingerprint: str

    def inverse(self, v):
        """Map uniform draws v in [0, 1) through the inverse CDF."""
        v = np.asarray(v, dtype=float)
        idx = np.searchsorted(self.cdf, v, side="right") - 1
        idx = np.clip(idx, 0, len(self.u) - 2)
        lo = self.cdf[idx]
        span = self.cdf[idx + 1] - lo
        frac = np.where(span > 0.0, (v - lo) / np.where(span > 0.0, span, 1.0), 0.0)
        out = self.u[idx] + frac * (self.u[idx + 1] - self.u[idx])
        return float(out) if out.ndim == 0 else out


def build_sampler(density, config: ApparatusConfig, density_id: str = "") -> SamplerTable:
    """Tabulate `density` (callable of u, normalized on [-U, U]) for sampling.

    Raises
    ------
    SamplerConstructionError
        If the density goes negative beyond rounding noise or its Simpson
        integral is not 1 within 1e-6.
    """
    u = symmetric_grid(config.detector_range, QUAD_POINTS)
    p = np.asarray(density(u), dtype=float)
    if p.shape != u.shape:
        raise SamplerConstructionError("density must evaluate elementwise on the grid")
    if np.any(p < -1e-12):
        raise SamplerConstructionError("density is negative")
    p = np.clip(p, 0.0, None)
    total = simpson(p, x=u)
    if not np.isfinite(total) or abs(total - 1.0) > 1e-6:
        raise SamplerConstructionError(f"density integrates to {total!r}, expected 1")

    cdf = cumulative_simpson(p, x=u, initial=0.0)
    # Quadratic segments can dip infinitesimally negative near density zeros;
    # merging those degenerate increments keeps the CDF nondecreasing.
    inc = np.clip(np.diff(cdf), 0.0, None)
    cdf = np.concatenate(([0.0], np.cumsum(inc)))
    cdf /= cdf[-1]
    cdf[-1] = 1.0
    return SamplerTable(u=u, cdf=cdf, density_id=density_id, fingerprint=config.fingerprint())


def marginal_sampler(config: ApparatusConfig) -> SamplerTable:
    """Sampler for the D0 marginal (beam-splitter independent)."""
    return build_sampler(lambda u: normalized_marginal(u, config), config, density_id="marginal")


def sample_signal(sampler: SamplerTable, rng: np.random.Generator, size=None):
    """Draw signal coordinates: uniform v then inverse CDF.

    Consumes exactly one uniform per sample so stream positions are
    predictable for chunked generation.
    """
    if size is None:
        return float(sampler.inverse(rng.random()))
    return sampler.inverse(rng.random(size))


def detector_one_probability(u, bs_in, config: ApparatusConfig):
    """P(idler fires D1 | signal at u) for the given beam-splitter setting.

    Accepts scalar or per-event arrays for both u and bs_in.
    """
    u = np.asarray(u, dtype=float)
    bs_in = np.asarray(bs_in, dtype=bool)
    marg = np.asarray(marginal_density_d0(u, config))
    if np.any(marg <= 0.0):
        raise ImpossibleEventError("signal coordinate has zero marginal density")

    if bs_in.ndim == 0:
        cfg = dataclasses.replace(config, beam_splitter_in=bool(bs_in))
        out = joint_density(u, IdlerDetector.D1, cfg) / marg
        return float(out) if u.ndim == 0 else out
    out = np.empty_like(u)
    for flag in (False, True):
        mask = bs_in == flag
        if np.any(mask):
            cfg = dataclasses.replace(config, beam_splitter_in=flag)
            out[mask] = joint_density(u[mask], IdlerDetector.D1, cfg) / marg[mask]
    return out


def sample_idler(u, bs_in, config: ApparatusConfig, rng: np.random.Generator):
    """Draw idler outcomes given signal coordinates and beam-splitter setting.

    Returns IdlerDetector for scalar input, else an int8 array with 1 for D1
    and 2 for D2.  One uniform is consumed per event.
    """
    u_arr = np.asarray(u, dtype=float)
    p1 = detector_one_probability(u_arr, bs_in, config)
    if u_arr.ndim == 0:
        return IdlerDetector.D1 if rng.random() < p1 else IdlerDetector.D2
    v = rng.random(u_arr.shape)
    return np.where(v < p1, np.int8(1), np.int8(2))
