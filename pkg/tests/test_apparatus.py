import dataclasses

import numpy as np
import pytest

from qeraser import ApparatusConfig, to_dimensionless, to_physical


def test_defaults_valid():
    cfg = ApparatusConfig()
    assert cfg.slit_ratio == pytest.approx(0.2)
    assert cfg.idler_delay_ns > cfg.detector_response_ns


@pytest.mark.parametrize("kwargs", [
    dict(wavelength_nm=0.0),
    dict(slit_separation_um=-1.0),
    dict(slit_width_um=0.0),
    dict(screen_distance_m=0.0),
    dict(slit_width_um=400.0),           # a >= d
    dict(detector_range=0.0),
    dict(idler_delay_ns=0.5),            # delay <= response
])
def test_invalid_configs_rejected(kwargs):
    with pytest.raises(ValueError):
        ApparatusConfig(**kwargs)


def test_origin_maps_to_origin():
    assert to_dimensionless(0.0, ApparatusConfig()) == 0.0


def test_one_fringe_period_maps_to_unity():
    cfg = ApparatusConfig()
    assert to_dimensionless(cfg.fringe_period_m, cfg) == pytest.approx(1.0, abs=1e-12)


def test_default_geometry_fringe():
    # x * d / (lambda * L) with the default geometry: hand evaluation gives
    # 4.68e-3 * 300e-6 / (702e-9 * 2) = 1.404e-6 / 1.404e-6 = 1.
    cfg = ApparatusConfig(wavelength_nm=702.0, slit_separation_um=300.0, screen_distance_m=2.0)
    assert to_dimensionless(4.68e-3, cfg) == pytest.approx(1.0, abs=1e-3)


def test_round_trip_coordinate_map():
    cfg = ApparatusConfig()
    u = np.linspace(-5, 5, 11)
    assert np.allclose(to_dimensionless(to_physical(u, cfg), cfg), u, atol=1e-15)


def test_fingerprint_tracks_physical_fields():
    cfg = ApparatusConfig()
    assert cfg.fingerprint() == ApparatusConfig().fingerprint()
    assert cfg.fingerprint() != dataclasses.replace(cfg, beam_splitter_in=True).fingerprint()
    assert cfg.fingerprint() != dataclasses.replace(cfg, envelope_offset=0.1).fingerprint()
