import numpy as np
import pytest

from ofdm_jcas.channel import RadarTarget
from ofdm_jcas.detection import bins_to_physics
from ofdm_jcas.errors import ConfigError
from ofdm_jcas.pipeline import Scenario, run_trial
from ofdm_jcas.waveform import WaveformConfig

SMALL = WaveformConfig(n_subcarriers=128, n_symbols=64, n_cp=32)


def ongrid(wf, bins):
    return tuple(RadarTarget(*bins_to_physics(d, s, wf)) for d, s in bins)


def test_unknown_estimator_rejected():
    with pytest.raises(ConfigError, match="estimator"):
        Scenario(estimator="mmse")
    with pytest.raises(ConfigError, match="detector"):
        Scenario(detector="music")


@pytest.mark.parametrize("estimator", ["ls", "dft-ce", "zcp-ls"])
@pytest.mark.parametrize("detector", ["periodogram", "fps-sft"])
def test_noiseless_ongrid_recovery(estimator, detector):
    bins = [(5, 3), (17, -6), (26, 7)]
    sc = Scenario(SMALL, ongrid(SMALL, bins), snr_db=None, estimator=estimator, detector=detector, max_targets=3)
    res = run_trial(sc, seed=4)
    got = sorted((d.delay_bin, d.doppler_bin) for d in res.detections)
    assert got == sorted(bins)


def test_same_seed_same_result():
    sc = Scenario(SMALL, ongrid(SMALL, [(9, 2)]), snr_db=0.0, max_targets=2)
    a, b = run_trial(sc, 11), run_trial(sc, 11)
    np.testing.assert_array_equal(a.h_est, b.h_est)
    assert a.detections == b.detections


def test_estimators_share_frame_and_noise():
    sc = Scenario(SMALL, ongrid(SMALL, [(9, 2)]), snr_db=5.0)
    ls = run_trial(sc, 3)
    dft = run_trial(sc.with_(estimator="dft-ce"), 3)
    np.testing.assert_array_equal(ls.h_true, dft.h_true)
    assert ls.realization.noise_variance == dft.realization.noise_variance


def test_false_alarms_without_targets():
    # no targets: exceedances should be close to pfa over the grid
    wf = WaveformConfig(n_subcarriers=256, n_symbols=128, n_cp=64)
    sc = Scenario(wf, (), snr_db=0.0)
    res = run_trial(sc, 0)
    rate = np.count_nonzero(res.mask) / res.mask.size
    assert 0.005 < rate < 0.02


def test_estimate_noise_close_to_known():
    wf = WaveformConfig(n_subcarriers=256, n_symbols=128, n_cp=64)
    sc = Scenario(wf, ongrid(wf, [(20, 5)]), snr_db=0.0)
    known = run_trial(sc, 2).sigma2
    est = run_trial(sc.with_(estimate_noise=True), 2).sigma2
    assert est == pytest.approx(known, rel=0.1)
