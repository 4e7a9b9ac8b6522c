import math

import numpy as np
import pytest

import chorus


def tone(freq, seconds=1.0, rate=48000, amp=0.5):
    t = np.arange(int(seconds * rate)) / rate
    return amp * np.sin(2 * math.pi * freq * t)


def test_fft_size_follows_sample_rate():
    assert chorus.fft_size_for(48000) == 1024
    assert chorus.fft_size_for(96000) == 2048
    assert chorus.fft_size_for(22050) == 512


def test_spectrogram_peaks_at_the_tone():
    spec = chorus.spectrogram(tone(2000.0), 48000)
    assert spec.n_frames == 99
    assert spec.magnitudes.shape == (spec.n_frames, spec.n_bins)
    assert spec.freqs[0] >= 1000.0 and spec.freqs[-1] <= 10000.0
    peak = spec.freqs[np.argmax(spec.magnitudes[10])]
    assert abs(peak - 2000.0) <= 48000 / spec.nfft


def test_frame_selection_keeps_loud_frames():
    power = np.concatenate([np.full(10, 100.0), np.full(90, 1.0)])
    mask, threshold = chorus.select_frames(power)
    assert mask.sum() == 10
    assert threshold == pytest.approx(25.0)


def test_wav_round_trip(tmp_path):
    samples = tone(3000.0, 0.2)
    path = str(tmp_path / "t.wav")
    chorus.write_wav(path, samples, 48000)
    back, rate = chorus.read_wav(path)
    assert rate == 48000
    assert np.max(np.abs(back - samples)) < 1e-4


def test_feature_vector_masses_sum_to_one():
    v = chorus.features(tone(6000.0), 48000, chorus.FeatureKind.MODE1D)
    assert v.dimension == 100
    assert v.indices == [55]
    assert v.masses.sum() == pytest.approx(1.0)
    assert chorus.distance(v, v) == 0.0


def test_errors_carry_their_kind():
    with pytest.raises(chorus.Error) as info:
        chorus.spectrogram(np.zeros(959), 48000)
    assert info.value.kind == "ClipTooShort"
    with pytest.raises(chorus.Error):
        chorus.TrainingStore.load("/nonexistent/store.chor")


def test_store_build_and_classify(tmp_path):
    rng = np.random.default_rng(3)
    recordings = []
    for freq in (2000, 5000, 8000):
        for i in range(2):
            path = str(tmp_path / f"{freq}-{i}.wav")
            clip = tone(freq, 3.0) + 0.01 * rng.standard_normal(144000)
            chorus.write_wav(path, clip, 48000)
            recordings.append((f"Tonus f{freq}", f"{freq}-{i}", path))

    store = chorus.build_store(recordings, seed=5)
    assert store.labels == ["Tonus f2000", "Tonus f5000", "Tonus f8000"]
    assert len(store) == 3 * store.per_class

    path = str(tmp_path / "store.chor")
    store.save(path)
    loaded = chorus.TrainingStore.load(path)
    assert loaded.labels == store.labels
    assert all(loaded.instance(i) == store.instance(i) for i in range(len(store)))

    query = chorus.features(tone(5000.0, 2.0), 48000)
    post = chorus.classify(query, loaded, k=5)
    assert loaded.labels[post.ranking[0]] == "Tonus f5000"
    assert post.entropy == pytest.approx(0.0)
    assert sum(post.probs) == pytest.approx(1.0)


def test_ranking_metrics():
    scores = np.array([0.9, 0.8, 0.7, 0.6])
    assert chorus.auc_roc(scores, np.array([True, False, True, False])) == pytest.approx(0.75)
    assert chorus.average_precision(scores, np.array([True, False, True, False])) == pytest.approx(5 / 6)
