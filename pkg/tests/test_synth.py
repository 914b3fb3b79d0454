import numpy as np
import pytest

from kpiscan.errors import BadSpec, MalformedInput, TooFewPerClass
from kpiscan.labels import ClassLabel
from kpiscan.synth import (
    Dataset,
    GeneratorSpec,
    generate_corpus,
    generate_example,
    read_jsonl,
    split,
    write_jsonl,
)


def lsq_slope(values):
    """Brute-force least-squares line fit via the normal equations."""
    n = len(values)
    t = np.arange(n, dtype=float)
    t_mean, v_mean = t.mean(), np.mean(values)
    return float(((t - t_mean) * (values - v_mean)).sum() / ((t - t_mean) ** 2).sum())


def zero_noise(**kw):
    return GeneratorSpec(noise_sigma=0.0, **kw)


def test_spec_validation():
    with pytest.raises(BadSpec):
        GeneratorSpec(length=4)
    with pytest.raises(BadSpec):
        GeneratorSpec(baseline=-1.0)
    with pytest.raises(BadSpec):
        GeneratorSpec(changepoint_frac_range=(0.8, 0.2))
    with pytest.raises(BadSpec):
        GeneratorSpec(seed=-1)


def test_generate_deterministic():
    spec = GeneratorSpec(seed=99)
    for label in ClassLabel:
        a = generate_example(label, spec)
        b = generate_example(label, spec)
        assert np.array_equal(a.values, b.values)


def test_down_site_zero_suffix():
    for seed in range(5):
        s = generate_example(ClassLabel.DownSite, GeneratorSpec(seed=seed))
        nz = np.flatnonzero(s.values)
        cp = nz[-1] + 1
        assert np.all(s.values[cp:] == 0.0)
        assert 0.2 <= cp / len(s) <= 0.8


def test_new_site_zero_prefix():
    for seed in range(5):
        s = generate_example(ClassLabel.NewSite, GeneratorSpec(seed=seed))
        nz = np.flatnonzero(s.values)
        cp = nz[0]
        assert np.all(s.values[:cp] == 0.0)
        assert 0.2 <= cp / len(s) <= 0.8


def test_gradually_increasing_positive_slope():
    s = generate_example(ClassLabel.GraduallyIncreasing, zero_noise(seed=4))
    assert lsq_slope(s.values) > 0


def test_gradually_decreasing_negative_slope():
    s = generate_example(ClassLabel.GraduallyDecreasing, zero_noise(seed=4))
    assert lsq_slope(s.values) < 0


def test_sudden_step_factor_exact_on_whole_periods():
    # whole-period windows cancel the seasonal component exactly, so the
    # post/pre mean ratio equals the drawn step factor
    spec = zero_noise(seed=21)
    s = generate_example(ClassLabel.SuddenlyIncreasing, spec).values
    diffs = np.abs(np.diff(s))
    cp = int(np.argmax(diffs)) + 1
    period = spec.season_period
    pre = s[cp - period : cp]
    post = s[cp : cp + period]
    ratio = post.mean() / pre.mean()
    assert 1.5 <= ratio <= 3.0


def test_faulty_site_windows():
    spec = zero_noise(seed=12)
    s = generate_example(ClassLabel.FaultySite, spec).values
    low = s < 0.1 * spec.baseline
    # count runs of consecutive low samples
    edges = np.diff(np.r_[0, low.astype(int), 0])
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1)
    widths = ends - starts
    assert 3 <= len(widths) <= 5
    assert np.all((widths >= 2) & (widths <= 6))


def test_normal_mean_near_baseline_over_period():
    spec = zero_noise(seed=8)
    s = generate_example(ClassLabel.Normal, spec).values
    for start in (0, 5, 24, 63):
        window = s[start : start + spec.season_period]
        assert abs(window.mean() - spec.baseline) <= 0.05 * spec.baseline


def test_corpus_counts_and_determinism():
    spec = GeneratorSpec(length=64, seed=5)
    ds1 = generate_corpus(3, spec, 32)
    ds2 = generate_corpus(3, spec, 32)
    assert len(ds1) == 24
    assert ds1.class_counts == (3,) * 8
    for a, b in zip(ds1.examples, ds2.examples):
        assert a.source_id == b.source_id and a.label == b.label
        assert np.array_equal(a.features, b.features)


def test_corpus_minimal():
    ds = generate_corpus(1, GeneratorSpec(length=64, seed=1), 32)
    assert len(ds) == 8
    assert sorted(int(ex.label) for ex in ds.examples) == list(range(8))


def test_corpus_paper_scale_default():
    ds = generate_corpus(250, GeneratorSpec(seed=7), 96)
    assert len(ds) == 2000
    assert ds.class_counts == (250,) * 8


def test_dataset_count_validation():
    ds = generate_corpus(1, GeneratorSpec(length=64, seed=1), 32)
    with pytest.raises(ValueError):
        Dataset(ds.examples, (2,) * 8)


def test_split_stratified_arithmetic():
    ds = generate_corpus(10, GeneratorSpec(length=64, seed=2), 32)
    train, test = split(ds, 0.2, seed=0)
    assert len(train) == 64 and len(test) == 16
    assert train.class_counts == (8,) * 8
    assert test.class_counts == (2,) * 8
    # disjoint and exhaustive
    train_ids = {ex.source_id for ex in train.examples}
    test_ids = {ex.source_id for ex in test.examples}
    assert not train_ids & test_ids
    assert len(train_ids | test_ids) == len(ds)


def test_split_half_on_two_per_class():
    ds = generate_corpus(2, GeneratorSpec(length=64, seed=2), 32)
    train, test = split(ds, 0.5, seed=1)
    assert len(train) == 8 and len(test) == 8
    assert train.class_counts == (1,) * 8 and test.class_counts == (1,) * 8


def test_split_deterministic():
    ds = generate_corpus(5, GeneratorSpec(length=64, seed=2), 32)
    a = split(ds, 0.2, seed=3)
    b = split(ds, 0.2, seed=3)
    assert [e.source_id for e in a[0].examples] == [e.source_id for e in b[0].examples]
    assert [e.source_id for e in a[1].examples] == [e.source_id for e in b[1].examples]


def test_split_too_few():
    ds = generate_corpus(1, GeneratorSpec(length=64, seed=2), 32)
    with pytest.raises(TooFewPerClass):
        split(ds, 0.5, seed=0)


def test_jsonl_round_trip(tmp_path):
    ds = generate_corpus(2, GeneratorSpec(length=64, seed=6), 32)
    path = tmp_path / "data.jsonl"
    write_jsonl(ds, path)
    back = read_jsonl(path)
    assert len(back) == len(ds)
    for a, b in zip(ds.examples, back.examples):
        assert a.source_id == b.source_id and a.label == b.label
        assert np.array_equal(a.features, b.features)


def test_jsonl_write_deterministic(tmp_path):
    ds = generate_corpus(2, GeneratorSpec(length=64, seed=6), 32)
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_jsonl(ds, p1)
    write_jsonl(ds, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_jsonl_malformed(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"source_id": "a", "label": 0, "features": [0.1, 0.2]}\nnot json\n')
    with pytest.raises(MalformedInput) as err:
        read_jsonl(path)
    assert err.value.line == 2
    path.write_text('{"source_id": "a", "label": 9, "features": [0.1]}\n')
    with pytest.raises(MalformedInput):
        read_jsonl(path)
    path.write_text('{"source_id": "a", "label": 0, "features": [0.1, 7.0]}\n')
    with pytest.raises(MalformedInput):
        read_jsonl(path)
