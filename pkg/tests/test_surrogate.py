import numpy as np
import pytest

from conftest import DESIGNS, synthetic_samples
from magbend.core.exceptions import ArgumentError, ConfigurationError, ModelStateError
from magbend.models.schemas import TrainOptions
from magbend.services.magnetoelastic_rod import load_spec
from magbend.services.surrogate import (
    DEFAULT_FIELDS_MT,
    Normalizer,
    SurrogateModel,
    build_dataset,
    evaluate,
    flat_parameters,
    forward,
    load_model,
    loss_and_gradients,
    model_to_json,
    predict_library,
    read_dataset_csv,
    samples_to_arrays,
    save_dataset_csv,
    save_model,
    set_flat_parameters,
    split_holdout,
    train,
)


# Dataset handling

def test_holdout_split_of_the_full_grid():
    """Test that holding out 60 mT from 7 designs x 12 fields leaves 77 train and 7 test samples."""
    samples = synthetic_samples()
    train_split, test_split = split_holdout(samples, 0.060)
    assert len(train_split) == 77
    assert len(test_split) == 7
    assert all(s.mt == pytest.approx(0.060) for s in test_split)
    assert len({s.design_key for s in test_split}) == 7
    assert not any(s.mt == pytest.approx(0.060) for s in train_split)


def test_holdout_split_of_two_designs():
    samples = synthetic_samples(DESIGNS[:2], (10.0, 20.0, 30.0))
    train_split, test_split = split_holdout(samples, 0.020)
    assert len(train_split) == 4
    assert [s.spec_id for s in test_split] == ["d1", "d2"]


def test_holdout_requires_every_design_to_have_the_field():
    samples = synthetic_samples()
    samples = [s for s in samples if not (s.spec_id == "d3" and s.mt == pytest.approx(0.060))]
    with pytest.raises(ArgumentError, match="d3"):
        split_holdout(samples, 0.060)


def test_holdout_rejects_duplicate_samples():
    samples = synthetic_samples(DESIGNS[:1], (10.0, 20.0))
    with pytest.raises(ArgumentError):
        split_holdout(samples + samples[:1], 0.010)


def test_samples_to_arrays_column_order():
    sample = synthetic_samples(DESIGNS[5:6], (50.0,))[0]
    X, y = samples_to_arrays([sample])
    np.testing.assert_allclose(X[0], [0.05, 20e6, 15e6, 10e6, 0.020, 0.005, 0.005, 0.97e-3])
    assert y[0] == sample.a_hat


def test_dataset_csv_round_trip(tmp_path):
    samples = synthetic_samples(DESIGNS[:2], (10.0, 60.0))
    path = save_dataset_csv(samples, tmp_path / "dataset.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "mt_mT,e1_MPa,e2_MPa,e3_MPa,l1_mm,l2_mm,l3_mm,cs_mm,a_per_mm"
    restored = read_dataset_csv(path)
    assert len(restored) == 4
    for original, copy in zip(samples, restored):
        assert copy.mt == pytest.approx(original.mt, rel=1e-8)
        assert copy.e == pytest.approx(original.e, rel=1e-8)
        assert copy.a_hat == pytest.approx(original.a_hat, rel=1e-8)


def test_dataset_csv_requires_header(tmp_path):
    path = tmp_path / "dataset.csv"
    path.write_text("1,2,3\n")
    with pytest.raises(ConfigurationError):
        read_dataset_csv(path)


def test_build_dataset_at_zero_field():
    """Test that an unloaded rod gives a zero coefficient."""
    dataset = build_dataset(["gmc-2"], [0.0])
    assert len(dataset) == 1
    assert dataset[0].a_hat == 0.0
    assert dataset[0].mt == 0.0
    assert dataset.excluded == []


def test_build_dataset_records_design_inputs():
    dataset = build_dataset(["gmc-6", "gmc-7"], [50.0])
    assert [s.spec_id for s in dataset] == ["gmc-6", "gmc-7"]
    assert dataset[0].l == pytest.approx((0.020, 0.005, 0.005))
    assert all(s.a_hat > 0 for s in dataset)


def test_empty_field_grid_gives_empty_dataset():
    assert len(build_dataset(["gmc-2"], [])) == 0


# Model

def test_normalizer_round_trip():
    rng = np.random.default_rng(5)
    values = rng.uniform(-3.0, 7.0, (20, 4))
    values[:, 2] = 1.5
    normalizer = Normalizer.fit(values)
    scaled = normalizer.transform(values)
    assert scaled[:, [0, 1, 3]].min() == pytest.approx(0.0)
    assert scaled[:, [0, 1, 3]].max() == pytest.approx(1.0)
    assert normalizer.span[2] == 1.0
    np.testing.assert_allclose(scaled[:, 2], 0.0)
    np.testing.assert_allclose(normalizer.inverse(scaled), values, rtol=1e-12, atol=1e-12)


def test_initialization_is_seeded():
    a = SurrogateModel.initialize(seed=42)
    b = SurrogateModel.initialize(seed=42)
    c = SurrogateModel.initialize(seed=43)
    np.testing.assert_array_equal(flat_parameters(a), flat_parameters(b))
    assert not np.array_equal(flat_parameters(a), flat_parameters(c))


def test_forward_of_hand_set_parameters():
    """Test one path through the network: a = 2 * (tanh(tanh(0.5)) + 0.5)."""
    model = SurrogateModel.initialize(seed=42)
    set_flat_parameters(model, np.zeros_like(flat_parameters(model)))
    model.layers["branch_mt"].weights[0, 0] = 1.0
    model.layers["fusion"].weights[0, 0] = 1.0
    model.layers["output"].weights[0, 0] = 1.0
    model.layers["output"].bias[0] = 0.5
    model.input_normalizer = Normalizer(minimum=np.zeros(8), span=np.ones(8))
    model.target_normalizer = Normalizer(minimum=np.zeros(1), span=np.full(1, 2.0))

    a = forward(model, 0.5, (2e7, 1.5e7, 1e7), (0.01, 0.01, 0.01), 1e-3)
    assert a == pytest.approx(2.0 * (np.tanh(np.tanh(0.5)) + 0.5), rel=1e-14)
    assert a == pytest.approx(1.863616, abs=1e-5)


def test_seed_42_forward_is_fixed_and_bounded():
    samples = synthetic_samples(DESIGNS[:2])
    outputs = []
    for _ in range(2):
        model = SurrogateModel.initialize(seed=42)
        model.fit_normalizers(samples)
        outputs.append(forward(model, 0.05, (2e7, 1.5e7, 1e7), (0.01, 0.01, 0.01), 0.97e-3))
    assert np.isfinite(outputs[0])
    assert outputs[0] == outputs[1]
    # a tanh fusion layer of width 16 with weights and bias in [-1/4, 1/4]
    bound = 17 * 0.25
    target = model.target_normalizer
    assert target.minimum[0] - bound * target.span[0] <= outputs[0] <= target.minimum[0] + bound * target.span[0]


def test_architecture_shapes():
    model = SurrogateModel.initialize()
    shapes = {name: layer.weights.shape for name, layer in model.layers.items()}
    assert shapes == {
        "branch_mt": (1, 8),
        "branch_e": (3, 8),
        "branch_l": (3, 8),
        "branch_cs": (1, 8),
        "fusion": (32, 16),
        "output": (16, 1),
    }
    bound = np.sqrt(1.0 / 32)
    assert np.all(np.abs(model.layers["fusion"].weights) <= bound)


@pytest.mark.parametrize("loss", ["l1", "l2"])
def test_gradients_match_finite_differences(loss):
    """Test backpropagation against central differences over every parameter."""
    rng = np.random.default_rng(3)
    model = SurrogateModel.initialize(seed=3, branch_width=4, fusion_width=5)
    Xn = rng.uniform(0.0, 1.0, (6, 8))
    yn = rng.uniform(0.0, 1.0, 6)
    if loss == "l1":
        yn = yn + 5.0  # keep every residual on one side of the kink

    _, grads = loss_and_gradients(model, Xn, yn, loss)
    analytic = np.concatenate([g.ravel() for g in grads])
    base = flat_parameters(model)
    numeric = np.empty_like(base)
    h = 1e-6
    for i in range(base.size):
        shifted = base.copy()
        shifted[i] += h
        set_flat_parameters(model, shifted)
        upper, _ = loss_and_gradients(model, Xn, yn, loss)
        shifted[i] -= 2 * h
        set_flat_parameters(model, shifted)
        lower, _ = loss_and_gradients(model, Xn, yn, loss)
        numeric[i] = (upper - lower) / (2 * h)
    set_flat_parameters(model, base)
    assert np.linalg.norm(numeric - analytic) <= 1e-5 * np.linalg.norm(analytic)


def test_unfitted_model_cannot_predict():
    model = SurrogateModel.initialize()
    with pytest.raises(ModelStateError):
        forward(model, 0.05, (20e6, 15e6, 10e6), (0.01, 0.01, 0.01), 0.97e-3)


def test_evaluate_of_a_memorized_sample():
    """Test that a model whose output hits the normalized target has zero error."""
    sample = synthetic_samples(DESIGNS[:1], (50.0,))[0]
    model = SurrogateModel.initialize()
    model.fit_normalizers([sample])
    model.layers["output"].weights[...] = 0.0
    model.layers["output"].bias[...] = 0.0
    assert evaluate(model, [sample]) < 1e-10
    assert forward(model, sample.mt, sample.e, sample.l, sample.cs) == pytest.approx(sample.a_hat)


def test_evaluate_in_physical_units():
    """Test that a model predicting zero everywhere scores the mean squared target in 1/m."""
    samples = synthetic_samples(DESIGNS[:2], (10.0, 50.0, 90.0))
    model = SurrogateModel.initialize()
    model.fit_normalizers(samples)
    model.layers["output"].weights[...] = 0.0
    model.layers["output"].bias[...] = model.target_normalizer.transform(np.zeros((1, 1)))[0, 0]
    expected = np.mean([s.a_hat ** 2 for s in samples])
    assert evaluate(model, samples, units="per_m") == pytest.approx(expected, rel=1e-9)
    with pytest.raises(ArgumentError):
        evaluate(model, [])
    with pytest.raises(ArgumentError):
        evaluate(model, samples, units="furlongs")


# Training

def test_training_rejects_bad_input():
    model = SurrogateModel.initialize()
    with pytest.raises(ArgumentError):
        train(model, [])
    with pytest.raises(ArgumentError):
        train(model, synthetic_samples(DESIGNS[:1], (10.0,)), TrainOptions(epochs=0))


def test_training_reduces_loss():
    samples = synthetic_samples(DESIGNS[:3])
    model = SurrogateModel.initialize()
    report = train(model, samples, TrainOptions(epochs=300))
    assert len(report.loss_history) == 300
    assert report.best_loss < report.loss_history[0]
    assert report.final_loss == report.loss_history[-1]
    assert 1 <= report.best_epoch <= 300
    assert report.test_mse is None


def test_training_is_deterministic():
    """Test that the same seed and data give the same loss history and weights."""
    samples = synthetic_samples(DESIGNS[:2])
    runs = []
    for _ in range(2):
        model = SurrogateModel.initialize(seed=7)
        report = train(model, samples, TrainOptions(epochs=100))
        runs.append((report.loss_history, flat_parameters(model)))
    assert runs[0][0] == runs[1][0]
    np.testing.assert_array_equal(runs[0][1], runs[1][1])


def test_reported_test_mse_matches_evaluate():
    train_split, test_split = split_holdout(synthetic_samples(DESIGNS[:3]), 0.060)
    model = SurrogateModel.initialize()
    report = train(model, train_split, TrainOptions(epochs=50), test_split)
    assert report.test_mse == evaluate(model, test_split)
    assert report.final_train_mse == evaluate(model, train_split)


def test_constant_target_is_learned():
    """Test that a constant coefficient is reproduced within 0.1%."""
    c = 20.0
    samples = [s.model_copy(update={"a_hat": c}) for s in synthetic_samples(DESIGNS[:1])]
    model = SurrogateModel.initialize()
    train(model, samples, TrainOptions(epochs=3000))
    for s in samples:
        assert forward(model, s.mt, s.e, s.l, s.cs) == pytest.approx(c, abs=abs(c) * 1e-3)


def test_predict_library_covers_the_grid():
    model = SurrogateModel.initialize()
    train(model, synthetic_samples(DESIGNS[:2]), TrainOptions(epochs=20))
    records = predict_library(model, [load_spec("gmc-2"), load_spec("gmc-7")], (40.0, 80.0))
    assert [(r.spec_id, r.field_mT) for r in records] == [
        ("gmc-2", 40.0), ("gmc-2", 80.0), ("gmc-7", 40.0), ("gmc-7", 80.0)
    ]
    with pytest.raises(ArgumentError):
        predict_library(model, [], (40.0,))


# Persistence

def test_saved_model_reloads_identically(tmp_path):
    samples = synthetic_samples(DESIGNS[:2])
    model = SurrogateModel.initialize()
    train(model, samples, TrainOptions(epochs=20))
    path = save_model(model, tmp_path / "model.json")

    restored = load_model(path)
    assert model_to_json(restored) == path.read_text()
    for s in samples:
        assert forward(restored, s.mt, s.e, s.l, s.cs) == forward(model, s.mt, s.e, s.l, s.cs)


def test_repeated_training_writes_identical_model_files(tmp_path):
    """Test that two seeded runs on the same data save byte-identical files."""
    samples = synthetic_samples(DESIGNS[:2])
    paths = []
    for run in range(2):
        model = SurrogateModel.initialize(seed=42)
        train(model, samples, TrainOptions(epochs=50))
        paths.append(save_model(model, tmp_path / f"model-{run}.json"))
    assert paths[0].read_bytes() == paths[1].read_bytes()

    resaved = save_model(load_model(paths[0]), tmp_path / "resaved.json")
    assert resaved.read_bytes() == paths[0].read_bytes()


def test_unfitted_model_saves_without_normalizers(tmp_path):
    path = save_model(SurrogateModel.initialize(), tmp_path / "model.json")
    assert not load_model(path).fitted


def test_corrupt_model_file_is_rejected(tmp_path):
    path = tmp_path / "model.json"
    path.write_text('{"format_version": 1}')
    with pytest.raises(ConfigurationError):
        load_model(path)
    path.write_text("not json")
    with pytest.raises(ConfigurationError):
        load_model(path)


# Acceptance

@pytest.mark.slow
def test_surrogate_generalizes_to_held_out_field():
    """Test the full 7 x 12 simulated dataset: hold out 60 mT, train 5000 epochs."""
    dataset = build_dataset([f"gmc-{i}" for i in range(1, 8)], DEFAULT_FIELDS_MT)
    assert len(dataset) == 84
    train_split, test_split = split_holdout(dataset.samples, 0.060)
    assert (len(train_split), len(test_split)) == (77, 7)

    model = SurrogateModel.initialize(seed=42)
    report = train(model, train_split, TrainOptions(epochs=5000, lr=1e-3), test_split)
    assert report.final_loss < 0.1 * report.loss_history[0]
    assert report.test_mse < 1e-4
