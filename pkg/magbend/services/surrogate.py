"""
Multi-branch regression network for the quadratic bending coefficient.

Each input group (field strength, modulus triple, length triple, cross-section
side) passes through its own fully connected tanh layer; the branch outputs
are concatenated and fused by one tanh layer before a linear output unit.
Inputs and target are min-max normalized on the training split. Training is
full-batch Adam on the mean L1 loss, implemented directly in numpy.
"""

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from magbend.core.exceptions import (
    ArgumentError,
    ConfigurationError,
    ModelStateError,
    StorageError,
    TrainingError,
)
from magbend.models.schemas import (
    BendSample,
    LayerFile,
    NormalizerFile,
    PredictionRecord,
    RodSpec,
    RodSpecFile,
    SolverOptions,
    SurrogateFile,
    SweepGrid,
    TrainOptions,
    TrainReport,
)
from magbend.services import pipeline

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
BRANCHES: Tuple[Tuple[str, int], ...] = (("mt", 1), ("e", 3), ("l", 3), ("cs", 1))
N_INPUTS = sum(width for _, width in BRANCHES)
DATASET_COLUMNS = ("mt_mT", "e1_MPa", "e2_MPa", "e3_MPa", "l1_mm", "l2_mm", "l3_mm", "cs_mm", "a_per_mm")
DEFAULT_FIELDS_MT = tuple(float(v) for v in range(10, 121, 10))


def _branch_slices() -> Dict[str, slice]:
    slices, start = {}, 0
    for name, width in BRANCHES:
        slices[name] = slice(start, start + width)
        start += width
    return slices


BRANCH_SLICES = _branch_slices()


# Data

@dataclass
class Dataset:
    """Samples from a dataset build plus the grid points left out for not converging."""
    samples: List[BendSample]
    excluded: List = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[BendSample]:
        return iter(self.samples)

    def __getitem__(self, index):
        return self.samples[index]


def build_dataset(
    specs: Sequence[Union[str, RodSpec]],
    fields_mT: Sequence[float] = DEFAULT_FIELDS_MT,
    solver: Optional[SolverOptions] = None,
    resolution: float = 2.0,
    angle_deg: float = 90.0,
    workers: int = 1,
) -> Dataset:
    """
    Solve and fit every (spec, field) pair.

    Non-converged solves are excluded from the samples and listed in
    Dataset.excluded.
    """
    if not fields_mT:
        return Dataset(samples=[])

    entries = [
        spec_entry if isinstance(spec_entry, str) else RodSpecFile.from_spec(spec_entry)
        for spec_entry in specs
    ]
    grid = SweepGrid(
        specs=entries,
        fields_mT=list(fields_mT),
        angles_deg=[angle_deg],
        resolution=resolution,
        solver=solver or SolverOptions(),
        workers=workers,
    )
    samples, excluded = pipeline.samples_from_outcomes(pipeline.execute_grid(grid))
    if excluded:
        logger.warning(f"Excluded {len(excluded)} non-converged grid points from the dataset")
    logger.info(f"Built dataset with {len(samples)} samples")
    return Dataset(samples=samples, excluded=excluded)


def samples_to_arrays(samples: Sequence[BendSample]) -> Tuple[np.ndarray, np.ndarray]:
    """Raw SI input matrix (n, 8) ordered mt, e1..e3, l1..l3, cs and target vector a_hat (1/m)."""
    X = np.array([[s.mt, *s.e, *s.l, s.cs] for s in samples], dtype=float).reshape(-1, N_INPUTS)
    y = np.array([s.a_hat for s in samples], dtype=float)
    return X, y


def split_holdout(samples: Sequence[BendSample], held_out_field: float) -> Tuple[List[BendSample], List[BendSample]]:
    """
    Hold out one field strength (tesla) for every design.

    A design is a distinct (e, l, cs) combination. The test split holds exactly
    one sample per design.
    """
    designs: Dict[Tuple, List[int]] = {}
    for i, sample in enumerate(samples):
        designs.setdefault(sample.design_key, []).append(i)

    test_indices = set()
    for key, indices in designs.items():
        matches = [i for i in indices if math.isclose(samples[i].mt, held_out_field, rel_tol=1e-9, abs_tol=1e-12)]
        label = samples[indices[0]].spec_id or str(key)
        if not matches:
            raise ArgumentError(f"Design {label} has no sample at {held_out_field * 1e3:g} mT")
        if len(matches) > 1:
            raise ArgumentError(f"Design {label} has {len(matches)} samples at {held_out_field * 1e3:g} mT")
        test_indices.add(matches[0])

    train = [s for i, s in enumerate(samples) if i not in test_indices]
    test = [s for i, s in enumerate(samples) if i in test_indices]
    return train, test


def write_dataset_csv(samples: Sequence[BendSample]) -> bytes:
    lines = [",".join(DATASET_COLUMNS)]
    for s in samples:
        values = [s.mt * 1e3, *(e * 1e-6 for e in s.e), *(length * 1e3 for length in s.l), s.cs * 1e3, s.a_hat * 1e-3]
        lines.append(",".join(pipeline.format_number(v) for v in values))
    return ("\n".join(lines) + "\n").encode("utf-8")


def save_dataset_csv(samples: Sequence[BendSample], path: Union[str, Path]) -> Path:
    return pipeline.write_bytes(path, write_dataset_csv(samples))


def read_dataset_csv(path: Union[str, Path]) -> List[BendSample]:
    path = Path(path)
    try:
        lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
    except OSError as e:
        raise StorageError(path, str(e)) from e
    if not lines or tuple(c.strip() for c in lines[0].split(",")) != DATASET_COLUMNS:
        raise ConfigurationError(f"{path}: expected header {','.join(DATASET_COLUMNS)}")

    samples = []
    for number, line in enumerate(lines[1:], start=2):
        try:
            v = [float(c) for c in line.split(",")]
            if len(v) != len(DATASET_COLUMNS):
                raise ValueError(f"expected {len(DATASET_COLUMNS)} columns, got {len(v)}")
            samples.append(BendSample(
                mt=v[0] * 1e-3,
                e=tuple(x * 1e6 for x in v[1:4]),
                l=tuple(x * 1e-3 for x in v[4:7]),
                cs=v[7] * 1e-3,
                a_hat=v[8] * 1e3,
            ))
        except ValueError as e:
            raise ConfigurationError(f"{path}:{number}: {e}") from e
    logger.debug(f"Read {len(samples)} samples from {path}")
    return samples


# Model

@dataclass(frozen=True)
class Normalizer:
    """Per-column min-max scaling; a column with zero range keeps span 1."""
    minimum: np.ndarray
    span: np.ndarray

    @classmethod
    def fit(cls, values: np.ndarray) -> "Normalizer":
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        minimum = values.min(axis=0)
        span = values.max(axis=0) - minimum
        span = np.where(span > 0, span, 1.0)
        return cls(minimum=minimum, span=span)

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (values - self.minimum) / self.span

    def inverse(self, values: np.ndarray) -> np.ndarray:
        return values * self.span + self.minimum


@dataclass
class Dense:
    weights: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray  # (fan_out,)

    @classmethod
    def initialize(cls, rng: np.random.Generator, fan_in: int, fan_out: int) -> "Dense":
        bound = math.sqrt(1.0 / fan_in)
        weights = rng.uniform(-bound, bound, (fan_in, fan_out))
        bias = rng.uniform(-bound, bound, fan_out)
        return cls(weights=weights, bias=bias)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights + self.bias


@dataclass
class SurrogateModel:
    layers: Dict[str, Dense]
    seed: int
    branch_width: int = 8
    fusion_width: int = 16
    input_normalizer: Optional[Normalizer] = None
    target_normalizer: Optional[Normalizer] = None

    @classmethod
    def initialize(cls, seed: int = 42, branch_width: int = 8, fusion_width: int = 16) -> "SurrogateModel":
        if branch_width < 1 or fusion_width < 1:
            raise ArgumentError("Layer widths must be positive")
        rng = np.random.default_rng(seed)
        layers = {f"branch_{name}": Dense.initialize(rng, width, branch_width) for name, width in BRANCHES}
        layers["fusion"] = Dense.initialize(rng, branch_width * len(BRANCHES), fusion_width)
        layers["output"] = Dense.initialize(rng, fusion_width, 1)
        return cls(layers=layers, seed=seed, branch_width=branch_width, fusion_width=fusion_width)

    @property
    def fitted(self) -> bool:
        return self.input_normalizer is not None and self.target_normalizer is not None

    def fit_normalizers(self, samples: Sequence[BendSample]) -> None:
        X, y = samples_to_arrays(samples)
        self.input_normalizer = Normalizer.fit(X)
        self.target_normalizer = Normalizer.fit(y)

    def parameters(self) -> List[np.ndarray]:
        """Parameter arrays in a fixed order: branches, fusion, output; weights before bias."""
        params = []
        for name in [f"branch_{n}" for n, _ in BRANCHES] + ["fusion", "output"]:
            params.extend([self.layers[name].weights, self.layers[name].bias])
        return params


def flat_parameters(model: SurrogateModel) -> np.ndarray:
    return np.concatenate([p.ravel() for p in model.parameters()])


def set_flat_parameters(model: SurrogateModel, flat: np.ndarray) -> None:
    offset = 0
    for p in model.parameters():
        p[...] = flat[offset:offset + p.size].reshape(p.shape)
        offset += p.size
    if offset != flat.size:
        raise ArgumentError(f"Expected {offset} parameters, got {flat.size}")


def _forward_normalized(model: SurrogateModel, Xn: np.ndarray):
    """Network output on normalized inputs, with the activations needed for backprop."""
    branch_out = {}
    for name, _ in BRANCHES:
        branch_out[name] = np.tanh(model.layers[f"branch_{name}"](Xn[:, BRANCH_SLICES[name]]))
    hidden = np.concatenate([branch_out[name] for name, _ in BRANCHES], axis=1)
    fused = np.tanh(model.layers["fusion"](hidden))
    output = model.layers["output"](fused)[:, 0]
    return output, (branch_out, hidden, fused)


def loss_and_gradients(model: SurrogateModel, Xn: np.ndarray, yn: np.ndarray, loss: str = "l1"):
    """
    Mean loss and its gradient for every parameter array, on normalized data.

    Args:
        model: Network to differentiate
        Xn: Normalized inputs, shape (n, 8)
        yn: Normalized targets, shape (n,)
        loss: "l1" for mean absolute error, "l2" for mean squared error

    Returns:
        (loss value, list of gradients aligned with model.parameters())
    """
    Xn = np.asarray(Xn, dtype=float)
    yn = np.asarray(yn, dtype=float)
    n = Xn.shape[0]
    output, (branch_out, hidden, fused) = _forward_normalized(model, Xn)
    residual = output - yn

    if loss == "l1":
        value = float(np.mean(np.abs(residual)))
        d_output = np.sign(residual) / n
    elif loss == "l2":
        value = float(np.mean(residual * residual))
        d_output = 2.0 * residual / n
    else:
        raise ArgumentError(f"Unknown loss {loss!r}")

    grads: Dict[str, Tuple[np.ndarray, np.ndarray]] = {}
    out_layer, fusion_layer = model.layers["output"], model.layers["fusion"]

    d_output = d_output[:, None]
    grads["output"] = (fused.T @ d_output, d_output.sum(axis=0))

    d_fused = (d_output @ out_layer.weights.T) * (1.0 - fused * fused)
    grads["fusion"] = (hidden.T @ d_fused, d_fused.sum(axis=0))

    d_hidden = d_fused @ fusion_layer.weights.T
    for k, (name, _) in enumerate(BRANCHES):
        h = branch_out[name]
        d_branch = d_hidden[:, k * model.branch_width:(k + 1) * model.branch_width] * (1.0 - h * h)
        grads[f"branch_{name}"] = (Xn[:, BRANCH_SLICES[name]].T @ d_branch, d_branch.sum(axis=0))

    ordered = []
    for name in [f"branch_{n}" for n, _ in BRANCHES] + ["fusion", "output"]:
        ordered.extend(grads[name])
    return value, ordered


def _require_fitted(model: SurrogateModel) -> None:
    if not model.fitted:
        raise ModelStateError("Surrogate normalizers are not fitted; train or load a model first")


def predict_array(model: SurrogateModel, X: np.ndarray) -> np.ndarray:
    """Predicted a (1/m) for raw SI inputs of shape (n, 8)."""
    _require_fitted(model)
    X = np.asarray(X, dtype=float).reshape(-1, N_INPUTS)
    output, _ = _forward_normalized(model, model.input_normalizer.transform(X))
    return model.target_normalizer.inverse(output[:, None])[:, 0]


def forward(model: SurrogateModel, mt: float, e: Sequence[float], l: Sequence[float], cs: float) -> float:
    """
    Predicted quadratic coefficient a (1/m).

    Args:
        mt: Field strength, tesla
        e: Young's modulus triple, pascals
        l: Section length triple, meters
        cs: Cross-section side, meters
    """
    if len(e) != 3 or len(l) != 3:
        raise ArgumentError("e and l must be triples")
    return float(predict_array(model, np.array([[mt, *e, *l, cs]]))[0])


def evaluate(model: SurrogateModel, samples: Sequence[BendSample], units: str = "normalized") -> float:
    """
    Mean squared error of the predictions.

    units="normalized" compares in target-normalized units, "per_m" in 1/m.
    """
    _require_fitted(model)
    if not samples:
        raise ArgumentError("Cannot evaluate on an empty dataset")
    X, y = samples_to_arrays(samples)
    output, _ = _forward_normalized(model, model.input_normalizer.transform(X))
    if units == "normalized":
        truth = model.target_normalizer.transform(y[:, None])[:, 0]
        predicted = output
    elif units == "per_m":
        truth = y
        predicted = model.target_normalizer.inverse(output[:, None])[:, 0]
    else:
        raise ArgumentError(f"Unknown units {units!r}; expected normalized or per_m")
    return float(np.mean((truth - predicted) ** 2))


class Adam:
    def __init__(self, params: List[np.ndarray], options: TrainOptions):
        self.params = params
        self.options = options
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, grads: List[np.ndarray]) -> None:
        o = self.options
        self.t += 1
        correction1 = 1.0 - o.beta1 ** self.t
        correction2 = 1.0 - o.beta2 ** self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= o.beta1
            m += (1.0 - o.beta1) * g
            v *= o.beta2
            v += (1.0 - o.beta2) * g * g
            p -= o.lr * (m / correction1) / (np.sqrt(v / correction2) + o.eps)


def train(
    model: SurrogateModel,
    samples: Sequence[BendSample],
    options: Optional[TrainOptions] = None,
    test_samples: Optional[Sequence[BendSample]] = None,
) -> TrainReport:
    """
    Full-batch Adam on the mean L1 loss. Mutates the model in place.

    Normalizers are fitted on `samples` before the first update. The loss
    history records the loss before each update.

    Raises:
        ArgumentError: Empty training set or epochs < 1
        TrainingError: The loss became non-finite
    """
    options = options or TrainOptions()
    if not samples:
        raise ArgumentError("Training set is empty")
    if options.epochs < 1:
        raise ArgumentError(f"epochs must be >= 1, got {options.epochs}")

    model.fit_normalizers(samples)
    X, y = samples_to_arrays(samples)
    Xn = model.input_normalizer.transform(X)
    yn = model.target_normalizer.transform(y[:, None])[:, 0]

    optimizer = Adam(model.parameters(), options)
    history = []
    start_time = time.time()
    report_every = max(1, options.epochs // 10)

    for epoch in range(1, options.epochs + 1):
        loss, grads = loss_and_gradients(model, Xn, yn, loss="l1")
        if not math.isfinite(loss):
            raise TrainingError(
                f"Loss became {loss} at epoch {epoch} (lr={options.lr:g}); "
                f"try a smaller learning rate such as {options.lr / 10:g}"
            )
        history.append(loss)
        optimizer.step(grads)
        if epoch % report_every == 0:
            logger.debug(f"Epoch {epoch}/{options.epochs}: L1 loss {loss:.6e}")

    best = int(np.argmin(history))
    report = TrainReport(
        loss_history=history,
        final_train_mse=evaluate(model, samples),
        test_mse=evaluate(model, test_samples) if test_samples else None,
        epochs=options.epochs,
        learning_rate=options.lr,
        best_epoch=best + 1,
        best_loss=history[best],
        final_loss=history[-1],
    )
    duration = time.time() - start_time
    logger.info(
        f"Trained surrogate for {options.epochs} epochs in {duration:.2f}s: "
        f"loss {history[0]:.4e} -> {history[-1]:.4e}, train MSE {report.final_train_mse:.3e}"
        + (f", test MSE {report.test_mse:.3e}" if report.test_mse is not None else "")
    )
    return report


def predict_library(
    model: SurrogateModel,
    specs: Sequence[RodSpec],
    fields_mT: Sequence[float] = DEFAULT_FIELDS_MT,
) -> List[PredictionRecord]:
    """Predicted coefficients for every (spec, field) pair, without solving."""
    if not specs or not fields_mT:
        raise ArgumentError("predict_library needs at least one spec and one field")
    rows = [(spec, f) for spec in specs for f in fields_mT]
    X = np.array([[f * 1e-3, *spec.moduli, *spec.lengths, spec.cross_section_side] for spec, f in rows])
    predictions = predict_array(model, X)
    return [
        PredictionRecord(spec_id=spec.name, field_mT=f, a_per_mm=float(a) * 1e-3)
        for (spec, f), a in zip(rows, predictions)
    ]


# Persistence

def _normalizer_file(normalizer: Optional[Normalizer]) -> Optional[NormalizerFile]:
    if normalizer is None:
        return None
    return NormalizerFile(minimum=normalizer.minimum.tolist(), span=normalizer.span.tolist())


def model_to_json(model: SurrogateModel) -> str:
    document = SurrogateFile(
        format_version=FORMAT_VERSION,
        seed=model.seed,
        architecture={
            "inputs": dict(BRANCHES),
            "branch_width": model.branch_width,
            "fusion_width": model.fusion_width,
            "activation": "tanh",
        },
        layers={
            name: LayerFile(shape=layer.weights.shape, weights=layer.weights.ravel().tolist(), bias=layer.bias.tolist())
            for name, layer in model.layers.items()
        },
        input_normalizer=_normalizer_file(model.input_normalizer),
        target_normalizer=_normalizer_file(model.target_normalizer),
        units={"inputs": "mt T, e Pa, l m, cs m", "output": "a 1/m"},
    )
    return json.dumps(document.model_dump(), indent=2) + "\n"


def save_model(model: SurrogateModel, path: Union[str, Path]) -> Path:
    return pipeline.write_bytes(path, model_to_json(model).encode("utf-8"))


def load_model(path: Union[str, Path]) -> SurrogateModel:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise StorageError(path, str(e)) from e
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Invalid model file {path}: {e}") from e

    try:
        document = SurrogateFile.model_validate(payload)
    except ValueError as e:
        raise ConfigurationError(f"Invalid model file {path}: {e}") from e
    if document.format_version != FORMAT_VERSION:
        raise ConfigurationError(f"{path}: unsupported format_version {document.format_version}")

    arch = document.architecture
    model = SurrogateModel.initialize(
        seed=document.seed,
        branch_width=int(arch.get("branch_width", 8)),
        fusion_width=int(arch.get("fusion_width", 16)),
    )
    for name, layer in model.layers.items():
        stored = document.layers.get(name)
        if stored is None or tuple(stored.shape) != layer.weights.shape:
            raise ConfigurationError(f"{path}: layer {name} missing or has the wrong shape")
        layer.weights[...] = np.array(stored.weights).reshape(stored.shape)
        layer.bias[...] = np.array(stored.bias)

    for attr in ("input_normalizer", "target_normalizer"):
        stored = getattr(document, attr)
        if stored is not None:
            setattr(model, attr, Normalizer(minimum=np.array(stored.minimum), span=np.array(stored.span)))
    logger.debug(f"Loaded surrogate model from {path}")
    return model
