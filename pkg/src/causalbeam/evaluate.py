"""Metrics and benchmark harness.

Top-k accuracy, effective spectral efficiency (the achievable rate scaled
by the fraction of the frame left after beam alignment), sweep/feedback
overhead counters, selection-runtime comparison, and the method-by-budget
sweep that produces the benchmark CSV/JSON report.

The strict ``effective_se`` raises when the alignment time exceeds the
frame; the harness instead reports SE = 0 with an ``ia_overflow`` flag for
such rows (an exhaustive 128-beam sweep does not fit in the default frame),
so infeasible baselines remain comparable.
"""

import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .channel import dft_codebook
from .lingam import discover
from .mlp import TrainConfig, fit_arrays, forward, init_model, predict_topk
from .seeding import stream_rng
from .selection import (
    SelectionResult,
    causal_select,
    correlation_select,
    random_select,
    shapley_select,
)
from .validation import check_count, check_positive

MODEL_METHODS = ("causal", "correlation", "shapley", "random")
BASELINE_METHODS = ("exhaustive", "mrt")

REPORT_COLUMNS = [
    "method", "m_tilde", "n_b", "top1", "top2", "mean_se", "ia_overflow",
    "sweep_count", "feedback_count", "select_elapsed_s", "prereq_train_s",
    "train_elapsed_s", "requires_csi", "seed",
]


@dataclass(frozen=True)
class SeConfig:
    t_frame: float = 10e-3
    t_slot: float = 0.1e-3
    t_predict: float = 0.0
    k: int = 1

    def __post_init__(self):
        check_positive(self.t_frame, "t_frame")
        check_positive(self.t_slot, "t_slot")
        if self.t_predict < 0:
            raise ValueError("t_predict must be >= 0")
        check_count(self.k, "k")


@dataclass
class BenchConfig:
    se: SeConfig = field(default_factory=SeConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    threshold: float = 0.05
    n_perms: int = 256
    n_explain: int = 1024
    seed: int = 0


def effective_se(snr_linear, n_b, cfg):
    """Frame-time-discounted rate: ((t_frame - (n_b*t_slot + t_predict)) /
    t_frame) * log2(1 + snr)."""
    if snr_linear < 0:
        raise ValueError("snr_linear must be >= 0")
    if n_b < 0:
        raise ValueError("n_b must be >= 0")
    t_ia = n_b * cfg.t_slot + cfg.t_predict
    if t_ia > cfg.t_frame:
        raise ValueError(
            f"alignment time {t_ia:g}s exceeds the frame {cfg.t_frame:g}s"
        )
    return (cfg.t_frame - t_ia) / cfg.t_frame * float(np.log2(1.0 + snr_linear))


def _se_mean(snr_array, n_b, cfg):
    """Mean effective SE over samples; infeasible alignment reports (0, True)."""
    t_ia = n_b * cfg.t_slot + cfg.t_predict
    if t_ia > cfg.t_frame:
        return 0.0, True
    frac = (cfg.t_frame - t_ia) / cfg.t_frame
    return float(np.mean(frac * np.log2(1.0 + snr_array))), False


def overhead(m_tilde, n_users, k):
    """(sweep_count, feedback_count) for serving n_users with m_tilde sensing
    beams and optional top-k refinement sweeps (the k > 1 indicator gates the
    per-user extras)."""
    m_tilde = check_count(m_tilde, "m_tilde")
    n_users = check_count(n_users, "n_users", minimum=0)
    k = check_count(k, "k")
    extra = 1 if k > 1 else 0
    sweep = m_tilde + n_users * k * extra
    feedback = n_users * m_tilde + n_users * extra
    return sweep, feedback


def top_k_accuracy(model, dataset, split, subset, k):
    """Fraction of split samples whose label is among the top k predictions."""
    idx = dataset.splits[split]
    x = dataset.x[np.ix_(idx, np.asarray(subset, dtype=np.int64))]
    y = dataset.y[idx]
    top = predict_topk(model, x, k)
    return float(np.mean(np.any(top == y[:, None], axis=1)))


def _narrow_codebook(dataset):
    if dataset.y_classes % dataset.n_bs != 0:
        raise ValueError(
            f"y_classes={dataset.y_classes} is not a multiple of n_bs={dataset.n_bs}"
        )
    return dft_codebook(dataset.n_bs, dataset.y_classes // dataset.n_bs)


def _require_channels(dataset, what):
    if dataset.h is None:
        raise ValueError(f"{what} needs per-sample channels, dataset has none")


def _beam_gains(dataset, idx):
    narrow = _narrow_codebook(dataset)
    return np.abs(dataset.h[idx].conj() @ narrow.vectors.T) ** 2


def _snr_of_beams(dataset, idx, beam_matrix):
    """Per-sample SNR of the best among each row's candidate beams."""
    gains = _beam_gains(dataset, idx)
    rows = np.arange(len(idx))[:, None]
    achieved = np.max(gains[rows, beam_matrix], axis=1)
    if dataset.noise_power > 0:
        return achieved / dataset.noise_power
    return np.full(len(idx), np.nan)


def make_selector(dataset, method, cfg, full_model=None):
    """One-time selection state for a method; returns (state_seconds, select_fn).

    select_fn(m_tilde, stream_index=0) yields a SelectionResult whose
    elapsed_s covers the full from-scratch cost of the method at that budget
    (state construction plus the per-budget step).
    """
    if method == "causal":
        x, y = dataset.split_arrays("train")
        t0 = time.perf_counter()
        z = np.column_stack([x, y.astype(np.float64)])
        graph = discover(z, target_index=dataset.m_w, threshold=cfg.threshold)
        state_s = time.perf_counter() - t0

        def select_fn(m_tilde, stream_index=0):
            result = causal_select(graph, dataset.m_w, m_tilde)
            result.elapsed_s += state_s
            return result

        select_fn.graph = graph
        return state_s, select_fn

    if method == "correlation":
        def select_fn(m_tilde, stream_index=0):
            return correlation_select(dataset, m_tilde)

        return 0.0, select_fn

    if method == "shapley":
        if full_model is None:
            raise ValueError("shapley selection requires a trained full-input model")

        def select_fn(m_tilde, stream_index=0):
            rng = stream_rng(cfg.seed, "shapley", stream_index)
            return shapley_select(
                full_model, dataset, m_tilde, cfg.n_perms, rng,
                n_explain=cfg.n_explain,
            )

        return 0.0, select_fn

    if method == "random":
        def select_fn(m_tilde, stream_index=0):
            rng = stream_rng(cfg.seed, "select", stream_index)
            return random_select(dataset.m_w, m_tilde, rng)

        return 0.0, select_fn

    raise ValueError(f"unknown model-based selection method {method!r}")


def train_full_model(dataset, cfg):
    """Train the all-beams classifier (shapley prerequisite); returns (model, seconds)."""
    t0 = time.perf_counter()
    model = init_model(dataset.m_w, dataset.y_classes, cfg.seed)
    model, _ = fit_arrays(
        model,
        *dataset.split_arrays("train"),
        *dataset.split_arrays("val"),
        cfg.train,
    )
    return model, time.perf_counter() - t0


def _model_row(dataset, method, m_tilde, cfg, select_fn, prereq_train_s, stream_index):
    result = select_fn(m_tilde, stream_index)
    subset = result.sorted()

    t0 = time.perf_counter()
    model = init_model(len(subset), dataset.y_classes, cfg.seed)
    x_tr, y_tr = dataset.split_arrays("train")
    x_va, y_va = dataset.split_arrays("val")
    model, _ = fit_arrays(
        model, x_tr[:, subset], y_tr, x_va[:, subset], y_va, cfg.train
    )
    train_s = time.perf_counter() - t0

    top1 = top_k_accuracy(model, dataset, "test", subset, 1)
    top2 = top_k_accuracy(model, dataset, "test", subset, 2)

    k = cfg.se.k
    n_b = m_tilde + (k if k > 1 else 0)
    test_idx = dataset.splits["test"]
    mean_se, overflow = float("nan"), False
    if dataset.h is not None and dataset.noise_power > 0:
        beams = predict_topk(model, dataset.x[np.ix_(test_idx, np.asarray(subset))], k)
        snr = _snr_of_beams(dataset, test_idx, beams)
        mean_se, overflow = _se_mean(snr, n_b, cfg.se)
    sweep, feedback = overhead(m_tilde, len(test_idx), k)

    return {
        "method": method, "m_tilde": m_tilde, "n_b": n_b,
        "top1": top1, "top2": top2, "mean_se": mean_se, "ia_overflow": overflow,
        "sweep_count": sweep, "feedback_count": feedback,
        "select_elapsed_s": result.elapsed_s, "prereq_train_s": prereq_train_s,
        "train_elapsed_s": train_s, "requires_csi": False, "seed": cfg.seed,
    }


def _exhaustive_row(dataset, cfg):
    """Noisy exhaustive sweep over the narrow codebook; no model, n_b = Y."""
    _require_channels(dataset, "exhaustive baseline")
    test_idx = dataset.splits["test"]
    gains = _beam_gains(dataset, test_idx)
    amp = dataset.h[test_idx].conj() @ _narrow_codebook(dataset).vectors.T
    if dataset.noise_power > 0:
        rng = stream_rng(cfg.seed, "eval")
        scale = np.sqrt(dataset.noise_power / 2.0)
        amp = amp + scale * (
            rng.standard_normal(amp.shape) + 1j * rng.standard_normal(amp.shape)
        )
    rssi = np.abs(amp) ** 2
    ranking = np.argsort(-rssi, axis=1, kind="stable")
    y = dataset.y[test_idx]
    top1 = float(np.mean(ranking[:, 0] == y))
    top2 = float(np.mean(np.any(ranking[:, :2] == y[:, None], axis=1)))
    n_b = dataset.y_classes
    mean_se, overflow = float("nan"), False
    if dataset.noise_power > 0:
        rows = np.arange(len(test_idx))
        snr = gains[rows, ranking[:, 0]] / dataset.noise_power
        mean_se, overflow = _se_mean(snr, n_b, cfg.se)
    sweep, feedback = overhead(n_b, len(test_idx), 1)
    return {
        "method": "exhaustive", "m_tilde": n_b, "n_b": n_b,
        "top1": top1, "top2": top2, "mean_se": mean_se, "ia_overflow": overflow,
        "sweep_count": sweep, "feedback_count": feedback,
        "select_elapsed_s": 0.0, "prereq_train_s": 0.0, "train_elapsed_s": 0.0,
        "requires_csi": False, "seed": cfg.seed,
    }


def _mrt_row(dataset, cfg, phase_bits=3):
    """Quantized-phase matched filter from perfect channel knowledge; no sweep."""
    _require_channels(dataset, "matched-filter baseline")
    test_idx = dataset.splits["test"]
    h = dataset.h[test_idx]
    mag = np.abs(h)
    nonzero = np.any(h != 0, axis=1)
    levels = 2 ** phase_bits
    step = 2 * np.pi / levels
    phase = np.mod(np.angle(h), 2 * np.pi)
    idx = np.ceil(phase / step - 0.5) % levels
    w = np.exp(1j * idx * step) / np.sqrt(dataset.n_bs)
    gain = np.abs(np.sum(h.conj() * w, axis=1)) ** 2
    gain[~nonzero] = 0.0
    mean_se, overflow = float("nan"), False
    if dataset.noise_power > 0:
        mean_se, overflow = _se_mean(gain / dataset.noise_power, 0, cfg.se)
    return {
        "method": "mrt", "m_tilde": 0, "n_b": 0,
        "top1": float("nan"), "top2": float("nan"),
        "mean_se": mean_se, "ia_overflow": overflow,
        "sweep_count": 0, "feedback_count": 0,
        "select_elapsed_s": 0.0, "prereq_train_s": 0.0, "train_elapsed_s": 0.0,
        "requires_csi": True, "seed": cfg.seed,
    }


def evaluate_method(dataset, method, m_tilde, cfg, selector=None,
                    full_model=None, prereq_train_s=0.0, stream_index=0):
    """One benchmark row: select, retrain, and score one method at one budget.

    ``selector`` (from make_selector) and ``full_model`` let a sweep share
    the one-time graph discovery / full-model training across budgets.
    """
    if method in BASELINE_METHODS:
        return _exhaustive_row(dataset, cfg) if method == "exhaustive" else _mrt_row(dataset, cfg)
    if method not in MODEL_METHODS:
        raise ValueError(f"unknown method {method!r}")
    if selector is None:
        if method == "shapley" and full_model is None:
            full_model, prereq_train_s = train_full_model(dataset, cfg)
        _, selector = make_selector(dataset, method, cfg, full_model=full_model)
    return _model_row(dataset, method, m_tilde, cfg, selector, prereq_train_s, stream_index)


@dataclass
class BenchReport:
    rows: list
    seed: int
    machine: str = field(default_factory=platform.platform)
    config: dict = field(default_factory=dict)

    def column(self, name):
        return [row[name] for row in self.rows]

    def to_csv(self, path):
        lines = [",".join(REPORT_COLUMNS)]
        for row in self.rows:
            fields = []
            for col in REPORT_COLUMNS:
                v = row[col]
                if isinstance(v, bool):
                    fields.append(str(int(v)))
                elif isinstance(v, float):
                    fields.append(repr(v))
                else:
                    fields.append(str(v))
            lines.append(",".join(fields))
        with open(path, "w", encoding="ascii") as f:
            f.write("\n".join(lines))
            f.write("\n")

    def to_json(self, path):
        payload = {
            "seed": self.seed,
            "machine": self.machine,
            "config": self.config,
            "columns": REPORT_COLUMNS,
            "rows": self.rows,
        }
        with open(path, "w", encoding="ascii") as f:
            json.dump(payload, f, indent=2, allow_nan=True, default=_json_default)
            f.write("\n")


def _json_default(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value)}")


def sweep_m_tilde(dataset, method, m_values, cfg, full_model=None):
    """Evaluate one method over a grid of budgets, sharing selection state."""
    prereq = 0.0
    if method == "shapley" and full_model is None:
        full_model, prereq = train_full_model(dataset, cfg)
    rows = []
    if method in MODEL_METHODS:
        _, selector = make_selector(dataset, method, cfg, full_model=full_model)
        for i, m in enumerate(m_values):
            rows.append(_model_row(dataset, method, int(m), cfg, selector, prereq, i))
    else:
        rows.append(evaluate_method(dataset, method, 0, cfg))
    return BenchReport(rows=rows, seed=cfg.seed)


def run_bench(dataset, methods, m_values, cfg):
    """Full matrix: every model-based method at every budget; the exhaustive
    and matched-filter baselines contribute one row each when listed."""
    rows = []
    full_model = None
    prereq = 0.0
    if "shapley" in methods:
        full_model, prereq = train_full_model(dataset, cfg)
    for method in methods:
        if method in BASELINE_METHODS:
            rows.append(evaluate_method(dataset, method, 0, cfg))
            continue
        report = sweep_m_tilde(dataset, method, m_values, cfg, full_model=full_model)
        for row in report.rows:
            if method == "shapley":
                row["prereq_train_s"] = prereq
            rows.append(row)
    return BenchReport(rows=rows, seed=cfg.seed)


def evaluate_trained(dataset, model, selection, cfg):
    """Score an already-trained reduced model against its selection record."""
    subset = selection.sorted()
    if model.layer_sizes[0] != len(subset):
        raise ValueError(
            f"model expects {model.layer_sizes[0]} inputs, selection has {len(subset)}"
        )
    top1 = top_k_accuracy(model, dataset, "test", subset, 1)
    top2 = top_k_accuracy(model, dataset, "test", subset, 2)
    k = cfg.se.k
    n_b = selection.m_tilde + (k if k > 1 else 0)
    test_idx = dataset.splits["test"]
    mean_se, overflow = float("nan"), False
    if dataset.h is not None and dataset.noise_power > 0:
        beams = predict_topk(model, dataset.x[np.ix_(test_idx, np.asarray(subset))], k)
        snr = _snr_of_beams(dataset, test_idx, beams)
        mean_se, overflow = _se_mean(snr, n_b, cfg.se)
    sweep, feedback = overhead(selection.m_tilde, len(test_idx), k)
    return {
        "method": selection.method, "m_tilde": selection.m_tilde, "n_b": n_b,
        "top1": top1, "top2": top2, "mean_se": mean_se, "ia_overflow": overflow,
        "sweep_count": sweep, "feedback_count": feedback,
        "select_elapsed_s": selection.elapsed_s, "prereq_train_s": 0.0,
        "train_elapsed_s": 0.0, "requires_csi": False, "seed": cfg.seed,
    }


def time_selection(dataset, methods, m_tilde, cfg, full_model=None):
    """Wall-clock of each selection method on identical data.

    The causal entry covers graph discovery plus subset construction and
    needs no classifier; the shapley entry reports the attribution phase in
    'select_s' and adds its prerequisite full-input model training in
    'with_train_s'.
    """
    timings = {}
    for method in methods:
        if method == "shapley":
            t_train = 0.0
            if full_model is None:
                full_model, t_train = train_full_model(dataset, cfg)
            _, select_fn = make_selector(dataset, method, cfg, full_model=full_model)
            t0 = time.perf_counter()
            select_fn(m_tilde)
            attribution = time.perf_counter() - t0
            timings[method] = {"select_s": attribution,
                               "with_train_s": attribution + t_train}
        else:
            t0 = time.perf_counter()
            _, select_fn = make_selector(dataset, method, cfg)
            select_fn(m_tilde)
            elapsed = time.perf_counter() - t0
            timings[method] = {"select_s": elapsed, "with_train_s": elapsed}
    return timings
