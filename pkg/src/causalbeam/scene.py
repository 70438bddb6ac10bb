"""Synthetic scenes, RSSI sweeps, dataset assembly and persistence.

A scene is a list of per-user multipath parameter sets drawn from a
geometric model: departure angles uniform over a configured interval and
complex Gaussian path gains whose powers decay by a fixed number of dB per
path index. Channels are normalized by the dataset-wide maximum absolute
entry, labels come from a noise-free exhaustive search over the narrow
codebook, and the classifier inputs are noisy sensing-beam power sweeps.

Since physical units do not survive the max-abs normalization, measurement
noise is parameterized by ``sensing_snr_db``: the SNR of the strongest
sensing beam of the strongest user after normalization.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import SENSING_DFT, Codebook, PathSet
from .seeding import stream_rng
from .validation import DataFormatError, as_complex_vector, check_count

DATASET_FORMAT = "causalbeam-dataset v1"


@dataclass(frozen=True)
class SceneConfig:
    n_bs: int = 32
    n_users: int = 8000
    l_paths: int = 3
    aod_range: tuple = (-np.pi / 2, np.pi / 2)
    path_decay_db: float = 6.0
    seed: int = 0
    sensing_snr_db: float = 20.0

    def __post_init__(self):
        check_count(self.n_users, "n_users")
        check_count(self.l_paths, "l_paths")
        check_count(self.n_bs, "n_bs")
        lo, hi = self.aod_range
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
            raise ValueError(f"aod_range must be a nonempty interval, got {self.aod_range}")
        if lo < -np.pi / 2 or hi > np.pi / 2:
            raise ValueError("aod_range must lie within [-pi/2, pi/2]")


@dataclass
class Dataset:
    """RSSI sweep vectors, optimal-beam labels and per-sample metadata.

    ``x[i]`` is the sensing-beam power vector of sample i (linear units after
    channel normalization), ``y[i]`` the noise-free optimal narrow-beam index,
    ``ue[i]`` the originating user index and ``opt_gain[i]`` the gain of the
    optimal narrow beam. ``h`` holds the normalized channel vectors when the
    file carried them (needed for spectral-efficiency evaluation).
    """

    x: np.ndarray
    y: np.ndarray
    ue: np.ndarray
    opt_gain: np.ndarray
    splits: dict
    m_w: int
    y_classes: int
    n_bs: int
    norm: float
    sensing_snr_db: float
    noise_power: float
    seed: int
    h: np.ndarray | None = None

    @property
    def n_samples(self):
        return self.x.shape[0]

    def split_arrays(self, split):
        """(x, y) restricted to one of the 'train' / 'val' / 'test' splits."""
        idx = self.splits[split]
        return self.x[idx], self.y[idx]

    def validate(self):
        n = self.n_samples
        if self.x.shape != (n, self.m_w):
            raise ValueError("x shape inconsistent with m_w")
        if np.any(self.x < 0):
            raise ValueError("RSSI entries must be nonnegative")
        if np.any(self.y < 0) or np.any(self.y >= self.y_classes):
            raise ValueError("labels out of range")
        seen = np.concatenate([self.splits[k] for k in ("train", "val", "test")])
        if sorted(seen.tolist()) != list(range(n)):
            raise ValueError("splits must be disjoint and cover all samples")
        return self


def generate_scene(cfg):
    """Draw per-user multipath parameters; deterministic given cfg.seed.

    User u owns random stream u of the 'scene' stream family, so the result
    is identical no matter how generation is parallelized or chunked.
    """
    lo, hi = cfg.aod_range
    powers = 10.0 ** (-cfg.path_decay_db * np.arange(cfg.l_paths) / 10.0)
    sigma = np.sqrt(powers / 2.0)
    scene = []
    for u in range(cfg.n_users):
        rng = stream_rng(cfg.seed, "scene", u)
        aods = rng.uniform(lo, hi, cfg.l_paths)
        gains = sigma * (rng.standard_normal(cfg.l_paths) + 1j * rng.standard_normal(cfg.l_paths))
        scene.append(PathSet(gains=gains, aods=aods))
    return scene


def sweep_rssi(h, sensing, noise_power, rng):
    """Per-beam received powers |h^H w_i + z_i|^2 over the sensing codebook.

    z_i is circular complex Gaussian with total variance noise_power (the
    unit pilot symbol and transmit power are folded into the channel
    normalization).
    """
    h = as_complex_vector(h, "h")
    if sensing.kind != SENSING_DFT:
        raise ValueError(f"sensing codebook required, got kind {sensing.kind!r}")
    if noise_power < 0:
        raise ValueError("noise_power must be >= 0")
    a = sensing.vectors @ h.conj()
    if noise_power > 0:
        scale = np.sqrt(noise_power / 2.0)
        a = a + scale * (rng.standard_normal(a.size) + 1j * rng.standard_normal(a.size))
    return np.abs(a) ** 2


def _split_sizes(n):
    n_train = int(round(0.7 * n))
    n_val = int(round(0.1 * n))
    return n_train, n_val, n - n_train - n_val


def build_dataset(scene, sensing, narrow, cfg):
    """Assemble the labeled RSSI dataset from a scene and two codebooks.

    Channels are normalized jointly by the scene-wide max absolute entry,
    labels are computed by a noise-free exhaustive search over the narrow
    codebook, and the sweep noise power is set so that the strongest sensing
    beam in the scene sits at cfg.sensing_snr_db.
    """
    if sensing.kind != SENSING_DFT:
        raise ValueError(f"sensing codebook required, got kind {sensing.kind!r}")
    if sensing.n_bs != cfg.n_bs or narrow.n_bs != cfg.n_bs:
        raise ValueError(
            f"codebooks built for {sensing.n_bs}/{narrow.n_bs} antennas, "
            f"scene config has {cfg.n_bs}"
        )
    if len(scene) != cfg.n_users:
        raise ValueError(f"scene has {len(scene)} users, config expects {cfg.n_users}")

    n = np.arange(cfg.n_bs)[None, :]
    channels = np.zeros((cfg.n_users, cfg.n_bs), dtype=np.complex128)
    for u, paths in enumerate(scene):
        responses = np.exp(1j * np.pi * n * np.sin(paths.aods)[:, None]) / np.sqrt(cfg.n_bs)
        channels[u] = paths.gains @ responses

    norm = float(np.max(np.abs(channels)))
    if norm == 0:
        raise ValueError("scene produced all-zero channels; cannot normalize")
    channels = channels / norm

    narrow_gains = np.abs(channels.conj() @ narrow.vectors.T) ** 2
    labels = np.argmax(narrow_gains, axis=1).astype(np.int64)
    opt_gain = narrow_gains[np.arange(cfg.n_users), labels]

    sense_amp = channels.conj() @ sensing.vectors.T
    peak = float(np.max(np.abs(sense_amp) ** 2))
    if math.isinf(cfg.sensing_snr_db):
        noise_power = 0.0
    else:
        noise_power = peak / 10.0 ** (cfg.sensing_snr_db / 10.0)

    x = np.empty((cfg.n_users, sensing.size))
    scale = np.sqrt(noise_power / 2.0)
    for u in range(cfg.n_users):
        a = sense_amp[u]
        if noise_power > 0:
            rng = stream_rng(cfg.seed, "noise", u)
            a = a + scale * (rng.standard_normal(a.size) + 1j * rng.standard_normal(a.size))
        x[u] = np.abs(a) ** 2

    perm = stream_rng(cfg.seed, "split").permutation(cfg.n_users)
    n_train, n_val, _ = _split_sizes(cfg.n_users)
    splits = {
        "train": np.sort(perm[:n_train]),
        "val": np.sort(perm[n_train:n_train + n_val]),
        "test": np.sort(perm[n_train + n_val:]),
    }

    return Dataset(
        x=x,
        y=labels,
        ue=np.arange(cfg.n_users, dtype=np.int64),
        opt_gain=opt_gain,
        splits=splits,
        m_w=sensing.size,
        y_classes=narrow.size,
        n_bs=cfg.n_bs,
        norm=norm,
        sensing_snr_db=float(cfg.sensing_snr_db),
        noise_power=noise_power,
        seed=int(cfg.seed),
        h=channels,
    ).validate()


def _fmt(value):
    return repr(float(value))


def _indices(arr):
    return ",".join(str(int(i)) for i in arr)


def save_dataset(dataset, path):
    """Write a dataset as a self-describing text file; round-trips bit-exact.

    Layout: a header of key=value lines (counts, seed, normalization constant,
    noise parameters, split index lists, column layout) followed by one
    comma-separated row per sample. Floats are written with full round-trip
    precision so save -> load -> save is byte-identical.
    """
    has_h = dataset.h is not None
    cols = [f"x[{dataset.m_w}]", "y", "ue", "opt_gain"]
    if has_h:
        cols += [f"h_re[{dataset.n_bs}]", f"h_im[{dataset.n_bs}]"]
    lines = [
        f"# {DATASET_FORMAT}",
        f"m_w={dataset.m_w}",
        f"y_classes={dataset.y_classes}",
        f"n_bs={dataset.n_bs}",
        f"count={dataset.n_samples}",
        f"seed={dataset.seed}",
        f"norm={_fmt(dataset.norm)}",
        f"sensing_snr_db={_fmt(dataset.sensing_snr_db)}",
        f"noise_power={_fmt(dataset.noise_power)}",
        f"channels={int(has_h)}",
        f"split_train={_indices(dataset.splits['train'])}",
        f"split_val={_indices(dataset.splits['val'])}",
        f"split_test={_indices(dataset.splits['test'])}",
        f"columns={','.join(cols)}",
    ]
    for i in range(dataset.n_samples):
        row = [_fmt(v) for v in dataset.x[i]]
        row.append(str(int(dataset.y[i])))
        row.append(str(int(dataset.ue[i])))
        row.append(_fmt(dataset.opt_gain[i]))
        if has_h:
            row += [_fmt(v) for v in dataset.h[i].real]
            row += [_fmt(v) for v in dataset.h[i].imag]
        lines.append(",".join(row))
    with open(path, "w", encoding="ascii") as f:
        f.write("\n".join(lines))
        f.write("\n")


def _parse_header_int(header, key, line_no):
    try:
        return int(header[key])
    except (KeyError, ValueError):
        raise DataFormatError(f"line {line_no[key]}: bad or missing integer field {key!r}")


def load_dataset(path):
    """Read a dataset file written by save_dataset (or an external export).

    Raises DataFormatError naming the offending line for version mismatches,
    malformed headers, short rows and truncated files.
    """
    with open(path, "r", encoding="ascii") as f:
        lines = f.read().splitlines()
    if not lines or not lines[0].startswith("# "):
        raise DataFormatError("line 1: missing format header")
    found = lines[0][2:].strip()
    if found != DATASET_FORMAT:
        raise DataFormatError(
            f"line 1: format mismatch: expected {DATASET_FORMAT!r}, found {found!r}"
        )

    header = {}
    line_no = {}
    body_start = None
    for i, line in enumerate(lines[1:], start=2):
        if "=" not in line:
            body_start = i
            break
        key, value = line.split("=", 1)
        header[key.strip()] = value.strip()
        line_no[key.strip()] = i
    required = [
        "m_w", "y_classes", "n_bs", "count", "seed", "norm", "sensing_snr_db",
        "noise_power", "channels", "split_train", "split_val", "split_test",
    ]
    for key in required:
        if key not in header:
            raise DataFormatError(f"header missing required field {key!r}")
        line_no.setdefault(key, 1)

    m_w = _parse_header_int(header, "m_w", line_no)
    y_classes = _parse_header_int(header, "y_classes", line_no)
    n_bs = _parse_header_int(header, "n_bs", line_no)
    count = _parse_header_int(header, "count", line_no)
    seed = _parse_header_int(header, "seed", line_no)
    has_h = bool(_parse_header_int(header, "channels", line_no))
    try:
        norm = float(header["norm"])
        sensing_snr_db = float(header["sensing_snr_db"])
        noise_power = float(header["noise_power"])
    except ValueError as exc:
        raise DataFormatError(f"bad float header field: {exc}")

    splits = {}
    for name in ("train", "val", "test"):
        raw = header[f"split_{name}"]
        try:
            splits[name] = np.array(
                [int(tok) for tok in raw.split(",") if tok != ""], dtype=np.int64
            )
        except ValueError:
            raise DataFormatError(f"line {line_no[f'split_{name}']}: bad split index list")

    expected_fields = m_w + 3 + (2 * n_bs if has_h else 0)
    if body_start is None:
        if count == 0:
            raise DataFormatError("file has no data rows")
        raise DataFormatError(f"truncated file: expected {count} rows, found 0")
    body = lines[body_start - 1:]
    if len(body) < count:
        raise DataFormatError(
            f"truncated file: expected {count} rows, found {len(body)} "
            f"(file ends at line {body_start - 1 + len(body)})"
        )
    if len(body) > count:
        raise DataFormatError(f"expected {count} rows, found {len(body)} data lines")

    parts = []
    for r, line in enumerate(body):
        fields = line.split(",")
        if len(fields) != expected_fields:
            raise DataFormatError(
                f"row {r} (line {body_start + r}): expected {expected_fields} "
                f"values, found {len(fields)}"
            )
        parts.append(fields)
    try:
        table = np.array(parts, dtype=np.float64)
    except ValueError as exc:
        raise DataFormatError(f"non-numeric value in data rows: {exc}")

    x = table[:, :m_w]
    y = table[:, m_w].astype(np.int64)
    ue = table[:, m_w + 1].astype(np.int64)
    opt_gain = table[:, m_w + 2]
    h = None
    if has_h:
        h_re = table[:, m_w + 3:m_w + 3 + n_bs]
        h_im = table[:, m_w + 3 + n_bs:]
        h = h_re + 1j * h_im

    ds = Dataset(
        x=x, y=y, ue=ue, opt_gain=opt_gain, splits=splits,
        m_w=m_w, y_classes=y_classes, n_bs=n_bs, norm=norm,
        sensing_snr_db=sensing_snr_db, noise_power=noise_power,
        seed=seed, h=h,
    )
    try:
        return ds.validate()
    except ValueError as exc:
        raise DataFormatError(f"inconsistent dataset contents: {exc}")
