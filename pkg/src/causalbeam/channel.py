"""Complex beamforming math for a half-wavelength uniform linear array.

Steering vectors, DFT and oversampled-DFT codebooks, geometric multipath
channel synthesis, beam gain and SNR, exhaustive best-beam search, and a
phase-quantized matched-filter beamformer used as a perfect-CSI baseline.

Angles are departure angles measured from array broadside, in radians.
The half-wavelength element spacing is substituted directly into the phase
increment, so the array response along the aperture is exp(i*pi*n*sin(aod)).
All codewords are unit-norm and constant-modulus (analog phase shifters).
"""

from dataclasses import dataclass

import numpy as np

from .validation import as_complex_vector, check_count, check_positive

SENSING_DFT = "sensing_dft"
NARROW_ODFT = "narrow_odft"


@dataclass(frozen=True)
class PathSet:
    """Multipath parameters for one user: complex gains and departure angles."""

    gains: np.ndarray
    aods: np.ndarray

    def __post_init__(self):
        gains = as_complex_vector(self.gains, "gains")
        aods = np.asarray(self.aods, dtype=np.float64)
        if aods.ndim != 1 or aods.size != gains.size:
            raise ValueError("gains and aods must be 1-D with equal length")
        if gains.size < 1:
            raise ValueError("a PathSet needs at least one path")
        if not np.all(np.isfinite(aods)):
            raise ValueError("aods contain non-finite values")
        if np.any(aods < -np.pi / 2) or np.any(aods > np.pi / 2):
            raise ValueError("aods must lie in [-pi/2, pi/2]")
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "aods", aods)

    @property
    def count(self):
        return self.gains.size


@dataclass(frozen=True)
class Codebook:
    """Set of unit-norm constant-modulus codewords, one per row."""

    vectors: np.ndarray  # shape (size, n_bs)
    kind: str

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.complex128)
        if vectors.ndim != 2 or vectors.shape[0] < 1:
            raise ValueError("codebook vectors must be a nonempty 2-D array")
        if self.kind not in (SENSING_DFT, NARROW_ODFT):
            raise ValueError(f"unknown codebook kind {self.kind!r}")
        object.__setattr__(self, "vectors", vectors)

    @property
    def size(self):
        return self.vectors.shape[0]

    @property
    def n_bs(self):
        return self.vectors.shape[1]


def steering_vector(aod, n_bs):
    """Array response for departure angle aod.

    Entry n is exp(i*pi*n*sin(aod)) / sqrt(n_bs) for n = 0..n_bs-1, i.e. the
    half-wavelength ULA response with unit Euclidean norm.
    """
    n_bs = check_count(n_bs, "n_bs")
    aod = float(aod)
    if not np.isfinite(aod):
        raise ValueError(f"aod must be finite, got {aod!r}")
    n = np.arange(n_bs)
    return np.exp(1j * np.pi * n * np.sin(aod)) / np.sqrt(n_bs)


def dft_codebook(n_bs, oversampling=1):
    """DFT codebook over a uniform spatial-frequency grid.

    Produces n_bs * oversampling codewords; codeword m has entries
    exp(-2i*pi*n*m / (n_bs*oversampling)) / sqrt(n_bs). With oversampling 1
    the set is orthonormal (the sensing codebook); larger factors give the
    finer narrow-beam grid.
    """
    n_bs = check_count(n_bs, "n_bs")
    oversampling = check_count(oversampling, "oversampling")
    size = n_bs * oversampling
    n = np.arange(n_bs)[None, :]
    m = np.arange(size)[:, None]
    vectors = np.exp(-2j * np.pi * n * m / size) / np.sqrt(n_bs)
    kind = SENSING_DFT if oversampling == 1 else NARROW_ODFT
    return Codebook(vectors=vectors, kind=kind)


def synth_channel(paths, n_bs):
    """Geometric multipath channel: the sum of gain-weighted steering vectors."""
    if not isinstance(paths, PathSet):
        raise ValueError("paths must be a PathSet")
    n_bs = check_count(n_bs, "n_bs")
    n = np.arange(n_bs)[None, :]
    responses = np.exp(1j * np.pi * n * np.sin(paths.aods)[:, None]) / np.sqrt(n_bs)
    return paths.gains @ responses


def beam_gain(h, w):
    """Received beamforming gain |h^H w|^2."""
    h = as_complex_vector(h, "h")
    w = as_complex_vector(w, "w")
    if h.size != w.size:
        raise ValueError(f"dimension mismatch: h has {h.size} entries, w has {w.size}")
    return float(np.abs(np.vdot(h, w)) ** 2)


def snr(h, w, p_bs, noise_power):
    """Post-beamforming SNR p_bs * |h^H w|^2 / noise_power for unit-power symbols."""
    p_bs = check_positive(p_bs, "p_bs")
    noise_power = check_positive(noise_power, "noise_power")
    return p_bs * beam_gain(h, w) / noise_power


def best_beam(h, codebook):
    """Index of the codeword maximizing |h^H w|^2; ties go to the lowest index."""
    h = as_complex_vector(h, "h")
    if not isinstance(codebook, Codebook):
        raise ValueError("codebook must be a Codebook")
    if codebook.n_bs != h.size:
        raise ValueError(
            f"dimension mismatch: h has {h.size} entries, codebook has {codebook.n_bs}"
        )
    gains = np.abs(codebook.vectors @ h.conj()) ** 2
    return int(np.argmax(gains))


def quantized_mrt(h, phase_bits):
    """Constant-modulus matched filter with the phase of each entry quantized.

    Entry n is exp(i * q(arg(h_n))) / sqrt(N) where q rounds to the nearest of
    2**phase_bits uniform levels on [0, 2*pi); a phase exactly on the boundary
    between two levels takes the lower level. For a rank-1 vector channel this
    is the quantized-phase SVD beamformer.
    """
    h = as_complex_vector(h, "h")
    phase_bits = check_count(phase_bits, "phase_bits")
    if not np.any(h != 0):
        raise ValueError("zero channel: entry phases are undefined")
    levels = 2 ** phase_bits
    step = 2 * np.pi / levels
    phase = np.mod(np.angle(h), 2 * np.pi)
    idx = np.ceil(phase / step - 0.5) % levels
    return np.exp(1j * idx * step) / np.sqrt(h.size)
