"""Effective fidelity, generation rate and simulated tomography of heralded memory states.

Two-mode memory states are analysed in the 4-dimensional sector where each
mode holds at most one excitation, in the basis |00>, |01>, |10>, |11> with
the first memory (mode 0) as the left digit.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fock import DensityMatrix, FockSpace, Ket, NumericalError, tmsv_amplitudes

__all__ = [
    "EffectiveState",
    "InterferencePoint",
    "SinusoidFit",
    "DiagonalEstimate",
    "CoherenceEstimate",
    "AnalyticOracle",
    "qubit_sector",
    "effective_density_matrix",
    "effective_fidelity",
    "bell_vector",
    "generation_rate",
    "tomography_diagonal",
    "fit_sinusoid",
    "tomography_coherence",
    "assemble_reconstruction",
    "analytic_heralded_state",
    "analytic_heralded_mixture",
]

log = logging.getLogger(__name__)

SECTOR_LABELS = ("00", "01", "10", "11")


@dataclass(frozen=True)
class EffectiveState:
    """4x4 state of the <=1-excitation sector.

    ``normalization`` is the trace removed or divided out when the matrix was
    built; ``sector_weight`` is the weight the sector carried in the full
    truncated state (1 when the input already lived in the sector).
    """

    rho_tilde: np.ndarray
    normalization: float
    sector_weight: float = 1.0

    def __post_init__(self):
        rho = np.array(self.rho_tilde, dtype=complex)
        if rho.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got shape {rho.shape}")
        rho.flags.writeable = False
        object.__setattr__(self, "rho_tilde", rho)

    def element(self, row: str, col: str) -> complex:
        return complex(self.rho_tilde[SECTOR_LABELS.index(row), SECTOR_LABELS.index(col)])

    @property
    def populations(self) -> dict[str, float]:
        return {lab: float(self.rho_tilde[i, i].real) for i, lab in enumerate(SECTOR_LABELS)}

    @property
    def coherence(self) -> complex:
        """<01|rho|10>."""
        return complex(self.rho_tilde[1, 2])


def _sector_indices(truncation: int) -> list[int]:
    dim = truncation + 1
    return [m * dim + n for m in (0, 1) for n in (0, 1)]


def qubit_sector(state: DensityMatrix | np.ndarray) -> tuple[np.ndarray, float]:
    """Restrict a two-mode state to the <=1-excitation sector.

    Returns the renormalized 4x4 block and the weight it carried.
    """
    if isinstance(state, DensityMatrix):
        if state.n_modes != 2:
            raise ValueError(f"expected a two-mode state, got {state.n_modes} modes")
        idx = _sector_indices(state.space.truncation)
        data = state.data
    else:
        data = np.asarray(state, dtype=complex)
        if data.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix or two-mode DensityMatrix, got shape {data.shape}")
        idx = [0, 1, 2, 3]
    block = data[np.ix_(idx, idx)]
    weight = float(np.trace(block).real)
    if not weight > 1e-12:
        raise NumericalError("state has no weight in the <=1-excitation sector")
    return block / weight, weight


def effective_density_matrix(rho: DensityMatrix | np.ndarray) -> EffectiveState:
    """Drop the |00> row and column and renormalize (post-selection on an excitation).

    Larger truncations are first projected onto the <=1-excitation sector.
    """
    block, weight = qubit_sector(rho)
    block = block.copy()
    block[0, :] = 0.0
    block[:, 0] = 0.0
    remaining = float(np.trace(block).real)
    if remaining < 1e-12:
        raise NumericalError("no excitation left after removing |00>")
    return EffectiveState(block / remaining, remaining, weight)


def bell_vector(sign: str) -> np.ndarray:
    """(|01> +- |10>)/sqrt(2) in the sector basis."""
    if sign not in ("plus", "minus"):
        raise ValueError(f"sign must be 'plus' or 'minus', got {sign!r}")
    s = 1.0 if sign == "plus" else -1.0
    return np.array([0.0, 1.0, s, 0.0], dtype=complex) / math.sqrt(2.0)


def effective_fidelity(rho: EffectiveState | DensityMatrix | np.ndarray, sign: str) -> float:
    """tr(Psi rho~) against the Bell state matching the herald sign."""
    if not isinstance(rho, EffectiveState):
        rho = effective_density_matrix(rho)
    psi = bell_vector(sign)
    return float(np.clip(np.vdot(psi, rho.rho_tilde @ psi).real, 0.0, 1.0))


def generation_rate(mode_number: float, frequency: float, p_herald: float, tau_ph: float, tau_c: float) -> float:
    """Heralded pairs per second: M p_h / (M/f + tau_ph + tau_c), delays in seconds."""
    if mode_number <= 0 or frequency <= 0:
        raise ValueError("mode number and frequency must be positive")
    if tau_ph < 0 or tau_c < 0:
        raise ValueError("delays must be non-negative")
    if not 0.0 <= p_herald <= 1.0:
        raise ValueError(f"herald probability must lie in [0, 1], got {p_herald}")
    return mode_number * p_herald / (mode_number / frequency + tau_ph + tau_c)


# -- tomography ----------------------------------------------------------------


@dataclass(frozen=True)
class DiagonalEstimate:
    p00: float
    p01: float
    p10: float
    p11: float
    stderr: dict
    n_samples: int
    raw: dict  # uncorrected click frequencies

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.p00, self.p01, self.p10, self.p11


def tomography_diagonal(clicks: np.ndarray, eta_tot: Sequence[float], p_dark: Sequence[float] = (0.0, 0.0)) -> DiagonalEstimate:
    """Excitation probabilities of the two memories from direct detection.

    ``clicks`` is an (n, 2) boolean array, column 0 for the first memory's
    detector. Dark clicks are subtracted before dividing by the path
    transmission; the coincidence rate is divided by both transmissions.

    Args:
        clicks: per-bin click pairs, conditioned on a herald.
        eta_tot: total transmission of each path (retrieval, fiber, detector).
        p_dark: per-window dark click probability of each detector.
    """
    clicks = np.asarray(clicks, dtype=bool)
    if clicks.ndim != 2 or clicks.shape[1] != 2 or len(clicks) == 0:
        raise ValueError(f"expected a non-empty (n, 2) click array, got shape {clicks.shape}")
    e1, e2 = (float(e) for e in eta_tot)
    if e1 <= 0 or e2 <= 0:
        raise ValueError("total transmission must be positive on both paths")
    d1, d2 = (float(d) for d in p_dark)
    n = len(clicks)
    z = np.column_stack([clicks[:, 0], clicks[:, 1], clicks[:, 0] & clicks[:, 1]]).astype(float)
    f = z.mean(axis=0)
    cov = np.atleast_2d(np.cov(z.T, bias=True)) / n

    q1 = float(np.clip((f[0] - d1) / e1, 0.0, 1.0))
    q2 = float(np.clip((f[1] - d2) / e2, 0.0, 1.0))
    p11 = f[2] / (e1 * e2)
    values = {"p11": p11, "p10": q1 - p11, "p01": q2 - p11}
    values["p00"] = 1.0 - values["p10"] - values["p01"] - p11
    # linear maps from (f1, f2, f11) for the binomial/multinomial error propagation
    c = 1.0 / (e1 * e2)
    weights = {
        "p11": np.array([0.0, 0.0, c]),
        "p10": np.array([1.0 / e1, 0.0, -c]),
        "p01": np.array([0.0, 1.0 / e2, -c]),
    }
    weights["p00"] = -(weights["p11"] + weights["p10"] + weights["p01"])
    stderr = {k: float(np.sqrt(max(w @ cov @ w, 0.0))) for k, w in weights.items()}
    for k, v in values.items():
        if v < 0.0:
            log.warning("%s estimate %.3g is negative, clipped to 0", k, v)
            values[k] = 0.0
    raw = {"click_1": float(f[0]), "click_2": float(f[1]), "coincidence": float(f[2])}
    return DiagonalEstimate(float(values["p00"]), float(values["p01"]), float(values["p10"]),
                            float(values["p11"]), stderr, n, raw)


@dataclass(frozen=True)
class InterferencePoint:
    phase: float
    detector: int
    click_prob: float
    stderr: float
    n_samples: int

    def __post_init__(self):
        if not -1e-12 <= self.click_prob <= 1.0 + 1e-12:
            raise ValueError(f"click probability must lie in [0, 1], got {self.click_prob}")


@dataclass(frozen=True)
class SinusoidFit:
    """c0 + c1 cos(phi) + c2 sin(phi)."""

    c0: float
    c1: float
    c2: float

    @property
    def amplitude(self) -> float:
        return math.hypot(self.c1, self.c2)

    @property
    def visibility(self) -> float:
        return self.amplitude / self.c0

    def __call__(self, phase):
        return self.c0 + self.c1 * np.cos(phase) + self.c2 * np.sin(phase)


def fit_sinusoid(points: Sequence[InterferencePoint]) -> SinusoidFit:
    """Least-squares fit on the basis {1, cos, sin}."""
    phases = np.array([p.phase for p in points], dtype=float)
    if len(np.unique(np.round(np.mod(phases, 2 * np.pi), 12))) < 3:
        raise ValueError("need at least three distinct phases")
    y = np.array([p.click_prob for p in points], dtype=float)
    design = np.column_stack([np.ones_like(phases), np.cos(phases), np.sin(phases)])
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < 3:
        raise NumericalError("rank-deficient design matrix")
    if coef[0] <= 0:
        raise NumericalError(f"fitted offset {coef[0]:.3g} is not positive")
    return SinusoidFit(*(float(c) for c in coef))


@dataclass(frozen=True)
class CoherenceEstimate:
    d_abs: float
    visibility: float
    fits: dict  # detector id -> SinusoidFit


def tomography_coherence(points: Sequence[InterferencePoint], p01: float, p10: float) -> CoherenceEstimate:
    """|d| = V (p01 + p10) / 2 with V averaged over the detectors' fits."""
    detectors = sorted({p.detector for p in points})
    if not detectors:
        raise ValueError("no interference points")
    fits = {d: fit_sinusoid([p for p in points if p.detector == d]) for d in detectors}
    v = float(np.mean([f.visibility for f in fits.values()]))
    return CoherenceEstimate(v * (p01 + p10) / 2.0, v, fits)


def assemble_reconstruction(p00: float, p01: float, p10: float, p11: float, d_abs: float) -> EffectiveState:
    """Sector matrix with populations p_ij and real coherence |d| between |01> and |10>."""
    values = np.array([p00, p01, p10, p11], dtype=float)
    if np.any(values < 0) or d_abs < 0:
        raise ValueError("populations and |d| must be non-negative")
    total = float(values.sum())
    if total <= 0:
        raise ValueError("populations sum to zero")
    rho = np.diag(values).astype(complex)
    rho[1, 2] = rho[2, 1] = d_abs
    return EffectiveState(rho / total, total)


# -- pure-state oracle ---------------------------------------------------------


@dataclass(frozen=True)
class AnalyticOracle:
    """Product of two single-pair states c_i0|00> + e^{i phi_i} c_i1|11>."""

    c10: float
    c11: float
    c20: float
    c21: float
    phi1: float = 0.0
    phi2: float = 0.0

    def __post_init__(self):
        for a, b in ((self.c10, self.c11), (self.c20, self.c21)):
            if abs(a * a + b * b - 1.0) > 1e-12:
                raise ValueError(f"coefficients ({a}, {b}) are not normalized")

    @classmethod
    def from_mean_photon_numbers(cls, mu1: float, mu2: float, phi1: float = 0.0, phi2: float = 0.0):
        """Single-excitation truncation of two TMSV sources."""
        a = tmsv_amplitudes(mu1, 1)
        b = tmsv_amplitudes(mu2, 1)
        return cls(float(a[0]), float(a[1]), float(b[0]), float(b[1]), phi1, phi2)


def analytic_heralded_state(oracle: AnalyticOracle, sign: str) -> Ket:
    """Memory state after projecting the idlers onto one photon at one detector.

    Proportional to e^{i(phi1-phi2)} c11 c20 |10> +- c10 c21 |01>, as a
    two-mode ket with truncation 1.
    """
    s = {"plus": 1.0, "minus": -1.0}.get(sign)
    if s is None:
        raise ValueError(f"sign must be 'plus' or 'minus', got {sign!r}")
    amp = np.zeros(4, dtype=complex)
    amp[2] = np.exp(1j * (oracle.phi1 - oracle.phi2)) * oracle.c11 * oracle.c20
    amp[1] = s * oracle.c10 * oracle.c21
    norm = np.linalg.norm(amp)
    if norm < 1e-15:
        raise NumericalError("no single-excitation component")
    return Ket(FockSpace(1), 2, amp / norm)


def analytic_heralded_mixture(oracle: AnalyticOracle, sign: str) -> tuple[DensityMatrix, float]:
    """Heralded memory state for threshold detectors, lossless paths.

    Besides the single-pair superposition, a pair from each source bunches on
    the beamsplitter and fires one detector as well, leaving |11> in the
    memories. Returns the mixture and its single-pair weight.
    """
    psi = analytic_heralded_state(oracle, sign)
    w1 = 0.5 * ((oracle.c11 * oracle.c20) ** 2 + (oracle.c10 * oracle.c21) ** 2)
    w2 = 0.5 * (oracle.c11 * oracle.c21) ** 2
    rho = w1 * np.outer(psi.amplitudes, psi.amplitudes.conj())
    rho[3, 3] += w2
    return DensityMatrix(FockSpace(1), 2, rho / (w1 + w2)), w1 / (w1 + w2)
