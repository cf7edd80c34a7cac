"""Linear algebra on truncated Fock spaces.

States are kets or density matrices over a tensor product of bosonic modes,
each truncated at ``N`` photons. Basis ordering is lexicographic in the
occupation numbers with the first mode varying slowest, which is what
``np.kron`` produces when modes are combined in declared order.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from math import comb, factorial, sqrt
from typing import Hashable, Sequence

import numpy as np

__all__ = [
    "FockSpace",
    "Ket",
    "DensityMatrix",
    "KrausChannel",
    "Povm",
    "NumericalError",
    "annihilation",
    "number_operator",
    "basis_ket",
    "bell_state",
    "tmsv_amplitudes",
    "tmsv_ket",
    "gad_channel",
    "apply_channel",
    "apply_unitary",
    "detector_povm",
    "with_dark_counts",
    "product_povm",
    "beamsplitter_block_unitary",
    "beamsplitter_isometry",
    "transform_povm_through_bs",
    "outcome_probabilities",
    "measure",
    "measure_and_discard",
    "phase_shift",
    "partial_trace",
    "tensor",
    "fidelity_pure",
    "psd_sqrt",
]


class NumericalError(RuntimeError):
    """Raised when a numerical routine hits a degenerate or invalid input."""


@dataclass(frozen=True)
class FockSpace:
    """Single-mode Fock space truncated at ``truncation`` photons."""

    truncation: int = 2

    def __post_init__(self):
        if int(self.truncation) != self.truncation or self.truncation < 1:
            raise ValueError(f"truncation must be an integer >= 1, got {self.truncation!r}")

    @property
    def dim(self) -> int:
        return self.truncation + 1

    def total_dim(self, n_modes: int) -> int:
        return self.dim**n_modes


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Ket:
    space: FockSpace
    n_modes: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _freeze(np.ravel(self.amplitudes))
        if amps.size != self.space.total_dim(self.n_modes):
            raise ValueError(
                f"ket of {self.n_modes} modes needs {self.space.total_dim(self.n_modes)} "
                f"amplitudes, got {amps.size}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"ket is not normalized (norm={norm!r})")
        object.__setattr__(self, "amplitudes", amps)

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(self.space, self.n_modes, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Density matrix over ``n_modes`` truncated modes.

    Construction only checks the shape; call :meth:`check` to verify
    hermiticity, unit trace and positivity.
    """

    space: FockSpace
    n_modes: int
    data: np.ndarray

    def __post_init__(self):
        data = _freeze(self.data)
        dim = self.space.total_dim(self.n_modes)
        if data.shape != (dim, dim):
            raise ValueError(f"expected a {dim}x{dim} matrix for {self.n_modes} modes, got {data.shape}")
        object.__setattr__(self, "data", data)

    @property
    def trace(self) -> float:
        return float(np.trace(self.data).real)

    def check(self, tol: float = 1e-10) -> None:
        """Raise ``ValueError`` if the matrix is not a valid density matrix within ``tol``."""
        herm = np.max(np.abs(self.data - self.data.conj().T))
        if herm > tol:
            raise ValueError(f"not Hermitian (max deviation {herm:.3g})")
        if abs(self.trace - 1.0) > tol:
            raise ValueError(f"trace is {self.trace!r}, expected 1")
        lowest = np.linalg.eigvalsh(self.data).min()
        if lowest < -tol:
            raise ValueError(f"negative eigenvalue {lowest:.3g}")

    def allclose(self, other: "DensityMatrix", atol: float = 1e-12) -> bool:
        return (
            self.space == other.space
            and self.n_modes == other.n_modes
            and np.allclose(self.data, other.data, rtol=0.0, atol=atol)
        )


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Single-mode channel in operator-sum form; ``gamma`` records the loss parameter if any."""

    operators: np.ndarray
    gamma: float | None = None

    def __post_init__(self):
        ops = _freeze(np.asarray(self.operators))
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
            raise ValueError("Kraus operators must be a stack of square matrices")
        object.__setattr__(self, "operators", ops)

    @property
    def dim(self) -> int:
        return self.operators.shape[1]

    @cached_property
    def superoperator(self) -> np.ndarray:
        """sum_k E_k (x) conj(E_k), acting on the (row, column) index pair of one mode."""
        s = sum(np.kron(op, op.conj()) for op in self.operators)
        s.flags.writeable = False
        return s

    def completeness(self) -> np.ndarray:
        """Return sum_k E_k^dagger E_k."""
        return np.einsum("kji,kjl->il", self.operators.conj(), self.operators)


@dataclass(frozen=True, eq=False)
class Povm:
    """Ordered POVM elements with one label per outcome.

    Elements are checked for completeness on construction. Measurement
    operators are the positive square roots of the elements.
    """

    elements: tuple
    labels: tuple
    atol: float = field(default=1e-10, repr=False)

    def __post_init__(self):
        elements = tuple(_freeze(e) for e in self.elements)
        labels = tuple(self.labels)
        if len(elements) != len(labels) or not elements:
            raise ValueError("need one label per POVM element")
        dim = elements[0].shape[0]
        if any(e.shape != (dim, dim) for e in elements):
            raise ValueError("POVM elements must share one square shape")
        total = sum(elements)
        dev = np.max(np.abs(total - np.eye(dim)))
        if dev > self.atol:
            raise ValueError(f"POVM elements do not sum to identity (max deviation {dev:.3g})")
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.elements[0].shape[0]

    def element(self, label: Hashable) -> np.ndarray:
        return self.elements[self.labels.index(label)]

    @cached_property
    def flat_transposed(self) -> np.ndarray:
        """Row m holds Pi_m^T flattened, so row @ vec(A) = tr(Pi_m A)."""
        return np.stack([e.T.ravel() for e in self.elements])

    @cached_property
    def measurement_operators(self) -> tuple:
        return tuple(_freeze(psd_sqrt(e)) for e in self.elements)


# -- basic operators and states ----------------------------------------------


def annihilation(space: FockSpace) -> np.ndarray:
    """Ladder operator with <n-1|a|n> = sqrt(n)."""
    return np.diag(np.sqrt(np.arange(1, space.dim, dtype=float)), k=1).astype(complex)


def number_operator(space: FockSpace) -> np.ndarray:
    return np.diag(np.arange(space.dim, dtype=float)).astype(complex)


def basis_ket(space: FockSpace, occupations: Sequence[int]) -> Ket:
    """Number state |n1 n2 ...>."""
    amps = np.zeros(space.total_dim(len(occupations)), dtype=complex)
    index = 0
    for n in occupations:
        if not 0 <= n <= space.truncation:
            raise ValueError(f"occupation {n} outside truncated space")
        index = index * space.dim + n
    amps[index] = 1.0
    return Ket(space, len(occupations), amps)


def bell_state(sign: str, space: FockSpace, phase: float = 0.0) -> Ket:
    """(|01> +/- e^{i phase}|10>)/sqrt(2) in the absence/presence encoding."""
    if sign not in ("plus", "minus"):
        raise ValueError(f"sign must be 'plus' or 'minus', got {sign!r}")
    s = 1.0 if sign == "plus" else -1.0
    amps = (basis_ket(space, (0, 1)).amplitudes + s * np.exp(1j * phase) * basis_ket(space, (1, 0)).amplitudes) / sqrt(2)
    return Ket(space, 2, amps)


def tmsv_amplitudes(mu: float, truncation: int) -> np.ndarray:
    """Photon-number amplitudes a_0..a_N of a truncated two-mode squeezed vacuum.

    The last amplitude takes up whatever norm the dropped tail would have had.
    """
    if mu < 0:
        raise ValueError(f"mean photon number must be non-negative, got {mu}")
    m = np.arange(truncation)
    amps = np.empty(truncation + 1)
    amps[:-1] = (mu / (mu + 1.0)) ** (m / 2.0) / np.sqrt(mu + 1.0)
    residual = 1.0 - np.sum(mu**m / (mu + 1.0) ** (m + 1))
    amps[-1] = np.sqrt(max(residual, 0.0))
    return amps


def tmsv_ket(mu: float, space: FockSpace) -> Ket:
    amps = tmsv_amplitudes(mu, space.truncation)
    vec = np.zeros(space.total_dim(2), dtype=complex)
    idx = np.arange(space.dim)
    vec[idx * space.dim + idx] = amps
    # a_N closes the norm only up to rounding
    return Ket(space, 2, vec / np.linalg.norm(vec))


# -- channels ----------------------------------------------------------------


@lru_cache(maxsize=256)
def _gad_operators(gamma: float, truncation: int) -> KrausChannel:
    dim = truncation + 1
    ops = np.zeros((dim, dim, dim), dtype=complex)
    for k in range(dim):
        for n in range(k, dim):
            ops[k, n - k, n] = sqrt(comb(n, k) * (1.0 - gamma) ** (n - k) * gamma**k)
    return KrausChannel(ops, gamma)


def gad_channel(gamma: float, space: FockSpace) -> KrausChannel:
    """Bosonic loss channel with single-photon loss probability ``gamma``.

    Operator ``k`` removes exactly ``k`` photons; the sums are cut at the
    truncation, which keeps the set trace preserving on the truncated space.
    """
    gamma = float(gamma)
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"loss probability must lie in [0, 1], got {gamma}")
    return _gad_operators(gamma, space.truncation)


def _apply_left(t: np.ndarray, op: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Contract ``op`` (shape (d,)*2k) into tensor ``t`` on ``axes``; output axes land in place."""
    k = len(axes)
    out = np.tensordot(op, t, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def _conjugate(data: np.ndarray, op: np.ndarray, modes: Sequence[int], n_modes: int, dim: int) -> np.ndarray:
    """O rho O^dagger with O = ``op`` on ``modes`` and identity on the rest."""
    k = len(modes)
    t = data.reshape((dim,) * (2 * n_modes))
    o = op.reshape((dim,) * (2 * k))
    t = _apply_left(t, o, modes)
    t = _apply_left(t, o.conj(), [n_modes + m for m in modes])
    total = dim**n_modes
    return t.reshape(total, total)


def _check_modes(state: DensityMatrix, modes: Sequence[int], op_dim: int | None = None) -> list[int]:
    modes = [int(m) for m in modes]
    if len(set(modes)) != len(modes) or any(not 0 <= m < state.n_modes for m in modes):
        raise ValueError(f"invalid mode indices {modes} for a {state.n_modes}-mode state")
    if op_dim is not None and op_dim != state.space.dim ** len(modes):
        raise ValueError(f"operator dimension {op_dim} does not match {len(modes)} mode(s) of dim {state.space.dim}")
    return modes


def apply_channel(state: DensityMatrix, channel: KrausChannel, mode_index: int) -> DensityMatrix:
    """Apply a single-mode channel to one mode of ``state``."""
    (mode,) = _check_modes(state, [mode_index], channel.dim)
    dim, n = state.space.dim, state.n_modes
    left, right = dim**mode, dim ** (n - mode - 1)
    t = state.data.reshape(left, dim, right, left, dim, right).transpose(1, 4, 0, 2, 3, 5)
    out = (channel.superoperator @ t.reshape(dim * dim, -1)).reshape(dim, dim, left, right, left, right)
    total = dim**n
    return DensityMatrix(state.space, n, out.transpose(2, 0, 3, 4, 1, 5).reshape(total, total))


def apply_unitary(state: DensityMatrix, unitary: np.ndarray, modes: Sequence[int]) -> DensityMatrix:
    modes = _check_modes(state, modes, unitary.shape[0])
    return DensityMatrix(state.space, state.n_modes, _conjugate(state.data, unitary, modes, state.n_modes, state.space.dim))


def phase_shift(state: DensityMatrix, phi: float, mode_index: int) -> DensityMatrix:
    """Apply diag(1, e^{i phi}, ..., e^{i N phi}) to one mode."""
    u = np.diag(np.exp(1j * phi * np.arange(state.space.dim)))
    return apply_unitary(state, u, [mode_index])


# -- detection ---------------------------------------------------------------


def detector_povm(eta: float, space: FockSpace) -> Povm:
    """Click/no-click POVM of a non-number-resolving detector with efficiency ``eta``.

    Labels are 0 (no click) and 1 (click).
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"detector efficiency must lie in [0, 1], got {eta}")
    no_click = np.diag((1.0 - eta) ** np.arange(space.dim)).astype(complex)
    return Povm((no_click, np.eye(space.dim) - no_click), (0, 1))


def with_dark_counts(povm: Povm, p_dark: float) -> Povm:
    """Fold an independent dark-click probability into a click/no-click POVM."""
    if not 0.0 <= p_dark <= 1.0:
        raise ValueError(f"dark count probability must lie in [0, 1], got {p_dark}")
    if povm.labels != (0, 1):
        raise ValueError("dark counts need a binary (no-click, click) POVM")
    no_click = (1.0 - p_dark) * povm.elements[0]
    return Povm((no_click, np.eye(povm.dim) - no_click), (0, 1))


def product_povm(first: Povm, second: Povm) -> Povm:
    """Joint POVM of two independent measurements; labels are (first, second) pairs."""
    elements, labels = [], []
    for la, ea in zip(first.labels, first.elements):
        for lb, eb in zip(second.labels, second.elements):
            elements.append(np.kron(ea, eb))
            labels.append((la, lb))
    return Povm(tuple(elements), tuple(labels))


def beamsplitter_block_unitary(theta: float, phi: float, total_photons: int) -> np.ndarray:
    """Two-mode beamsplitter restricted to states with ``total_photons`` photons.

    Column ``k`` is the input |k, n-k>, row ``j`` the output |j, n-j>. Input
    modes map as a -> cos(theta) c + e^{i phi} sin(theta) d and
    b -> -e^{-i phi} sin(theta) c + cos(theta) d.
    """
    n = int(total_photons)
    if n < 0:
        raise ValueError("total photon number must be non-negative")
    # creation operators transform with conjugated coefficients
    ac, ad = np.cos(theta), np.exp(-1j * phi) * np.sin(theta)
    bc, bd = -np.exp(1j * phi) * np.sin(theta), np.cos(theta)
    u = np.zeros((n + 1, n + 1), dtype=complex)
    for k in range(n + 1):
        l = n - k
        for j in range(n + 1):
            amp = 0.0j
            for p in range(max(0, j - l), min(k, j) + 1):
                amp += comb(k, p) * ac**p * ad ** (k - p) * comb(l, j - p) * bc ** (j - p) * bd ** (l - j + p)
            u[j, k] = amp * sqrt(factorial(j) * factorial(n - j) / (factorial(k) * factorial(l)))
    return u


@lru_cache(maxsize=64)
def _bs_isometry(theta: float, phi: float, truncation: int) -> np.ndarray:
    dim, big = truncation + 1, 2 * truncation + 1
    v = np.zeros((big * big, dim * dim), dtype=complex)
    blocks = [beamsplitter_block_unitary(theta, phi, n) for n in range(2 * truncation + 1)]
    for k in range(dim):
        for l in range(dim):
            n = k + l
            col = blocks[n][:, k]
            for j in range(n + 1):
                v[j * big + (n - j), k * dim + l] = col[j]
    v.flags.writeable = False
    return v


def beamsplitter_isometry(theta: float, phi: float, space: FockSpace) -> np.ndarray:
    """Beamsplitter applied to the truncated two-mode space, landing in the per-mode 2N space.

    The result is B P: P embeds |k, l> (k, l <= N) into the enlarged space and B
    is the block-diagonal beamsplitter. No amplitude is lost since bunched
    outputs carry at most 2N photons per mode.
    """
    return _bs_isometry(float(theta), float(phi), space.truncation)


def transform_povm_through_bs(povm_out: Povm, theta: float, phi: float, space: FockSpace) -> Povm:
    """Pull a POVM on the beamsplitter outputs back to the truncated inputs."""
    v = beamsplitter_isometry(theta, phi, space)
    if povm_out.dim != v.shape[0]:
        raise ValueError(
            f"output POVM must act on two modes of dimension {2 * space.truncation + 1} "
            f"(size {v.shape[0]}), got size {povm_out.dim}"
        )
    elements = []
    for e in povm_out.elements:
        pulled = v.conj().T @ e @ v
        elements.append((pulled + pulled.conj().T) / 2)
    return Povm(tuple(elements), povm_out.labels)


# -- measurement -------------------------------------------------------------


def psd_sqrt(matrix: np.ndarray, clamp: float = 1e-8) -> np.ndarray:
    """Positive square root of a Hermitian PSD matrix.

    Eigenvalues in [-clamp, 0) are treated as rounding noise and zeroed.
    """
    w, v = np.linalg.eigh((matrix + matrix.conj().T) / 2)
    if w.min() < -clamp:
        raise NumericalError(f"matrix is not positive semidefinite (eigenvalue {w.min():.3g})")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def _grouped(state: DensityMatrix, modes: list[int]) -> tuple[np.ndarray, list[int]]:
    """Rearrange rho into a (dm*dm, dr*dr) matrix X[(c, a), (r, s)] = <c r|rho|a s>.

    ``c, a`` index the measured modes and ``r, s`` the rest.
    """
    dim, n = state.space.dim, state.n_modes
    rest = [i for i in range(n) if i not in modes]
    axes = modes + [n + m for m in modes] + rest + [n + r for r in rest]
    dm, dr = dim ** len(modes), dim ** len(rest)
    x = state.data.reshape((dim,) * (2 * n)).transpose(axes).reshape(dm * dm, dr * dr)
    return x, rest


def _probabilities(povm: Povm, x: np.ndarray, n_rest: int, dim: int) -> np.ndarray:
    reduced = x @ np.eye(dim**n_rest).ravel() if n_rest else x[:, 0]
    return (povm.flat_transposed @ reduced).real


def outcome_probabilities(state: DensityMatrix, povm: Povm, mode_indices: Sequence[int]) -> np.ndarray:
    """tr(Pi_m rho) for every element, with the POVM acting on ``mode_indices``."""
    modes = _check_modes(state, mode_indices, povm.dim)
    x, rest = _grouped(state, modes)
    return _probabilities(povm, x, len(rest), state.space.dim)


def _cdf(probs: np.ndarray) -> tuple[float, ...]:
    probs = np.clip(probs, 0.0, None)
    total = probs.sum()
    if not total > 1e-14:
        raise NumericalError("all outcome probabilities vanish")
    return tuple((np.cumsum(probs) / total).tolist())


def _select_from_cdf(cdf: tuple[float, ...], random_draw: float) -> int:
    if not 0.0 <= random_draw < 1.0:
        raise ValueError(f"random draw must lie in [0, 1), got {random_draw}")
    # equivalent to searchsorted(cdf, draw, side="right")
    return min(bisect.bisect_right(cdf, random_draw), len(cdf) - 1)


def _select(probs: np.ndarray, random_draw: float) -> int:
    if not 0.0 <= random_draw < 1.0:
        raise ValueError(f"random draw must lie in [0, 1), got {random_draw}")
    return _select_from_cdf(_cdf(probs), random_draw)


def measure(state: DensityMatrix, povm: Povm, mode_indices: Sequence[int], random_draw: float):
    """Sample a POVM outcome by inverse CDF and return (label, post_state, probability).

    The post-measurement state uses M_m = sqrt(Pi_m) on the measured modes.
    """
    modes = _check_modes(state, mode_indices, povm.dim)
    probs = outcome_probabilities(state, povm, modes)
    m = _select(probs, random_draw)
    post = _conjugate(state.data, povm.measurement_operators[m], modes, state.n_modes, state.space.dim)
    post = post / np.trace(post).real
    return povm.labels[m], DensityMatrix(state.space, state.n_modes, post), float(probs[m])


def measure_and_discard(state: DensityMatrix, povm: Povm, mode_indices: Sequence[int], random_draw: float):
    """Like :func:`measure`, but trace out the measured modes afterwards.

    Returns (label, reduced post_state of the remaining modes or ``None`` if
    nothing remains, probability). Uses tr_m(M rho M^dag) = tr_m(Pi rho), so
    no square root is needed.
    """
    modes = _check_modes(state, mode_indices, povm.dim)
    x, rest = _grouped(state, modes)
    probs = _probabilities(povm, x, len(rest), state.space.dim)
    m = _select(probs, random_draw)
    return povm.labels[m], _reduced_post(state, povm, x, len(rest), m), float(probs[m])


def _reduced_post(state: DensityMatrix, povm: Povm, x: np.ndarray, n_rest: int, m: int):
    if not n_rest:
        return None
    dr = state.space.dim ** n_rest
    # tr_m(Pi rho)[r, s] = sum_{a,c} Pi[a, c] <c r|rho|a s>
    reduced = (povm.flat_transposed[m] @ x).reshape(dr, dr)
    trace = np.trace(reduced).real
    if not trace > 1e-14:
        raise NumericalError(f"outcome {povm.labels[m]!r} has vanishing probability")
    return DensityMatrix(state.space, n_rest, reduced / trace)


def conditional_state(state: DensityMatrix, povm: Povm, mode_indices: Sequence[int], outcome_index: int):
    """Normalized state of the unmeasured modes given outcome number ``outcome_index``."""
    modes = _check_modes(state, mode_indices, povm.dim)
    x, rest = _grouped(state, modes)
    return _reduced_post(state, povm, x, len(rest), outcome_index)


# -- composition -------------------------------------------------------------


def _partial_trace_tensor(t: np.ndarray, n_modes: int, keep: Sequence[int], dim: int) -> np.ndarray:
    rows = list(range(n_modes))
    cols = [n_modes + i if i in keep else i for i in range(n_modes)]
    out = [keep_i for keep_i in keep] + [n_modes + i for i in keep]
    reduced = np.einsum(t, rows + cols, out)
    size = dim ** len(keep)
    return reduced.reshape(size, size)


def partial_trace(state: DensityMatrix, keep_modes: Sequence[int]) -> DensityMatrix:
    """Reduced state on ``keep_modes``, in the order given."""
    keep = _check_modes(state, keep_modes)
    if not keep:
        raise ValueError("must keep at least one mode")
    if keep == list(range(state.n_modes)):
        return state
    dim = state.space.dim
    t = state.data.reshape((dim,) * (2 * state.n_modes))
    return DensityMatrix(state.space, len(keep), _partial_trace_tensor(t, state.n_modes, keep, dim))


def tensor(a: DensityMatrix, b: DensityMatrix) -> DensityMatrix:
    if a.space != b.space:
        raise ValueError("cannot combine states from different truncations")
    da, db = a.data.shape[0], b.data.shape[0]
    data = (a.data[:, None, :, None] * b.data[None, :, None, :]).reshape(da * db, da * db)
    return DensityMatrix(a.space, a.n_modes + b.n_modes, data)


def fidelity_pure(state: DensityMatrix, reference: Ket) -> float:
    """<psi|rho|psi> for a pure reference."""
    if reference.space != state.space or reference.n_modes != state.n_modes:
        raise ValueError("reference ket does not match the state's modes")
    psi = reference.amplitudes
    return float(np.vdot(psi, state.data @ psi).real)
