"""Dense state-vector engine for few-mode truncated Fock spaces.

Photon modes carry a truncation ``n_max`` (basis |0>..|n_max>); matter modes are
two-level systems with basis {g, e}. States are stored as dense complex vectors
in mixed-radix order, first declared mode most significant.

Beam-splitter convention: the 50:50 splitter maps (a, b) -> ((a+b)/sqrt2,
(a-b)/sqrt2), identically for Heisenberg output operators and for Schrodinger
creation operators, because the underlying 2x2 matrix is real symmetric at zero
phase. For general transmissivity T and phase theta the matrix is

    [[sqrt(T),                 sqrt(1-T) e^{i theta}],
     [sqrt(1-T) e^{-i theta}, -sqrt(T)             ]]

and input creation operator ``a_i^dag`` is sent to ``sum_j U[j, i] a_j^dag``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, factorial, sqrt
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import RFCoherenceError

DEFAULT_DIMENSION_CAP = 1_000_000
NORM_TOL = 1e-12
MATTER_LEVELS = ("g", "e")


class FockError(RFCoherenceError):
    """Invalid operation on a Fock-space state."""


class LabelError(FockError):
    pass


class DimensionCapError(FockError):
    pass


class TruncationOverflowError(FockError):
    """A two-mode operation would populate photon numbers beyond the truncation."""


@dataclass(frozen=True)
class Mode:
    label: str
    kind: str  # "photon" | "matter"
    n_max: int = 1

    @property
    def dim(self) -> int:
        return self.n_max + 1 if self.kind == "photon" else 2


@dataclass(frozen=True)
class ModeSpec:
    """Ordered list of photon and matter modes.

    Build with :meth:`of` for the common case::

        ModeSpec.of(photons=[("a", 2), ("b", 2)], matter=["m"])
    """

    modes: tuple[Mode, ...]
    dimension_cap: int = DEFAULT_DIMENSION_CAP

    def __post_init__(self):
        labels = [m.label for m in self.modes]
        if len(set(labels)) != len(labels):
            raise LabelError(f"duplicate mode labels in {labels}")
        for m in self.modes:
            if m.kind not in ("photon", "matter"):
                raise FockError(f"unknown mode kind {m.kind!r}")
            if m.kind == "photon" and m.n_max < 1:
                raise FockError(f"photon mode {m.label!r} needs n_max >= 1")
        if self.dim > self.dimension_cap:
            raise DimensionCapError(f"Hilbert dimension {self.dim} exceeds cap {self.dimension_cap}")

    @classmethod
    def of(cls, photons: Iterable[tuple[str, int]] = (), matter: Iterable[str] = (),
           dimension_cap: int = DEFAULT_DIMENSION_CAP) -> "ModeSpec":
        modes = [Mode(lbl, "photon", int(n)) for lbl, n in photons]
        modes += [Mode(lbl, "matter") for lbl in matter]
        return cls(tuple(modes), dimension_cap)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(m.label for m in self.modes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(m.dim for m in self.modes)

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64)) if self.modes else 1

    @property
    def photon_modes(self) -> tuple[tuple[str, int], ...]:
        return tuple((m.label, m.n_max) for m in self.modes if m.kind == "photon")

    @property
    def matter_modes(self) -> tuple[str, ...]:
        return tuple(m.label for m in self.modes if m.kind == "matter")

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LabelError(f"unknown mode label {label!r}") from None

    def mode(self, label: str) -> Mode:
        return self.modes[self.index(label)]

    def photon_index(self, label: str) -> int:
        i = self.index(label)
        if self.modes[i].kind != "photon":
            raise LabelError(f"mode {label!r} is not a photon mode")
        return i

    def concat(self, other: "ModeSpec") -> "ModeSpec":
        return ModeSpec(self.modes + other.modes, min(self.dimension_cap, other.dimension_cap))

    def subset(self, labels: Sequence[str]) -> "ModeSpec":
        return ModeSpec(tuple(self.mode(lbl) for lbl in labels), self.dimension_cap)

    def basis_label(self, flat_index: int) -> str:
        occ = np.unravel_index(flat_index, self.shape)
        parts = []
        for m, n in zip(self.modes, occ):
            parts.append(f"{m.label}={MATTER_LEVELS[n] if m.kind == 'matter' else int(n)}")
        return ",".join(parts)

    def basis_index(self, occupation: Mapping[str, int | str]) -> int:
        """Flat index of a basis element; unspecified modes are vacuum / ground."""
        idx = []
        for m in self.modes:
            v = occupation.get(m.label, 0)
            if m.kind == "matter" and isinstance(v, str):
                v = MATTER_LEVELS.index(v)
            if not 0 <= int(v) < m.dim:
                raise FockError(f"occupation {v} out of range for mode {m.label!r}")
            idx.append(int(v))
        unknown = set(occupation) - set(self.labels)
        if unknown:
            raise LabelError(f"unknown mode labels {sorted(unknown)}")
        return int(np.ravel_multi_index(idx, self.shape)) if idx else 0


@dataclass(frozen=True, eq=False)
class ModeState:
    spec: ModeSpec
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.spec.dim:
            raise FockError(f"amplitude vector has {amps.size} entries, spec needs {self.spec.dim}")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise FockError(f"state is not normalized (|psi|^2 = {norm2!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_dict(cls, spec: ModeSpec, terms: Mapping[tuple, complex] | Iterable, normalize=False):
        """Build a state from ``{occupation-tuple: amplitude}`` in declared mode order."""
        amps = np.zeros(spec.dim, dtype=complex)
        items = terms.items() if isinstance(terms, Mapping) else terms
        for occ, amp in items:
            occ_map = dict(zip(spec.labels, occ))
            amps[spec.basis_index(occ_map)] += amp
        if normalize:
            amps /= np.linalg.norm(amps)
        return cls(spec, amps)

    @classmethod
    def basis(cls, spec: ModeSpec, occupation: Mapping[str, int | str] | None = None) -> "ModeState":
        amps = np.zeros(spec.dim, dtype=complex)
        amps[spec.basis_index(occupation or {})] = 1.0
        return cls(spec, amps)

    @property
    def tensor_view(self) -> np.ndarray:
        return self.amplitudes.reshape(self.spec.shape)

    def amplitude(self, occupation: Mapping[str, int | str]) -> complex:
        return complex(self.amplitudes[self.spec.basis_index(occupation)])

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def to_density(self) -> "DensityState":
        return DensityState(self.spec, np.outer(self.amplitudes, self.amplitudes.conj()))

    def dump(self, tol: float = 1e-15) -> list[tuple[str, float, float]]:
        out = []
        for i in np.flatnonzero(np.abs(self.amplitudes) > tol):
            a = self.amplitudes[i]
            out.append((self.spec.basis_label(int(i)), float(a.real), float(a.imag)))
        return out

    def to_json(self, tol: float = 1e-15) -> str:
        return json.dumps(self.dump(tol))


@dataclass(frozen=True, eq=False)
class DensityState:
    spec: ModeSpec
    matrix: np.ndarray = field(repr=False)
    # Full eigendecomposition is skipped above this dimension.
    psd_check_max_dim: int = field(default=2048, repr=False)

    def __post_init__(self):
        rho = np.asarray(self.matrix, dtype=complex)
        d = self.spec.dim
        if rho.shape != (d, d):
            raise FockError(f"density matrix shape {rho.shape} does not match dimension {d}")
        if np.max(np.abs(rho - rho.conj().T), initial=0.0) > 1e-12:
            raise FockError("density matrix is not Hermitian")
        tr = np.trace(rho).real
        if abs(tr - 1.0) > 1e-12:
            raise FockError(f"density matrix trace is {tr!r}, expected 1")
        if d <= self.psd_check_max_dim:
            lam = np.linalg.eigvalsh((rho + rho.conj().T) / 2)
            if lam[0] < -1e-10:
                raise FockError(f"density matrix has negative eigenvalue {lam[0]!r}")
        rho.setflags(write=False)
        object.__setattr__(self, "matrix", rho)

    @property
    def tensor_view(self) -> np.ndarray:
        return self.matrix.reshape(self.spec.shape * 2)

    def element(self, row: Mapping[str, int | str], col: Mapping[str, int | str]) -> complex:
        return complex(self.matrix[self.spec.basis_index(row), self.spec.basis_index(col)])

    def purity(self) -> float:
        return float(np.einsum("ij,ji->", self.matrix, self.matrix).real)


State = ModeState | DensityState


# ---------------------------------------------------------------------------
# elementary single-axis operations on raw tensors


def _annihilate_axis(t: np.ndarray, axis: int, n_max: int) -> np.ndarray:
    """Apply the annihilation operator on ``axis``: out[n] = sqrt(n+1) in[n+1]."""
    t = np.moveaxis(t, axis, 0)
    out = np.zeros_like(t)
    out[:-1] = t[1:] * np.sqrt(np.arange(1, n_max + 1)).reshape((-1,) + (1,) * (t.ndim - 1))
    return np.moveaxis(out, 0, axis)


def _apply_matrix_axes(t: np.ndarray, mat: np.ndarray, axes: tuple[int, int], dims: tuple[int, int]):
    """Contract a (d_a*d_b)x(d_a*d_b) matrix into two tensor axes."""
    a, b = axes
    t = np.moveaxis(t, (a, b), (0, 1))
    rest = t.shape[2:]
    flat = t.reshape(dims[0] * dims[1], -1)
    out = (mat @ flat).reshape(dims + rest)
    return np.moveaxis(out, (0, 1), (a, b))


def splitter_matrix(transmissivity: float, phase: float = 0.0) -> np.ndarray:
    if not 0.0 <= transmissivity <= 1.0:
        raise FockError(f"transmissivity {transmissivity} outside [0, 1]")
    t = sqrt(transmissivity)
    r = sqrt(1.0 - transmissivity)
    return np.array([[t, r * np.exp(1j * phase)], [r * np.exp(-1j * phase), -t]], dtype=complex)


def two_mode_fock_unitary(u: np.ndarray, n_max: int) -> np.ndarray:
    """Fock-space representation of a 2x2 mode unitary on {|n_a, n_b>: n_a+n_b <= n_max}.

    Columns with n_a + n_b > n_max are left zero; callers must check the input
    carries no weight there.
    """
    d = n_max + 1
    big = np.zeros((d * d, d * d), dtype=complex)
    # a^dag -> u00 A + u10 B ; b^dag -> u01 A + u11 B
    for na in range(d):
        for nb in range(d - na):
            col = na * d + nb
            norm_in = sqrt(factorial(na) * factorial(nb))
            for i in range(na + 1):
                ca = comb(na, i) * u[0, 0] ** i * u[1, 0] ** (na - i)
                for j in range(nb + 1):
                    cb = comb(nb, j) * u[0, 1] ** j * u[1, 1] ** (nb - j)
                    p, q = i + j, na + nb - i - j
                    big[p * d + q, col] += ca * cb * sqrt(factorial(p) * factorial(q)) / norm_in
    return big


@lru_cache(maxsize=256)
def _splitter_fock_unitary(transmissivity: float, phase: float, n_max: int) -> np.ndarray:
    big = two_mode_fock_unitary(splitter_matrix(transmissivity, phase), n_max)
    big.flags.writeable = False
    return big


def _overflow_mask(n_max: int) -> np.ndarray:
    n = np.arange(n_max + 1)
    return (n[:, None] + n[None, :]) > n_max


# ---------------------------------------------------------------------------
# public operations


def tensor(states: Sequence[ModeState]) -> ModeState:
    """Kronecker product of pure states in the given order."""
    if not states:
        raise FockError("tensor of an empty list")
    spec = states[0].spec
    amps = states[0].amplitudes
    for s in states[1:]:
        spec = spec.concat(s.spec)
        amps = np.kron(amps, s.amplitudes)
    amps = amps / np.linalg.norm(amps)
    return ModeState(spec, amps)


def relabel(state: State, mapping: Mapping[str, str]) -> State:
    modes = tuple(Mode(mapping.get(m.label, m.label), m.kind, m.n_max) for m in state.spec.modes)
    spec = ModeSpec(modes, state.spec.dimension_cap)
    if isinstance(state, ModeState):
        return ModeState(spec, state.amplitudes)
    return DensityState(spec, state.matrix)


def reorder(state: ModeState, labels: Sequence[str]) -> ModeState:
    """Permute tensor factors into the order given by ``labels``."""
    spec = state.spec
    if sorted(labels) != sorted(spec.labels):
        raise LabelError(f"reorder needs a permutation of {spec.labels}")
    perm = [spec.index(lbl) for lbl in labels]
    amps = np.transpose(state.tensor_view, perm).reshape(-1)
    return ModeState(spec.subset(labels), amps)


def _map_state(state: State, fn) -> State:
    """Apply a tensor-level unitary map ``fn`` to a pure or mixed state."""
    if isinstance(state, ModeState):
        out = fn(state.tensor_view, 0)
        amps = out.reshape(-1)
        amps = amps / np.linalg.norm(amps)
        return ModeState(state.spec, amps)
    n = len(state.spec.modes)
    rho = fn(state.tensor_view, 0)
    rho = np.conj(fn(np.conj(rho), n))
    mat = rho.reshape(state.spec.dim, state.spec.dim)
    mat = (mat + mat.conj().T) / 2
    return DensityState(state.spec, mat / np.trace(mat).real)


def apply_phase(state: State, mode: str, phi: float) -> State:
    """Basis states with n photons in ``mode`` pick up exp(i n phi)."""
    spec = state.spec
    i = spec.photon_index(mode)
    n_max = spec.modes[i].n_max
    phases = np.exp(1j * phi * np.arange(n_max + 1))

    def fn(t, offset):
        shape = [1] * t.ndim
        shape[offset + i] = n_max + 1
        return t * phases.reshape(shape)

    return _map_state(state, fn)


def apply_beam_splitter(state: State, mode_a: str, mode_b: str,
                        transmissivity: float = 0.5, phase: float = 0.0) -> State:
    spec = state.spec
    ia, ib = spec.photon_index(mode_a), spec.photon_index(mode_b)
    if ia == ib:
        raise LabelError("beam splitter needs two distinct modes")
    n_max = spec.modes[ia].n_max
    if spec.modes[ib].n_max != n_max:
        raise FockError(f"modes {mode_a!r} and {mode_b!r} have different truncations")
    big = _splitter_fock_unitary(float(transmissivity), float(phase), n_max)
    mask = _overflow_mask(n_max)

    def check(t, offset):
        w = np.moveaxis(np.abs(t), (offset + ia, offset + ib), (0, 1))
        if np.any(w[mask] > 1e-12):
            raise TruncationOverflowError(
                f"photon number in ({mode_a}, {mode_b}) exceeds truncation n_max={n_max}")

    def fn(t, offset):
        check(t, offset)
        return _apply_matrix_axes(t, big, (offset + ia, offset + ib), (n_max + 1, n_max + 1))

    return _map_state(state, fn)


def partial_trace(state: State, labels_to_keep: Sequence[str]) -> DensityState:
    spec = state.spec
    if not labels_to_keep:
        raise FockError("partial trace needs a non-empty keep-set")
    keep = [spec.index(lbl) for lbl in labels_to_keep]
    drop = [i for i in range(len(spec.modes)) if i not in keep]
    kept_spec = spec.subset(labels_to_keep)
    d = kept_spec.dim
    if isinstance(state, ModeState):
        t = np.transpose(state.tensor_view, keep + drop).reshape(d, -1)
        rho = t @ t.conj().T
    else:
        n = len(spec.modes)
        t = np.transpose(state.tensor_view, keep + drop + [n + i for i in keep] + [n + i for i in drop])
        rest = int(np.prod([spec.modes[i].dim for i in drop], dtype=np.int64)) if drop else 1
        t = t.reshape(d, rest, d, rest)
        rho = np.einsum("ikjk->ij", t)
    rho = (rho + rho.conj().T) / 2
    return DensityState(kept_spec, rho / np.trace(rho).real)


def apply_loss(state: State, mode: str, eta: float) -> DensityState:
    """Mix ``mode`` with a vacuum ancilla at transmissivity ``eta`` and trace the ancilla."""
    if not 0.0 <= eta <= 1.0:
        raise FockError(f"loss transmissivity {eta} outside [0, 1]")
    spec = state.spec
    i = spec.photon_index(mode)
    n_max = spec.modes[i].n_max
    anc = "__loss_ancilla__"
    anc_spec = ModeSpec.of(photons=[(anc, n_max)], dimension_cap=spec.dimension_cap)
    vac = ModeState.basis(anc_spec)
    if isinstance(state, ModeState):
        joint = tensor([state, vac])
    else:
        rho = np.kron(state.matrix, vac.to_density().matrix)
        joint = DensityState(spec.concat(anc_spec), rho)
    joint = apply_beam_splitter(joint, mode, anc, eta)
    return partial_trace(joint, spec.labels)


def _apply_annihilators(t: np.ndarray, spec: ModeSpec, labels: Sequence[str], offset: int = 0):
    for lbl in labels:
        i = spec.photon_index(lbl)
        t = _annihilate_axis(t, offset + i, spec.modes[i].n_max)
    return t


def correlator(state: State, creation_labels: Sequence[str], annihilation_labels: Sequence[str]) -> complex:
    """Normally ordered moment <a^dag_{c1}..a^dag_{cn} a_{a1}..a_{am}>."""
    spec = state.spec
    if isinstance(state, ModeState):
        psi = state.tensor_view
        ket = _apply_annihilators(psi, spec, annihilation_labels)
        bra = _apply_annihilators(psi, spec, creation_labels)
        return complex(np.vdot(bra.reshape(-1), ket.reshape(-1)))
    n = len(spec.modes)
    # Tr(A rho C^dag): A acts on row axes, C^dag from the right on column axes
    x = _apply_annihilators(state.tensor_view, spec, annihilation_labels, 0)
    x = np.conj(_apply_annihilators(np.conj(x), spec, creation_labels, n))
    d = spec.dim
    return complex(np.trace(x.reshape(d, d)))


def photon_number(state: State, mode: str) -> float:
    return correlator(state, [mode], [mode]).real


def project_photon_number(state: ModeState, mode: str, n: int) -> tuple[float, ModeState | None]:
    """Probability of finding ``n`` photons in ``mode`` and the normalized post-measurement state."""
    i = state.spec.photon_index(mode)
    t = np.moveaxis(state.tensor_view, i, 0).copy()
    keep = t[n].copy()
    t[:] = 0
    t[n] = keep
    t = np.moveaxis(t, 0, i)
    p = float(np.vdot(t, t).real)
    if p <= 0.0:
        return 0.0, None
    return p, ModeState(state.spec, t.reshape(-1) / sqrt(p))
