"""Pure multiqubit states and white-noise mixtures.

Basis convention: in a basis index, bit k (counting from the most significant
bit) is the computational-basis value of qubit k+1.  So for three qubits,
index 4 = ``|100>``.

Noisy states ``v |psi><psi| + (1 - v) I / 2**N`` are never materialized;
every quantity is affine in ``v`` and computed as such.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from math import comb
from pathlib import Path

import numpy as np

from . import _kernels

NORM_TOL = 1e-12

PAULI = {
    "I": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True, eq=False)
class PureState:
    """Normalized amplitude vector of ``n_qubits`` qubits."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be positive")
        if amps.size != 2**self.n_qubits:
            raise ValueError(f"expected {2**self.n_qubits} amplitudes, got {amps.size}")
        norm = np.linalg.norm(amps)
        if abs(norm**2 - 1.0) > NORM_TOL:
            raise ValueError(f"state not normalized (|psi|^2 = {norm**2!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_vector(cls, vec, normalize=True):
        vec = np.asarray(vec, dtype=np.complex128).reshape(-1)
        n = int(vec.size).bit_length() - 1
        if 2**n != vec.size:
            raise ValueError("length is not a power of two")
        if normalize:
            nrm = np.linalg.norm(vec)
            if nrm == 0:
                raise ValueError("zero vector")
            vec = vec / nrm
        return cls(n, vec)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape((2,) * self.n_qubits)

    def __repr__(self):
        nz = np.flatnonzero(np.abs(self.amplitudes) > 1e-12)
        return f"PureState(n_qubits={self.n_qubits}, support={nz.tolist()[:8]}{'...' if nz.size > 8 else ''})"


@dataclass(frozen=True)
class NoisyState:
    """White-noise mixture ``v |psi><psi| + (1-v) I/2^N``."""

    pure: PureState
    visibility: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.visibility <= 1.0:
            raise ValueError("visibility must lie in [0, 1]")

    @property
    def n_qubits(self):
        return self.pure.n_qubits


# ---------------------------------------------------------------------------
# constructors


def build_ghz(n: int) -> PureState:
    if n < 2:
        raise ValueError("GHZ state needs n >= 2")
    amps = np.zeros(2**n, dtype=complex)
    amps[0] = amps[-1] = 1 / np.sqrt(2)
    return PureState(n, amps)


def build_dicke(n: int, e: int) -> PureState:
    """Symmetric state with ``e`` excitations; ``e = 1`` is the W state."""
    if n < 2:
        raise ValueError("Dicke state needs n >= 2")
    if not 1 <= e <= n - 1:
        raise ValueError(f"excitations must lie in [1, {n - 1}], got {e}")
    idx = np.arange(2**n)
    weight = np.array([int(i).bit_count() for i in idx])
    amps = np.where(weight == e, 1 / np.sqrt(comb(n, e)), 0.0).astype(complex)
    return PureState(n, amps)


def build_w(n: int) -> PureState:
    return build_dicke(n, 1)


def build_partially_product(zeros: int, core: PureState) -> PureState:
    """``|0>^zeros`` (leading qubits) tensored with ``core``."""
    if zeros < 0:
        raise ValueError("zeros must be >= 0")
    lead = np.zeros(2**zeros, dtype=complex)
    lead[0] = 1.0
    return PureState(zeros + core.n_qubits, np.kron(lead, core.amplitudes))


def random_pure_state(n: int, seed) -> PureState:
    """Haar-random state: normalized vector of i.i.d. complex Gaussians."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    vec = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return PureState.from_vector(vec)


def qubit_from_bloch(theta: float, phi: float) -> np.ndarray:
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def product_state(qubits) -> PureState:
    """Tensor product of single-qubit kets (each a length-2 vector)."""
    vec = np.ones(1, dtype=complex)
    for q in qubits:
        q = np.asarray(q, dtype=complex)
        vec = np.kron(vec, q / np.linalg.norm(q))
    return PureState.from_vector(vec)


def random_product_state(n: int, seed) -> PureState:
    rng = np.random.default_rng(seed)
    return product_state([rng.standard_normal(2) + 1j * rng.standard_normal(2) for _ in range(n)])


def permute_parties(state: PureState, perm) -> PureState:
    """Relabel parties: qubit ``i`` of the result is qubit ``perm[i]`` of ``state``."""
    perm = list(perm)
    if sorted(perm) != list(range(state.n_qubits)):
        raise ValueError("perm must be a permutation of the qubit indices")
    return PureState(state.n_qubits, state.tensor().transpose(perm).reshape(-1))


# ---------------------------------------------------------------------------
# expectation values


def site_operator(spec) -> np.ndarray:
    """2x2 operator for one site.

    ``None`` or ``"I"`` -> identity; ``"x"``, ``"y"``, ``"z"`` (optionally
    prefixed with ``-``) -> Pauli; a length-3 vector -> ``n . sigma``; a 2x2
    array is passed through.
    """
    if spec is None:
        return PAULI["I"]
    if isinstance(spec, str):
        sign = -1.0 if spec.startswith("-") else 1.0
        key = spec.lstrip("+-")
        if key not in PAULI:
            raise ValueError(f"unknown site operator {spec!r}")
        return sign * PAULI[key]
    arr = np.asarray(spec)
    if arr.shape == (3,):
        return arr[0] * PAULI["x"] + arr[1] * PAULI["y"] + arr[2] * PAULI["z"]
    if arr.shape == (2, 2):
        return arr.astype(complex)
    raise ValueError(f"cannot interpret site operator of shape {arr.shape}")


def expectation(state: NoisyState, operator) -> float:
    """``tr(rho(v) O)`` for a product operator given per site."""
    if isinstance(state, PureState):
        state = NoisyState(state, 1.0)
    if len(operator) != state.n_qubits:
        raise ValueError(f"operator has {len(operator)} sites, state has {state.n_qubits} qubits")
    mats = [site_operator(o) for o in operator]
    pure_val = float(_kernels.expectation_tensor(state.pure.amplitudes, [m[None] for m in mats]).reshape(()))
    noise_val = float(np.prod([np.trace(m).real / 2 for m in mats]))
    v = state.visibility
    return v * pure_val + (1 - v) * noise_val


def reduced_density_matrix(state: PureState, keep) -> np.ndarray:
    keep = list(keep)
    n = state.n_qubits
    rest = [i for i in range(n) if i not in keep]
    t = state.tensor().transpose(keep + rest).reshape(2 ** len(keep), -1)
    return t @ t.conj().T


def party_purities(state: PureState) -> np.ndarray:
    """Purity tr(rho_i^2) of every single-qubit marginal."""
    out = []
    for i in range(state.n_qubits):
        r = reduced_density_matrix(state, [i])
        out.append(float(np.real(np.trace(r @ r))))
    return np.array(out)


def bloch_vector(state: PureState, party: int) -> np.ndarray:
    r = reduced_density_matrix(state, [party])
    return np.array([np.real(np.trace(r @ PAULI[a])) for a in "xyz"])


def concurrence(two_qubit) -> float:
    """Concurrence ``2|ad - bc|`` of a normalized two-qubit pure state."""
    a, b, c, d = np.asarray(two_qubit, dtype=complex).reshape(4)
    return float(2 * abs(a * d - b * c))


def symmetry_classes(state: PureState, tol=1e-10):
    """Partition parties into classes of mutually swappable qubits.

    Parties ``i`` and ``j`` share a class when exchanging them leaves the
    amplitude vector unchanged.
    """
    n = state.n_qubits
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    t = state.tensor()
    for i, j in itertools.combinations(range(n), 2):
        if find(i) == find(j):
            continue
        perm = list(range(n))
        perm[i], perm[j] = j, i
        if np.max(np.abs(t.transpose(perm) - t)) < tol:
            parent[find(j)] = find(i)
    classes = {}
    for i in range(n):
        classes.setdefault(find(i), []).append(i)
    return [tuple(c) for c in sorted(classes.values())]


# ---------------------------------------------------------------------------
# file format: {"n": int, "amplitudes": [[re, im], ...]}


def state_to_json(state: PureState) -> dict:
    return {
        "n": state.n_qubits,
        "amplitudes": [[float(a.real), float(a.imag)] for a in state.amplitudes],
    }


def state_from_json(obj: dict) -> PureState:
    try:
        n = int(obj["n"])
        pairs = obj["amplitudes"]
    except (KeyError, TypeError) as exc:
        raise ValueError("state file needs keys 'n' and 'amplitudes'") from exc
    if len(pairs) != 2**n:
        raise ValueError(f"state file declares n={n} but lists {len(pairs)} amplitudes")
    amps = np.array([complex(re, im) for re, im in pairs])
    return PureState(n, amps)


def load_state(path) -> PureState:
    return state_from_json(json.loads(Path(path).read_text()))


def save_state(state: PureState, path) -> None:
    Path(path).write_text(json.dumps(state_to_json(state), indent=1))
