"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Two kernels dominate the non-LP runtime:

* ``expectation_tensor`` -- contract a pure state with a stack of local
  operators per party, giving every ``<psi| O_k1 x ... x O_kN |psi>`` at once.
  Behaviors, Collins-Gisin vectors and correlators are all built on it.
* ``strategy_scores`` -- evaluate a probability-form Bell expression on every
  local deterministic strategy (exhaustive LHV bounds).

Set ``BELLVIS_NO_NUMBA=1`` to force the numpy path.  The numba path is also
skipped silently when numba cannot be imported.
"""

import logging
import os

import numpy as np

logger = logging.getLogger(__name__)

_DISABLED = os.environ.get("BELLVIS_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError("disabled by BELLVIS_NO_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError as exc:  # pragma: no cover - depends on environment
    logger.debug("numba unavailable (%s); using numpy kernels", exc)
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(func):
            return func

        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return wrap


BACKEND = "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# packing helpers (shared by both paths)


def interleaved_density(psi):
    """Flattened |psi><psi| with index order (a1, b1, a2, b2, ...).

    Qubit 1 is the most significant pair, matching the basis-index convention.
    """
    psi = np.ascontiguousarray(psi, dtype=np.complex128)
    n = int(psi.size).bit_length() - 1
    t = np.multiply.outer(psi.reshape((2,) * n), psi.conj().reshape((2,) * n))
    order = [ax for i in range(n) for ax in (i, n + i)]
    return np.ascontiguousarray(t.transpose(order)).reshape(-1)


def pack_operators(ops):
    """Stack per-party operator lists (K_i, 2, 2) into one padded array.

    Entry ``[i, k, c]`` holds ``O_k[b, a]`` at ``c = 2*a + b`` so that a
    contraction over the interleaved pair index ``c`` yields
    ``sum_ab psi_a conj(psi_b) O[b, a]``.
    """
    ks = np.array([len(o) for o in ops], dtype=np.int64)
    packed = np.zeros((len(ops), int(ks.max()), 4), dtype=np.complex128)
    for i, o in enumerate(ops):
        o = np.asarray(o, dtype=np.complex128)
        packed[i, : len(o)] = o.transpose(0, 2, 1).reshape(len(o), 4)
    return packed, ks


# ---------------------------------------------------------------------------
# expectation tensor


@njit(cache=True)
def _contract_numba(rho, packed, ks):
    n = ks.shape[0]
    cur = rho.reshape((1, rho.size))
    p_dim = 1
    rest = rho.size
    for i in range(n):
        rest //= 4
        kk = ks[i]
        out = np.zeros((p_dim * kk, rest), dtype=np.complex128)
        for p in range(p_dim):
            for k in range(kk):
                row = p * kk + k
                for c in range(4):
                    coef = packed[i, k, c]
                    if coef == 0:
                        continue
                    base = c * rest
                    for r in range(rest):
                        out[row, r] += coef * cur[p, base + r]
        cur = out
        p_dim *= kk
    res = np.empty(p_dim, dtype=np.float64)
    for p in range(p_dim):
        res[p] = cur[p, 0].real
    return res


def _contract_numpy(rho, packed, ks):
    cur = rho.reshape(1, -1)
    for i, kk in enumerate(ks):
        cur = cur.reshape(cur.shape[0], 4, -1)
        cur = np.einsum("pcr,kc->pkr", cur, packed[i, :kk], optimize=True)
        cur = cur.reshape(-1, cur.shape[-1])
    return np.ascontiguousarray(cur[:, 0].real)


def expectation_tensor(psi, ops, backend=None):
    """All expectation values of local operator products.

    Parameters
    ----------
    psi : array of 2**N complex amplitudes
    ops : sequence of N arrays of shape (K_i, 2, 2)
    backend : "numba", "numpy" or None for the module default

    Returns
    -------
    ndarray of shape (K_1, ..., K_N), real part of <psi|O|psi>.
    """
    rho = interleaved_density(psi)
    packed, ks = pack_operators(ops)
    backend = backend or BACKEND
    if backend == "numba" and HAVE_NUMBA:
        flat = _contract_numba(rho, packed, ks)
    else:
        flat = _contract_numpy(rho, packed, ks)
    return flat.reshape(tuple(int(k) for k in ks))


# ---------------------------------------------------------------------------
# exhaustive evaluation over deterministic strategies
#
# A strategy is an integer whose bits (MSB first) are the concatenated
# per-party outcome assignments, party 1 first, setting 0 first.  A
# probability term is satisfied by strategy s iff (s & mask) == value.


@njit(cache=True)
def _scores_numba(masks, values, coeffs, start, stop):
    out = np.empty(stop - start, dtype=np.float64)
    n_terms = masks.shape[0]
    for s in range(start, stop):
        acc = 0.0
        for t in range(n_terms):
            if (s & masks[t]) == values[t]:
                acc += coeffs[t]
        out[s - start] = acc
    return out


def _scores_numpy(masks, values, coeffs, start, stop):
    s = np.arange(start, stop, dtype=np.int64)
    hit = (s[:, None] & masks[None, :]) == values[None, :]
    return hit.astype(np.float64) @ coeffs


def strategy_scores(masks, values, coeffs, n_strategies, backend=None, chunk=1 << 16):
    """Value of a term table on every strategy ``0 .. n_strategies-1``."""
    masks = np.ascontiguousarray(masks, dtype=np.int64)
    values = np.ascontiguousarray(values, dtype=np.int64)
    coeffs = np.ascontiguousarray(coeffs, dtype=np.float64)
    backend = backend or BACKEND
    fn = _scores_numba if (backend == "numba" and HAVE_NUMBA) else _scores_numpy
    parts = []
    for start in range(0, n_strategies, chunk):
        parts.append(fn(masks, values, coeffs, start, min(start + chunk, n_strategies)))
    return np.concatenate(parts) if parts else np.zeros(0)
