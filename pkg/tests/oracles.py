"""Independent reference evaluators used by the tests.

Everything here works from explicit index loops and plain numpy arrays so
that it shares no code path with the package.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np


def digits(index: int, dims) -> list[int]:
    """Big-endian mixed-radix digits of a flat index."""
    out = []
    for d in reversed(dims):
        out.append(index % d)
        index //= d
    return out[::-1]


def flat(digs, dims) -> int:
    idx = 0
    for x, d in zip(digs, dims):
        idx = idx * d + x
    return idx


def dense_two_site(dims, a: int, b: int, f) -> np.ndarray:
    """Full permutation matrix for a basis map ``(x_a, x_b) -> f(x_a, x_b)``."""
    n = int(np.prod(dims))
    m = np.zeros((n, n), dtype=complex)
    for col in range(n):
        dg = digits(col, dims)
        dg[a], dg[b] = f(dg[a], dg[b])
        m[flat(dg, dims), col] = 1.0
    return m


def imprint_dense(dims, src, dst):
    d = dims[dst]
    return dense_two_site(dims, src, dst, lambda i, j: (i, (j + i) % d))


def imprint_inverse_dense(dims, src, dst):
    d = dims[dst]
    return dense_two_site(dims, src, dst, lambda i, j: (i, (j - i) % d))


def swap_dense(dims, a, b):
    return dense_two_site(dims, a, b, lambda i, j: (j, i))


def kron_all(vectors) -> np.ndarray:
    out = np.array([1.0 + 0j])
    for v in vectors:
        out = np.kron(out, v)
    return out


def eq9_closed_form(psi, phi, chi) -> np.ndarray:
    """``sum_k chi_k sum_i psi_i |i>_s |i+k>_o |phi>_e`` on layout (s, o, e)."""
    d = len(psi)
    out = np.zeros(d**3, dtype=complex)
    for k in range(d):
        for i in range(d):
            for m in range(d):
                out[flat([i, (i + k) % d, m], [d, d, d])] += chi[k] * psi[i] * phi[m]
    return out


def qudit_joint_amplitudes(psi, u) -> np.ndarray:
    """``c[i', j'] = sum_i psi_i U[i, i'] U[i, j']`` (isolated case)."""
    d = len(psi)
    c = np.zeros((d, d), dtype=complex)
    for ip in range(d):
        for jp in range(d):
            c[ip, jp] = sum(psi[i] * u[i, ip] * u[i, jp] for i in range(d))
    return c


def qudit_final_state(psi, u, secondaries: int = 0) -> np.ndarray:
    """Closed-form final state on (s, o1, [1o1 ...], o2, o3p).

    Signal and ``o2`` share the rotated index ``i'``; ``o1`` and ``o3p``
    share ``j'``; each secondary holds the computational index ``i``.
    Rotated vectors are ``|i'> = sum_a conj(U[a, i']) |a>``.
    """
    d = len(psi)
    primed = [np.conj(u[:, ip]) for ip in range(d)]
    e = np.eye(d)
    total = 0
    for i in range(d):
        for ip in range(d):
            for jp in range(d):
                coeff = psi[i] * u[i, ip] * u[i, jp]
                parts = [primed[ip], primed[jp]] + [e[i]] * secondaries + [primed[ip], primed[jp]]
                total = total + coeff * kron_all(parts)
    return total


def qudit_joint_distribution(psi, u, networked: bool) -> np.ndarray:
    d = len(psi)
    if not networked:
        return np.abs(qudit_joint_amplitudes(psi, u)) ** 2
    p = np.zeros((d, d))
    for ip, jp in itertools.product(range(d), repeat=2):
        p[ip, jp] = sum(abs(psi[i] * u[i, ip] * u[i, jp]) ** 2 for i in range(d))
    return p


def reduced_density(vec, dims, keep) -> np.ndarray:
    """Partial trace by explicit summation over the traced digits."""
    keep = list(keep)
    kd = [dims[k] for k in keep]
    n = int(np.prod(kd))
    rho = np.zeros((n, n), dtype=complex)
    for a in range(len(vec)):
        da = digits(a, dims)
        for b in range(len(vec)):
            db = digits(b, dims)
            if all(da[x] == db[x] for x in range(len(dims)) if x not in keep):
                rho[flat([da[k] for k in keep], kd), flat([db[k] for k in keep], kd)] += vec[a] * np.conj(vec[b])
    return rho


def plus_minus() -> tuple[np.ndarray, np.ndarray]:
    s = 1 / np.sqrt(2)
    return np.array([s, s]), np.array([s, -s])


def eq19_conditional(psi) -> np.ndarray:
    """``(|psi0+psi1|^2/2)|+><+| + (|psi0-psi1|^2/2)|-><-|`` in computational coordinates."""
    plus, minus = plus_minus()
    a = abs(psi[0] + psi[1]) ** 2 / 2
    b = abs(psi[0] - psi[1]) ** 2 / 2
    return a * np.outer(plus, plus) + b * np.outer(minus, minus)


def disagreement(eps) -> float:
    return 2 * np.cos(eps) ** 2 * np.sin(eps) ** 2


def best_rational(probs, bound):
    """Reference rationalization: Fraction.limit_denominator on the first entries, remainder to the last."""
    fr = [Fraction(float(p)).limit_denominator(bound) for p in probs[:-1]]
    last = 1 - sum(fr)
    return fr + [last]


def phase_aligned_gap(a, b) -> float:
    ov = np.vdot(a, b)
    ph = ov / abs(ov) if abs(ov) > 1e-300 else 1.0
    return float(np.max(np.abs(a * ph - b)))


def haar_unitary(d, rng) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_vector(d, rng) -> np.ndarray:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return v / np.linalg.norm(v)
