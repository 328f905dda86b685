"""Jacobi elliptic functions and elliptic integrals by AGM / descending Landen.

Parameter convention is m (Abramowitz-Stegun "parameter", m = k**2).

incomplete_E takes the elliptic *argument* w and returns
E(w|m) = integral_0^w dn(t|m)**2 dt, i.e. the Legendre integral evaluated at
the amplitude am(w|m). The traveling-wave solutions feed the same argument into
cn/dn and into E, and only this reading keeps x(tau, s + period) - x(tau, s)
constant.

m = 1 is handled by the hyperbolic closed forms; the AGM would not terminate
there because b_0 = 0.
"""

import math

import numpy as np

from .errors import EllipticDomainError

_EPS = np.finfo(float).eps
_MAX_AGM_STEPS = 40


def _check_parameter(m, allow_one=True):
    m = float(m)
    if not 0.0 <= m <= 1.0 or (m == 1.0 and not allow_one):
        upper = "1]" if allow_one else "1)"
        raise EllipticDomainError(f"Elliptic parameter m={m} outside [0, {upper}")
    return m


def _agm_sequence(m):
    """[(a_n, c_n)] for n = 0..N of the AGM started at (1, sqrt(1-m))."""
    a, b, c = 1.0, math.sqrt(1.0 - m), math.sqrt(m)
    seq = [(a, c)]
    for _ in range(_MAX_AGM_STEPS):
        if abs(c) <= _EPS * a:
            return seq
        a, b, c = 0.5 * (a + b), math.sqrt(a * b), 0.5 * (a - b)
        seq.append((a, c))
    raise EllipticDomainError(f"AGM did not converge for m={m}")


def complete_K(m):
    """Complete elliptic integral of the first kind K(m), 0 <= m < 1."""
    m = _check_parameter(m, allow_one=False)
    a_n = _agm_sequence(m)[-1][0]
    return math.pi / (2.0 * a_n)


def _e_over_k(seq):
    # E(m)/K(m) = 1 - sum_n 2**(n-1) c_n**2
    return 1.0 - sum(2.0 ** (n - 1) * c * c for n, (_, c) in enumerate(seq))


def complete_E(m):
    """Complete elliptic integral of the second kind E(m), 0 <= m <= 1."""
    m = _check_parameter(m)
    if m == 1.0:
        return 1.0
    seq = _agm_sequence(m)
    return _e_over_k(seq) * math.pi / (2.0 * seq[-1][0])


def _amplitude_chain(w, seq):
    """phi_0..phi_N of the descending recursion, phi_N = 2**N a_N w."""
    N = len(seq) - 1
    phi = (2.0 ** N) * seq[-1][0] * w
    chain = [phi]
    for n in range(N, 0, -1):
        a_n, c_n = seq[n]
        phi = 0.5 * (phi + np.arcsin(c_n / a_n * np.sin(phi)))
        chain.append(phi)
    chain.reverse()
    return chain


def jacobi_amplitude(w, m):
    """am(w|m), continuous and increasing in w."""
    m = _check_parameter(m)
    w = np.asarray(w, dtype=float)
    if m == 1.0:
        return 2.0 * np.arctan(np.tanh(0.5 * w))
    return _amplitude_chain(w, _agm_sequence(m))[0]


def jacobi_sn_cn_dn(w, m):
    """(sn, cn, dn) at elliptic argument w for 0 <= m <= 1."""
    m = _check_parameter(m)
    w = np.asarray(w, dtype=float)
    if m == 1.0:
        sech = 1.0 / np.cosh(w)
        return np.tanh(w), sech, sech
    phi = _amplitude_chain(w, _agm_sequence(m))[0]
    sn = np.sin(phi)
    cn = np.cos(phi)
    dn = np.sqrt(1.0 - m * sn * sn)
    return sn, cn, dn


def incomplete_E(w, m):
    """E(w|m) = integral_0^w dn(t|m)**2 dt (argument convention, see module doc)."""
    m = _check_parameter(m)
    w = np.asarray(w, dtype=float)
    if m == 1.0:
        return np.tanh(w)
    seq = _agm_sequence(m)
    chain = _amplitude_chain(w, seq)
    # E(w|m) = w E/K + Z(w|m), Z = sum_{n>=1} c_n sin(phi_n)
    zeta = np.zeros_like(w)
    for n in range(1, len(seq)):
        zeta = zeta + seq[n][1] * np.sin(chain[n])
    return _e_over_k(seq) * w + zeta
