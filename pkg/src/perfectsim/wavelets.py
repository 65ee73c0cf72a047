"""Periodic orthonormal pyramid transform (Haar and least-asymmetric Daubechies, 10 vanishing moments)."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = ["FILTERS", "CoefficientTree", "dwt", "idwt", "highpass"]

_S = 1.0 / np.sqrt(2.0)

FILTERS = {
    "haar": np.array([_S, _S]),
    # least asymmetric, 20 taps
    "la10": np.array([
        0.0007701598091144901, 9.563267072289475e-05, -0.008641299277022422,
        -0.0014653825813050513, 0.0459272392310922, 0.011609893903711381,
        -0.15949427888491757, -0.07088053578324385, 0.47169066693843925,
        0.7695100370211071, 0.38382676106708546, -0.03553674047381755,
        -0.0319900568824278, 0.04999497207737669, 0.005764912033581909,
        -0.02035493981231129, -0.0008043589320165449, 0.004593173585311828,
        5.7036083618494284e-05, -0.0004593294210046588,
    ]),
}


def highpass(h):
    """Quadrature mirror of a lowpass filter: g[m] = (-1)^m h[L-1-m]."""
    L = len(h)
    return np.array([(-1) ** m * h[L - 1 - m] for m in range(L)])


def _filters(wavelet):
    try:
        h = FILTERS[wavelet.lower()]
    except KeyError:
        raise ValueError(f"unknown wavelet {wavelet!r}; choose from {sorted(FILTERS)}") from None
    return h, highpass(h)


@dataclass
class CoefficientTree:
    """Scaling coefficient plus detail levels j = 0 .. J-1, level j holding 2**j values."""

    scaling: np.ndarray
    details: list

    @property
    def J(self):
        return len(self.details)

    @property
    def n(self):
        return 2**self.J

    def flat(self):
        """Detail coefficients in site order: site (j, k) is index 2**j - 1 + k."""
        return np.concatenate(self.details) if self.details else np.zeros(0)

    @classmethod
    def from_flat(cls, scaling, flat):
        flat = np.asarray(flat, float)
        J = int(round(np.log2(flat.size + 1)))
        return cls(np.atleast_1d(np.asarray(scaling, float)).copy(),
                   [flat[2**j - 1:2**(j + 1) - 1].copy() for j in range(J)])


@lru_cache(maxsize=64)
def _matrices(wavelet, N):
    h, g = _filters(wavelet)
    return _analysis_matrix(h, N), _analysis_matrix(g, N)


def _analysis_matrix(filt, N):
    """Row k applies filt at positions 2k - s, 2k - s + 1, ... (mod N).

    The shift s = len(filt)/2 - 1 centres each basis function on its dyadic
    interval, so child (j+1, 2k) sits under parent (j, k) in time.
    """
    s = len(filt) // 2 - 1
    M = np.zeros((N // 2, N))
    for k in range(N // 2):
        for m, c in enumerate(filt):
            M[k, (2 * k + m - s) % N] += c
    return M


def dwt(signal, wavelet="haar"):
    """Full-depth periodic DWT of a length-2**J signal."""
    x = np.asarray(signal, dtype=float)
    n = x.size
    if x.ndim != 1 or n < 2 or n & (n - 1):
        raise ValueError(f"signal length must be a power of two, got {x.shape}")
    wavelet = wavelet.lower()
    details = []
    a = x
    while a.size > 1:
        H, G = _matrices(wavelet, a.size)
        details.append(G @ a)
        a = H @ a
    return CoefficientTree(a, details[::-1])


def idwt(tree, wavelet="haar"):
    wavelet = wavelet.lower()
    a = np.asarray(tree.scaling, float)
    for d in tree.details:
        H, G = _matrices(wavelet, 2 * a.size)
        a = H.T @ a + G.T @ np.asarray(d, float)
    return a
