"""Donoho-Johnstone test signals on an equispaced grid."""
from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["blocks", "bumps", "doppler", "heavisine", "TEST_FUNCTIONS", "STUDY_WAVELET", "standard_signal", "checksum"]

_T = np.array([0.1, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81])


def blocks(t):
    h = np.array([4, -5, 3, -4, 5, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2])
    return (h * (1 + np.sign(t[:, None] - _T)) / 2).sum(axis=1)


def bumps(t):
    h = np.array([4, 5, 3, 4, 5, 4.2, 2.1, 4.3, 3.1, 5.1, 4.2])
    w = np.array([0.005, 0.005, 0.006, 0.01, 0.01, 0.03, 0.01, 0.01, 0.005, 0.008, 0.005])
    return (h * (1 + np.abs((t[:, None] - _T) / w)) ** -4).sum(axis=1)


def doppler(t, eps=0.05):
    return np.sqrt(t * (1 - t)) * np.sin(2 * np.pi * (1 + eps) / (t + eps))


def heavisine(t):
    return 4 * np.sin(4 * np.pi * t) - np.sign(t - 0.3) - np.sign(0.72 - t)


TEST_FUNCTIONS = {"blocks": blocks, "bumps": bumps, "doppler": doppler, "heavisine": heavisine}

# the wavelet each function is analysed with in the simulation study
STUDY_WAVELET = {"blocks": "haar", "bumps": "la10", "doppler": "la10", "heavisine": "la10"}


def standard_signal(name, n=256):
    """Function sampled at i/n, i = 1..n, centred and scaled to unit standard deviation."""
    t = np.arange(1, n + 1) / n
    y = TEST_FUNCTIONS[name](t)
    return (y - y.mean()) / y.std(ddof=1)


def checksum(x):
    return hashlib.sha256(np.round(np.asarray(x, float), 12).tobytes()).hexdigest()[:16]
