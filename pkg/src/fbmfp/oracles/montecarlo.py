"""Monte Carlo simulation of the square-root SDE driven by fractional Brownian motion.

The simulated equation is ``dX = (b X + c) dt + sqrt(a / v) sqrt(X) dB^H``
with ``H = v``. Fractional Gaussian noise is generated by circulant
embedding (Davies-Harte), which is exact in distribution; the SDE is advanced
by full-truncation Euler, so the state may dip below zero but only its
positive part enters the coefficients.

The stochastic integral needs a convention once ``H != 1/2``:

* ``'wick-euler'`` (default) reads it as a Wick (divergence) integral, the one
  whose Ito formula carries the ``H t^(2H-1) sigma^2`` second-order term. Each
  Euler product ``sigma(X_k) dB_k`` is replaced by its Wick version, which to
  first order subtracts ``sigma sigma'(X_k) E[B_tk dB_k]``. For the square
  root ``sigma sigma' = a / (2v)`` is constant, so the correction is the
  deterministic ``(a / 2v) (t_k+1^(2H) - t_k^(2H) - dt^(2H)) / 2``; it vanishes
  at ``H = 1/2``.
* ``'pathwise-euler'`` uses the raw Riemann sums, which converge to the
  pathwise (Young) integral for ``H > 1/2`` and have no limit for ``H < 1/2``.

``scheme='gaussian-martingale'`` replaces ``dB^H`` by the independent-increment
Gaussian martingale with the same variance ``t^(2H)``, i.e.
``sqrt(2 H t^(2H-1)) dW``. It is a diagnostic: its forward equation is exactly
the PDE solved by the Laplace-domain pipeline, so it separates numerical error
from the question of which stochastic integral the PDE describes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DomainError
from ..params import FpkParams

SCHEMES = ("wick-euler", "pathwise-euler", "gaussian-martingale")
_CHUNK_BUDGET = 4_000_000


@dataclass(frozen=True)
class FbmSimConfig:
    """Simulation settings.

    Paths are simulated in chunks that each draw from their own generator
    spawned from ``seed``; ``chunk=None`` picks ``min(10000, 4e6 / n_steps)``.
    """

    hurst: float
    n_paths: int
    n_steps: int
    horizon: float
    x0: float
    seed: int = 20240601
    scheme: str = "wick-euler"
    chunk: int | None = None

    def __post_init__(self):
        if not 0 < self.hurst < 1:
            raise DomainError("hurst must lie in (0, 1)")
        if self.n_paths < 1 or self.n_steps < 1 or (self.chunk is not None and self.chunk < 1):
            raise DomainError("n_paths, n_steps and chunk must be positive")
        if not (self.horizon > 0 and self.x0 > 0):
            raise DomainError("horizon and x0 must be positive")
        if self.scheme not in SCHEMES:
            raise DomainError(f"scheme must be one of {SCHEMES}")

    @property
    def paths_per_chunk(self):
        if self.chunk is not None:
            return self.chunk
        return max(1, min(10000, _CHUNK_BUDGET // self.n_steps))


def fgn_autocovariance(n, hurst):
    """Autocovariance of unit-step fractional Gaussian noise at lags ``0..n-1``."""
    k = np.arange(n, dtype=float)
    two_h = 2.0 * hurst
    return 0.5 * (np.abs(k + 1) ** two_h - 2.0 * k ** two_h + np.abs(k - 1) ** two_h)


def _circulant_eigenvalues(n, hurst):
    gam = fgn_autocovariance(n + 1, hurst)
    row = np.concatenate([gam, gam[-2:0:-1]])
    return np.fft.fft(row).real


def fractional_gaussian_noise(n_steps, hurst, n_samples, rng, step=1.0):
    """``(n_samples, n_steps)`` fGn increments of fBm on a grid of spacing ``step``.

    Uses circulant embedding; each complex FFT yields two independent
    sequences (real and imaginary parts). Falls back to a Cholesky factor of
    the Toeplitz covariance if the embedding has a negative eigenvalue.
    """
    n = int(n_steps)
    lam = _circulant_eigenvalues(n, hurst)
    scale = step ** hurst
    if lam.min() < -1e-10 * lam.max():
        cov = fgn_autocovariance(n, hurst)
        idx = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :])
        chol = np.linalg.cholesky(cov[idx])
        return scale * rng.standard_normal((n_samples, n)) @ chol.T
    root = np.sqrt(np.maximum(lam, 0.0) / (2 * n))
    pairs = (n_samples + 1) // 2
    w = rng.standard_normal((pairs, 2 * n)) + 1j * rng.standard_normal((pairs, 2 * n))
    y = np.fft.fft(root[None, :] * w, axis=1)[:, :n]
    out = np.concatenate([y.real, y.imag], axis=0)[:n_samples]
    return scale * out


def _simulate_chunk(cfg, params, n, rng):
    dt = cfg.horizon / cfg.n_steps
    sigma = np.sqrt(params.a / params.v)
    two_h = 2.0 * cfg.hurst
    t = np.arange(cfg.n_steps + 1) * dt
    x = np.full(n, float(cfg.x0))
    correction = np.zeros(cfg.n_steps)
    if cfg.scheme == "gaussian-martingale":
        noise = rng.standard_normal((n, cfg.n_steps)) * np.sqrt(np.diff(t ** two_h))[None, :]
    else:
        noise = fractional_gaussian_noise(cfg.n_steps, cfg.hurst, n, rng, dt)
        if cfg.scheme == "wick-euler":
            correction = params.a / (2.0 * params.v) * 0.5 * (np.diff(t ** two_h) - dt ** two_h)
    for k in range(cfg.n_steps):
        xp = np.maximum(x, 0.0)
        x = (x + (params.b * xp + params.c) * dt + sigma * np.sqrt(xp) * noise[:, k]
             - correction[k] * (xp > 0))
    return x


def simulate_fbm_paths(cfg: FbmSimConfig, params: FpkParams):
    """Terminal values ``max(X_T, 0)`` of ``cfg.n_paths`` simulated paths.

    Chunks draw from generators spawned from ``cfg.seed``, so the output is a
    deterministic function of the configuration.
    """
    if abs(cfg.hurst - params.v) > 1e-12:
        raise DomainError("hurst must equal the exponent v")
    size = cfg.paths_per_chunk
    n_chunks = -(-cfg.n_paths // size)
    seeds = np.random.SeedSequence(cfg.seed).spawn(n_chunks)
    out = np.empty(cfg.n_paths)
    for i, ss in enumerate(seeds):
        lo = i * size
        hi = min(lo + size, cfg.n_paths)
        out[lo:hi] = _simulate_chunk(cfg, params, hi - lo, np.random.default_rng(ss))
    return np.maximum(out, 0.0)
