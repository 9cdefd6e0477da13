"""Chain diagnostics: split potential scale reduction and effective sample size."""

import numpy as np


def _autocov(x: np.ndarray) -> np.ndarray:
    """Autocovariance along the last axis via FFT (biased estimator)."""
    n = x.shape[-1]
    x = x - x.mean(axis=-1, keepdims=True)
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, n=size, axis=-1)
    acov = np.fft.irfft(f * np.conj(f), n=size, axis=-1)[..., :n]
    return acov / n


def split_chains(chains: np.ndarray) -> np.ndarray:
    """Split each chain of shape ``(C, T, ...)`` in half, giving ``(2C, T//2, ...)``."""
    half = chains.shape[1] // 2
    if half < 2:
        return chains
    first = chains[:, :half]
    second = chains[:, chains.shape[1] - half:]
    return np.concatenate([first, second], axis=0)


def rhat(chains: np.ndarray) -> np.ndarray:
    """Split-R-hat per coordinate for draws shaped ``(C, T, d)``."""
    chains = split_chains(np.asarray(chains, dtype=float))
    m, t = chains.shape[:2]
    if t < 2:
        return np.full(chains.shape[2:], np.nan)
    means = chains.mean(axis=1)
    within = chains.var(axis=1, ddof=1).mean(axis=0)
    between = t * means.var(axis=0, ddof=1) if m > 1 else np.zeros_like(within)
    var_hat = (t - 1) / t * within + between / t
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.sqrt(var_hat / within)
    return np.where(within > 0, out, 1.0)


def ess(chains: np.ndarray) -> np.ndarray:
    """Effective sample size per coordinate (Geyer initial monotone sequence)."""
    chains = split_chains(np.asarray(chains, dtype=float))
    m, t = chains.shape[:2]
    if t < 4:
        return np.full(chains.shape[2:], float(m * t))
    x = np.moveaxis(chains, 1, -1)  # (m, d, t)
    acov = _autocov(x)
    chain_var = acov[..., 0] * t / (t - 1.0)
    within = chain_var.mean(axis=0)
    means = x.mean(axis=-1)
    var_plus = within * (t - 1.0) / t
    if m > 1:
        var_plus = var_plus + means.var(axis=0, ddof=1)
    d = within.shape[0]
    out = np.empty(d)
    for j in range(d):
        if var_plus[j] <= 0:
            out[j] = float(m * t)
            continue
        rho = 1.0 - (within[j] - acov[:, j, :].mean(axis=0)) / var_plus[j]
        rho[0] = 1.0
        # pair sums, truncated at the first negative pair, forced monotone
        npairs = (t - 1) // 2
        pairs = rho[: 2 * npairs].reshape(npairs, 2).sum(axis=1)
        neg = np.flatnonzero(pairs < 0)
        if neg.size:
            pairs = pairs[: neg[0]]
        pairs = np.minimum.accumulate(pairs)
        tau = -1.0 + 2.0 * pairs.sum() if pairs.size else 1.0
        tau = max(tau, 1.0 / np.log10(max(m * t, 10)))
        out[j] = m * t / tau
    return out
