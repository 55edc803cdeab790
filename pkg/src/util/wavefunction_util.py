import numpy as np

from src.util.fock_util import hermite_functions, quadrature_table


def fock_to_wavefunction(amplitudes, x, angle=0.0):
    """psi(x_theta) = sum_n c_n <x_theta|n> for a single-mode amplitude vector."""
    amplitudes = np.asarray(amplitudes, dtype=complex)
    return quadrature_table(amplitudes.size, x, angle) @ amplitudes


def wavefunction_to_fock(psi, x, dx, cutoff):
    """Fock amplitudes c_n = int psi_n(x) psi(x) dx, evaluated as a Riemann sum."""
    return hermite_functions(cutoff, x) @ np.asarray(psi, dtype=complex) * dx


def fourier_kernel(x_out, y, dy, sign=1):
    """Matrix of exp(sign i x y) dy / sqrt(2 pi); sign=+1 maps psi(y) to (F psi)(x)."""
    return np.exp(sign * 1j * np.outer(x_out, y)) * dy / np.sqrt(2 * np.pi)


def phase_polynomial(x, coefficients):
    """f(x) = c1 x + c2 x^2 + c3 x^3 + ... for coefficients (c1, c2, c3, ...)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for k, c in enumerate(coefficients, start=1):
        out = out + c * x ** k
    return out


def p_squeezed_wavefunction(x, r, coefficients=()):
    """
    Position wavefunction of the |p=0> proxy, optionally carrying a phase exp(i f(x)).

    The p-squeezed vacuum has Var(x) = e^{2r}/2:
    (pi e^{2r})^{-1/4} exp(-x^2 e^{-2r} / 2).
    """
    x = np.asarray(x, dtype=float)
    envelope = (np.pi * np.exp(2 * r)) ** -0.25 * np.exp(-x ** 2 * np.exp(-2 * r) / 2)
    if len(coefficients):
        return envelope * np.exp(1j * phase_polynomial(x, coefficients))
    return envelope.astype(complex)


def project_rows(rows, hermite, dx):
    """Fock coefficients of wavefunctions stored along the last axis."""
    return rows @ hermite.T * dx


def mixture_density(profiles, profile_weights, envelopes, envelope_weight, hermite, dx, chunk=16):
    """
    Fock density of the mixture sum_{k,s} w_k w_s |out_ks><out_ks| where
    out_ks(x) = profiles[k](x) * envelopes[s](x).

    Args:
        profiles (np.ndarray): (K, Nx) input-side factors.
        profile_weights (np.ndarray): (K,) integration weights of the profiles.
        envelopes (np.ndarray): (Ns, Nx) outcome-dependent factors.
        envelope_weight (float): integration weight of each envelope row.
        hermite (np.ndarray): (cutoff, Nx) Hermite functions on the x grid.
        dx (float): x grid spacing.

    Returns:
        np.ndarray: (cutoff, cutoff) density matrix, not renormalized.
    """
    cutoff = hermite.shape[0]
    basis = hermite.T * dx
    rho = np.zeros((cutoff, cutoff), dtype=complex)
    for k in range(0, profiles.shape[0], chunk):
        block = profiles[k:k + chunk, None, :] * envelopes[None, :, :]
        coeffs = block @ basis
        scale = np.sqrt(profile_weights[k:k + chunk] * envelope_weight)
        flat = (coeffs * scale[:, None, None]).reshape(-1, cutoff)
        rho += flat.T @ flat.conj()
    return rho


def outcome_densities(profile, envelopes, dx):
    """Probability density of each outcome row: int |profile(x) envelope_s(x)|^2 dx."""
    return np.sum(np.abs(profile[None, :] * envelopes) ** 2, axis=1) * dx


def pure_components(state, floor=1e-12):
    """
    Fock amplitude rows and weights of a state: one row for a FockState, the
    eigenvectors above floor for a single-mode FockDensity.
    """
    if hasattr(state, 'amplitudes'):
        amps = np.asarray(state.amplitudes, dtype=complex)
        return amps[None, :] / np.linalg.norm(amps), np.ones(1)
    matrix = np.asarray(state.matrix, dtype=complex)
    evals, evecs = np.linalg.eigh(0.5 * (matrix + matrix.conj().T))
    keep = evals > floor
    weights = evals[keep] / evals[keep].sum()
    return evecs[:, keep].T, weights


def power_of_two_points(half_width, step, minimum=64):
    """Smallest power of two giving a spacing no larger than step on [-L, L]."""
    needed = int(np.ceil(2 * half_width / step)) + 1
    return max(minimum, 1 << (needed - 1).bit_length())


def shifted_rows(function, x, shifts, chunk=64):
    """Rows function(x + s) for every shift s, evaluated a chunk of shifts at a time."""
    x = np.asarray(x, dtype=float)
    shifts = np.asarray(shifts, dtype=float)
    out = np.empty((shifts.size, x.size), dtype=complex)
    for start in range(0, shifts.size, chunk):
        block = x[None, :] + shifts[start:start + chunk, None]
        out[start:start + chunk] = function(block)
    return out


def fock_wavefunction_fn(amplitudes):
    """Callable evaluating sum_n c_n psi_n on an array of any shape."""
    amplitudes = np.asarray(amplitudes, dtype=complex)

    def evaluate(points):
        points = np.asarray(points, dtype=float)
        flat = fock_to_wavefunction(amplitudes, points.reshape(-1))
        return flat.reshape(points.shape)

    return evaluate
