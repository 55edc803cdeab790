import numpy as np
from scipy.special import comb, gammaln


def hermite_functions(count, x):
    """
    Evaluate the normalized Hermite functions psi_0 .. psi_{count-1} at the given points.

    Uses the upward recurrence on the normalized functions themselves,

        psi_0(x)     = pi^(-1/4) exp(-x^2 / 2)
        psi_1(x)     = sqrt(2) x psi_0(x)
        psi_{n+1}(x) = sqrt(2 / (n + 1)) x psi_n(x) - sqrt(n / (n + 1)) psi_{n-1}(x)

    so no raw polynomial or factorial is ever formed and n ~ 60 at |x| ~ 10 stays finite.

    Args:
        count (int): Number of functions to evaluate.
        x (array_like): Evaluation points.

    Returns:
        np.ndarray: Real array of shape (count,) + x.shape with psi_n(x) = <x|n>.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((count,) + x.shape)
    if count == 0:
        return out
    out[0] = np.pi ** -0.25 * np.exp(-x ** 2 / 2)
    if count > 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(1, count - 1):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * x * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    return out


def quadrature_table(count, values, angle=0.0):
    """
    Overlaps <x_theta|n> between rotated-quadrature eigenstates and Fock states.

    x_theta = x cos(theta) + p sin(theta), so <x_theta|n> = exp(-i theta n) psi_n(x);
    theta = pi/2 gives the momentum overlaps (-i)^n psi_n(p).

    Returns:
        np.ndarray: Complex array of shape (len(values), count).
    """
    values = np.atleast_1d(np.asarray(values, dtype=float))
    phases = np.exp(-1j * angle * np.arange(count))
    return hermite_functions(count, values).T * phases[None, :]


def displacement_matrices(betas, rows, cols=None):
    """
    Matrix elements <m|D(beta)|n> for a batch of displacements.

    The elements are exact (no truncation error): row 0 is the coherent
    overlap <0|D(beta)|n> = exp(-|beta|^2/2) (-beta*)^n / sqrt(n!), and the
    remaining rows follow from a D = D (a + beta):

        sqrt(m + 1) <m+1|D|n> = beta <m|D|n> + sqrt(n) <m|D|n-1>

    Args:
        betas (array_like): Complex displacement amplitudes, any shape.
        rows (int): Number of output Fock levels m.
        cols (int, optional): Number of input Fock levels n. Defaults to rows.

    Returns:
        np.ndarray: Complex array of shape betas.shape + (rows, cols).
    """
    cols = rows if cols is None else cols
    betas = np.asarray(betas, dtype=complex)
    flat = betas.reshape(-1)
    n = np.arange(cols)
    out = np.empty((flat.size, rows, cols), dtype=complex)

    log_norm = -0.5 * gammaln(n + 1)
    factors = np.repeat(-np.conj(flat)[:, None], cols, axis=1)
    factors[:, 0] = 1.0
    first = np.cumprod(factors, axis=1)  # (-beta*)^n without 0**0 pitfalls
    out[:, 0, :] = first * np.exp(log_norm)[None, :] * np.exp(-np.abs(flat) ** 2 / 2)[:, None]

    sqrt_n = np.sqrt(n[1:])
    for m in range(rows - 1):
        nxt = flat[:, None] * out[:, m, :]
        nxt[:, 1:] += sqrt_n[None, :] * out[:, m, :-1]
        out[:, m + 1, :] = nxt / np.sqrt(m + 1)
    return out.reshape(betas.shape + (rows, cols))


def displacement_matrix(beta, cutoff):
    """Single displacement operator <m|D(beta)|n> truncated to cutoff x cutoff."""
    return displacement_matrices(np.asarray(beta), cutoff)


def beamsplitter_amplitudes(n1, n2, transmissivity):
    """
    Output amplitudes of the beam splitter acting on the Fock state |n1, n2>.

    Convention: a1^dag -> sqrt(T) a1^dag + sqrt(1-T) a2^dag and
    a2^dag -> -sqrt(1-T) a1^dag + sqrt(T) a2^dag, which gives the Heisenberg
    map x1 -> sqrt(T) x1 - sqrt(1-T) x2, x2 -> sqrt(1-T) x1 + sqrt(T) x2.

    Returns:
        np.ndarray: amplitudes c_i of |i, n1 + n2 - i> for i = 0 .. n1 + n2.
    """
    t = np.sqrt(transmissivity)
    rho = np.sqrt(1.0 - transmissivity)
    p = np.arange(n1 + 1)
    q = np.arange(n2 + 1)
    # powers of a1^dag from each factor
    first = comb(n1, p) * t ** p * rho ** (n1 - p)
    second = comb(n2, q) * (-rho) ** q * t ** (n2 - q)
    poly = np.convolve(first, second)
    total = n1 + n2
    i = np.arange(total + 1)
    log_scale = 0.5 * (gammaln(i + 1) + gammaln(total - i + 1) - gammaln(n1 + 1) - gammaln(n2 + 1))
    return poly * np.exp(log_scale)


def beamsplitter_matrix(cutoff, transmissivity):
    """
    Two-mode beam-splitter matrix on the truncated space, mode-major ordering.

    Built from exact amplitudes; photon-number conservation makes every block
    with n1 + n2 < cutoff exact.
    """
    dim = cutoff * cutoff
    out = np.zeros((dim, dim), dtype=complex)
    for n1 in range(cutoff):
        for n2 in range(cutoff):
            amps = beamsplitter_amplitudes(n1, n2, transmissivity)
            total = n1 + n2
            for i, amp in enumerate(amps):
                j = total - i
                if i < cutoff and j < cutoff:
                    out[i * cutoff + j, n1 * cutoff + n2] = amp
    return out
