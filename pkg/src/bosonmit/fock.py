"""Dense complex linear algebra on truncated single- and few-mode Fock spaces.

Conventions used throughout the package:

* quadratures  ``q = (a + a^dag)/sqrt(2)``, ``p = (a - a^dag)/(i sqrt(2))``, hbar = 1
* position kets ``|x>_q`` are delta-normalized, ``<n|x> = pi^{-1/4} (2^n n!)^{-1/2} H_n(x) e^{-x^2/2}``
* Wigner function ``W(x, p) = (1/pi) tr[rho D(alpha) P D(alpha)^dag]`` with
  ``alpha = (x + i p)/sqrt(2)`` and parity ``P = (-1)^{a^dag a}``; the vacuum then
  has ``W(0, 0) = 1/pi`` and ``iint W dx dp = 1``.

States are plain numpy arrays: kets of shape ``(d,)``, density matrices of
shape ``(d, d)``, complex dtype.  The truncation guard covers the levels
``n <= GUARD_FRACTION * d``; anything above is treated as a truncation artifact.
"""

import numpy as np
from scipy.linalg import expm

GUARD_FRACTION = 0.8
TAIL_TOL = 1e-8


class CutoffError(ValueError):
    """Fock cutoff too small for the requested state or operation."""

    def __init__(self, msg, required_dim=None):
        super().__init__(msg)
        self.required_dim = required_dim


class BudgetError(RuntimeError):
    """A configured memory/enumeration budget would be exceeded."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


def guard_dim(dim):
    """Largest Fock index (exclusive) of the trusted low-energy subspace."""
    return max(1, int(np.floor(GUARD_FRACTION * dim)))


# ---------------------------------------------------------------------------
# operators
# ---------------------------------------------------------------------------

def ladder_ops(dim):
    """Annihilation, creation and number operators at cutoff ``dim``.

    Entries: ``a[n-1, n] = sqrt(n)``, ``adag = a^dag``, ``num = diag(0..d-1)``.
    """
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    a = np.zeros((dim, dim), dtype=complex)
    ns = np.arange(1, dim)
    a[ns - 1, ns] = np.sqrt(ns)
    num = np.diag(np.arange(dim, dtype=float)).astype(complex)
    return a, a.conj().T, num


def displacement(alpha, dim):
    """D(alpha) = exp(alpha a^dag - alpha* a) via scaling-and-squaring expm."""
    a, adag, _ = ladder_ops(dim)
    return expm(alpha * adag - np.conj(alpha) * a)


def squeeze(z, dim):
    """S(z) = exp((z* a^2 - z a^dag^2)/2)."""
    a, adag, _ = ladder_ops(dim)
    return expm(0.5 * (np.conj(z) * (a @ a) - z * (adag @ adag)))


def rotation(phi, dim):
    """R(phi) = exp(i phi a^dag a), diagonal entries e^{i phi n}."""
    return np.diag(np.exp(1j * phi * np.arange(dim)))


def gain(g, dim):
    """g^{a^dag a}, diagonal entries g^n (non-unitary for g != 1)."""
    return np.diag(np.asarray(g, dtype=complex) ** np.arange(dim))


def parity(dim):
    return np.diag((-1.0 + 0j) ** np.arange(dim))


def gaussian_ops(kind, dim, **params):
    """Dispatch constructor for the Gaussian operator family.

    kind: 'displacement' (alpha), 'squeeze' (z), 'rotation' (phi), 'gain' (g).
    """
    if kind == "displacement":
        return displacement(params["alpha"], dim)
    if kind == "squeeze":
        return squeeze(params["z"], dim)
    if kind == "rotation":
        return rotation(params["phi"], dim)
    if kind == "gain":
        return gain(params["g"], dim)
    raise ValueError(f"unknown Gaussian operator kind {kind!r}")


# ---------------------------------------------------------------------------
# states
# ---------------------------------------------------------------------------

def coherent_state(alpha, dim, guard=True):
    """Coherent ket |alpha> truncated at ``dim`` and renormalized.

    amps[n] = e^{-|alpha|^2/2} alpha^n / sqrt(n!).  The tail guard requires
    |alpha|^2 <= dim/2 so the truncated tail mass stays below ~1e-8.
    """
    n_mean = abs(alpha) ** 2
    if guard and n_mean > 0.5 * dim:
        raise CutoffError(
            f"|alpha|^2 = {n_mean:.3g} exceeds dim/2 = {dim / 2:.3g}",
            required_dim=int(np.ceil(2 * n_mean)) + 1,
        )
    amps = np.empty(dim, dtype=complex)
    amps[0] = np.exp(-0.5 * n_mean)
    for n in range(1, dim):
        amps[n] = amps[n - 1] * alpha / np.sqrt(n)
    return amps / np.linalg.norm(amps)


def coherent_tail_mass(alpha, dim):
    """Probability mass of |alpha> beyond the cutoff (exact Poisson tail)."""
    n_mean = abs(alpha) ** 2
    logp = -n_mean + np.arange(dim) * np.log(n_mean + (n_mean == 0)) - _lgamma_arange(dim)
    return max(0.0, 1.0 - float(np.exp(logp).sum())) if n_mean > 0 else 0.0


def _lgamma_arange(dim):
    from scipy.special import gammaln
    return gammaln(np.arange(1, dim + 1))


def fock_state(n, dim):
    ket = np.zeros(dim, dtype=complex)
    ket[n] = 1.0
    return ket


def position_coeffs(x, dim):
    """Overlap vector <n|x> for the delta-normalized position ket.

    Stable normalized Hermite recurrence:
        psi_0 = pi^{-1/4} e^{-x^2/2},  psi_1 = sqrt(2) x psi_0,
        psi_{n+1} = sqrt(2/(n+1)) x psi_n - sqrt(n/(n+1)) psi_{n-1}.
    """
    psi = np.zeros(dim, dtype=float)
    psi[0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if dim > 1:
        psi[1] = np.sqrt(2.0) * x * psi[0]
    for n in range(1, dim - 1):
        psi[n + 1] = np.sqrt(2.0 / (n + 1)) * x * psi[n] - np.sqrt(n / (n + 1.0)) * psi[n - 1]
    if not np.all(np.isfinite(psi)):
        raise CutoffError(f"Hermite recurrence overflowed at x={x}, dim={dim}; reduce dim")
    return psi.astype(complex)


def normalize(state):
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return state / np.linalg.norm(state)
    tr = np.trace(state).real
    return state / tr


def dm(ket):
    ket = np.asarray(ket, dtype=complex)
    return np.outer(ket, ket.conj())


def project_psd(rho):
    """Clip negative eigenvalues and renormalize; returns (rho, clipped_mass).

    Never applied silently anywhere in the package: callers must opt in.
    """
    w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    clipped = float(-w[w < 0].sum())
    w = np.clip(w, 0.0, None)
    out = (v * w) @ v.conj().T
    return out / np.trace(out).real, clipped


# ---------------------------------------------------------------------------
# multimode helpers
# ---------------------------------------------------------------------------

def tensor(*arrays):
    """Kronecker product with mode ordering (system, ancilla_1, ...)."""
    out = np.asarray(arrays[0], dtype=complex)
    for x in arrays[1:]:
        out = np.kron(out, np.asarray(x, dtype=complex))
    return out


MAX_MULTIMODE_DIM = 4_200_000  # total density-matrix elements


def partial_trace(rho, dims, keep):
    """Trace out all modes except ``keep`` (int index into ``dims``)."""
    dims = list(dims)
    if rho.shape != (int(np.prod(dims)),) * 2:
        raise ValueError("rho shape does not match dims")
    n = len(dims)
    rho = rho.reshape(dims + dims)
    # trace the unwanted modes highest-index first; each trace removes one
    # axis pair, so the bra-side offset is the live mode count
    for mode in sorted((m for m in range(n) if m != keep), reverse=True):
        live = rho.ndim // 2
        rho = np.trace(rho, axis1=mode, axis2=mode + live)
    return rho


def _check_budget(dims):
    if int(np.prod(dims)) ** 2 > MAX_MULTIMODE_DIM:
        raise BudgetError(f"multimode density matrix over budget: dims={dims}")


def two_mode_unitary(umat, dim):
    """Dense Fock-space unitary implementing the 2x2 mode map ``umat``.

    Built sector-by-sector in the total-photon-number decomposition, so every
    complete sector (N <= dim-1) is exact.  Satisfies U^dag a_j U = sum_k
    umat[j,k] a_k and U |alpha>|0> = ||U11 alpha> |U21 alpha>.
    """
    from scipy.linalg import logm
    umat = np.asarray(umat, dtype=complex)
    gen = logm(umat)  # anti-Hermitian for unitary input
    d2 = dim * dim
    U = np.zeros((d2, d2), dtype=complex)
    for ntot in range(2 * dim - 1):
        ms = np.arange(max(0, ntot - dim + 1), min(ntot, dim - 1) + 1)
        idx = ms * dim + (ntot - ms)  # flat indices |m, ntot-m>
        k = len(ms)
        G = np.zeros((k, k), dtype=complex)
        for i, m in enumerate(ms):
            n = ntot - m
            # a1^dag a1, a2^dag a2 diagonal; a1^dag a2 / a2^dag a1 offdiagonal
            G[i, i] = gen[0, 0] * m + gen[1, 1] * n
            if i + 1 < k:  # |m+1, n-1><m, n| from a1^dag a2
                G[i + 1, i] = gen[0, 1] * np.sqrt((m + 1) * n)
            if i > 0:  # |m-1, n+1><m, n| from a2^dag a1
                G[i - 1, i] = gen[1, 0] * np.sqrt(m * (n + 1))
        U[np.ix_(idx, idx)] = expm(G)
    return U


def two_mode_apply(umat, psi):
    """Apply the mode map ``umat`` (2x2) to a two-mode ket given as a (d, d) matrix.

    Sector-wise, avoiding any dense d^2 x d^2 operator; used for large cutoffs.
    """
    from scipy.linalg import logm
    umat = np.asarray(umat, dtype=complex)
    gen = logm(umat)
    d = psi.shape[0]
    out = np.zeros_like(psi, dtype=complex)
    for ntot in range(2 * d - 1):
        ms = np.arange(max(0, ntot - d + 1), min(ntot, d - 1) + 1)
        k = len(ms)
        G = np.zeros((k, k), dtype=complex)
        for i, m in enumerate(ms):
            n = ntot - m
            G[i, i] = gen[0, 0] * m + gen[1, 1] * n
            if i + 1 < k:
                G[i + 1, i] = gen[0, 1] * np.sqrt((m + 1) * n)
            if i > 0:
                G[i - 1, i] = gen[1, 0] * np.sqrt(m * (n + 1))
        vec = psi[ms, ntot - ms]
        out[ms, ntot - ms] = expm(G) @ vec
    return out


def apply_to_mode(op, rho, mode, dims):
    """Apply a single-mode operator matrix to one mode of a multimode dm."""
    n = len(dims)
    rho = rho.reshape(dims + dims)
    rho = np.tensordot(op, rho, axes=([1], [mode]))
    rho = np.moveaxis(rho, 0, mode)
    rho = np.tensordot(rho, op.conj().T, axes=([n + mode], [0]))
    rho = np.moveaxis(rho, -1, n + mode)
    d = int(np.prod(dims))
    return rho.reshape(d, d)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------

def _as_dm(state):
    state = np.asarray(state, dtype=complex)
    return dm(state) if state.ndim == 1 else state


def _pure_ket(state, tol=1e-6):
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        return state
    w, v = np.linalg.eigh(state)
    if w[-1] < 1 - tol:
        raise ValueError("fidelity reference state is not pure")
    return v[:, -1]


def fidelity(rho, sigma):
    """<sigma|rho|sigma> for a pure reference sigma (ket or pure dm)."""
    ket = _pure_ket(sigma)
    rho = np.asarray(rho, dtype=complex)
    if rho.shape[0] != ket.shape[0]:
        raise ValueError("dimension mismatch")
    if rho.ndim == 1:
        return float(abs(np.vdot(ket, rho)) ** 2)
    return float(np.real(ket.conj() @ rho @ ket))


def trace_distance(rho, sigma):
    delta = _as_dm(rho) - _as_dm(sigma)
    if delta.shape[0] != delta.shape[1]:
        raise ValueError("dimension mismatch")
    w = np.linalg.eigvalsh(0.5 * (delta + delta.conj().T))
    return 0.5 * float(np.abs(w).sum())


def mean_photon(state):
    state = np.asarray(state, dtype=complex)
    ns = np.arange(state.shape[0])
    if state.ndim == 1:
        return float(ns @ (np.abs(state) ** 2))
    return float(np.real(ns @ np.diag(state)))


def state_metrics(rho, sigma):
    return {
        "fidelity": fidelity(rho, sigma),
        "trace_distance": trace_distance(rho, sigma),
        "mean_photon": mean_photon(rho),
    }


def hermiticity_defect(mat):
    return float(np.max(np.abs(mat - mat.conj().T)))


def unitarity_defect(U, dim_guard=None):
    """max |U^dag U - 1| restricted to the guarded block."""
    d = U.shape[0]
    g = dim_guard if dim_guard is not None else guard_dim(d)
    delta = U.conj().T @ U - np.eye(d)
    return float(np.max(np.abs(delta[:g, :g])))


# ---------------------------------------------------------------------------
# displaced Fock matrices and Wigner function
# ---------------------------------------------------------------------------

def displaced_fock_matrix(alpha, dim):
    """Exact projected displacement matrix <m|D(alpha)|n> for m, n < dim.

    Column recurrence D|n+1> = (a^dag - alpha*) D|n> / sqrt(n+1); every entry
    equals the infinite-dimensional matrix element (no truncation error).
    """
    D = np.empty((dim, dim), dtype=complex)
    col = np.empty(dim, dtype=complex)
    col[0] = np.exp(-0.5 * abs(alpha) ** 2)
    for m in range(1, dim):
        col[m] = col[m - 1] * alpha / np.sqrt(m)
    D[:, 0] = col
    sq = np.sqrt(np.arange(dim))
    ac = np.conj(alpha)
    for n in range(dim - 1):
        up = np.zeros(dim, dtype=complex)
        up[1:] = sq[1:] * D[:-1, n]
        D[:, n + 1] = (up - ac * D[:, n]) / np.sqrt(n + 1)
    return D


class PhaseSpaceGrid:
    """Wigner samples on a rectangular (x, p) grid.

    values[i, j] = W(xs[i], ps[j]); ``mass`` is the trapezoid integral over
    the grid and ``warning`` is set when the grid coverage looks insufficient.
    """

    def __init__(self, xs, ps, values, warning=None):
        self.xs = np.asarray(xs, dtype=float)
        self.ps = np.asarray(ps, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.warning = warning

    @property
    def mass(self):
        trapz = getattr(np, "trapezoid", np.trapz)
        return float(trapz(trapz(self.values, self.ps, axis=1), self.xs))

    def to_csv(self, path):
        """CSV with header x,p,w; row-major, x outer, p inner; 17 sig digits."""
        with open(path, "w") as fh:
            fh.write("x,p,w\n")
            for i, x in enumerate(self.xs):
                for j, p in enumerate(self.ps):
                    fh.write(f"{x:.17g},{p:.17g},{self.values[i, j]:.17g}\n")


def wigner_grid(rho, xs, ps, chunk=512):
    """Displaced-parity Wigner function on a grid (exact at the cutoff).

    W(x, p) = (1/pi) sum_k (-1)^k <k| D^dag rho D |k>, alpha = (x+ip)/sqrt(2).
    """
    rho = _as_dm(rho)
    d = rho.shape[0]
    xs = np.asarray(xs, dtype=float)
    ps = np.asarray(ps, dtype=float)
    X, P = np.meshgrid(xs, ps, indexing="ij")
    alphas = ((X + 1j * P) / np.sqrt(2.0)).ravel()
    par = ((-1.0) ** np.arange(d))
    out = np.empty(alphas.size, dtype=float)
    sq = np.sqrt(np.arange(d))
    for lo in range(0, alphas.size, chunk):
        al = alphas[lo:lo + chunk]
        D = np.empty((al.size, d, d), dtype=complex)
        col = np.empty((al.size, d), dtype=complex)
        col[:, 0] = np.exp(-0.5 * np.abs(al) ** 2)
        for m in range(1, d):
            col[:, m] = col[:, m - 1] * al / sq[m]
        D[:, :, 0] = col
        ac = np.conj(al)[:, None]
        for n in range(d - 1):
            up = np.zeros_like(col)
            up[:, 1:] = sq[1:] * D[:, :-1, n]
            D[:, :, n + 1] = (up - ac * D[:, :, n]) / np.sqrt(n + 1)
        C = rho[None, :, :] @ D
        out[lo:lo + chunk] = ((D.conj() * C).sum(axis=1).real * par).sum(axis=1) / np.pi
    grid = PhaseSpaceGrid(xs, ps, out.reshape(X.shape))
    if abs(grid.mass - 1.0) > 0.01:
        grid.warning = f"grid integral {grid.mass:.4f} deviates from 1; coverage may be insufficient"
    return grid
