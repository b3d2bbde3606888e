"""Dephasing suppression with a multimode interferometer and vacuum heralds.

The input enters mode 1 of an M-mode unitary, every output mode dephases
independently, the conjugate unitary recombines them and the M-1 ancillas are
projected on vacuum.  On the heralded output the channel acts element-wise,
rho_mn -> rho_mn S_mn, with S_mn the joint moments of the random interference
amplitude s_1 = sum_j |U_j1|^2 e^{i phi_j}.  As M grows this tends to the
linear-attenuation map lambda^{a^dag a} with lambda the first circular moment
of the angle distribution, invertible by rotated linear amplification.
"""

import itertools

import numpy as np
from dataclasses import dataclass
from scipy.special import gammaln

from . import fock
from .channels import AngleDistribution, central_gaussian
from .fock import BudgetError

ENUM_BUDGET = 10 ** 7  # composition pairs per S_mn entry


# ---------------------------------------------------------------------------
# interferometers
# ---------------------------------------------------------------------------

@dataclass
class Interferometer:
    M: int
    U: np.ndarray
    kind: str

    @property
    def p(self):
        """Input-column intensity profile p_j = |U_j1|^2."""
        return np.abs(self.U[:, 0]) ** 2

    def unitarity_defect(self):
        return float(np.max(np.abs(self.U.conj().T @ self.U - np.eye(self.M))))


def hadamard_unitary(M):
    """DFT matrix U_jk = e^{2 pi i jk / M}/sqrt(M); |U_jk| = 1/sqrt(M) for every M."""
    j, k = np.meshgrid(np.arange(M), np.arange(M), indexing="ij")
    return Interferometer(M, np.exp(2j * np.pi * j * k / M) / np.sqrt(M), "hadamard")


def haar_unitary(M, seed):
    """Haar-random unitary via QR with the R-diagonal phase fix."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    Z = (rng.normal(size=(M, M)) + 1j * rng.normal(size=(M, M))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    Q = Q * (np.diag(R) / np.abs(np.diag(R)))
    return Interferometer(M, Q, "haar")


def lambda_gamma(dist):
    """First circular moment of the dephasing angle distribution."""
    return complex(dist.moment)


def _intensity_profile(U):
    if isinstance(U, Interferometer):
        return U.p
    U = np.asarray(U)
    if U.ndim == 2:
        return np.abs(U[:, 0]) ** 2
    return np.asarray(U, dtype=float)  # already a probability profile


# ---------------------------------------------------------------------------
# S_mn tables
# ---------------------------------------------------------------------------

@dataclass
class SmnTable:
    S: np.ndarray
    method: str
    gamma: float = None
    M: int = None
    stderr: np.ndarray = None

    @property
    def dim(self):
        return self.S.shape[0]

    def to_json_dict(self):
        out = {"dim": self.dim, "method": self.method, "gamma": self.gamma,
               "M": self.M, "re": self.S.real.tolist(), "im": self.S.imag.tolist()}
        if self.stderr is not None:
            out["stderr"] = self.stderr.tolist()
        return out


def _compositions(total, parts):
    """All length-``parts`` tuples of non-negatives summing to ``total``, as an array."""
    out = np.empty((_n_compositions(total, parts), parts), dtype=np.int64)
    for i, cuts in enumerate(itertools.combinations(range(total + parts - 1), parts - 1)):
        prev, row = -1, []
        for c in list(cuts) + [total + parts - 1]:
            row.append(c - prev - 1)
            prev = c
        out[i] = row
    return out


def _n_compositions(total, parts):
    from math import comb
    return comb(total + parts - 1, parts - 1)


def _log_multinomial_weights(comps, logp):
    total = comps.sum(axis=1)[0] if len(comps) else 0
    lw = gammaln(total + 1) - gammaln(comps + 1.0).sum(axis=1)
    with np.errstate(invalid="ignore"):
        contrib = np.where(comps > 0, comps * logp[None, :], 0.0)
    lw = lw + contrib.sum(axis=1)
    lw[np.any((comps > 0) & np.isneginf(logp)[None, :], axis=1)] = -np.inf
    return lw


def smn_exact(U, dist, m_max, strategy="auto"):
    """Exact S_mn = E[s_1^m s_1*^n] for independent per-mode dephasing.

    strategy 'enumerate' sums over constrained multinomial index pairs (the
    textbook double sum); 'genfunc' evaluates the same moments through the
    truncated bivariate generating function prod_j E[exp(z p_j e^{i phi} +
    w p_j e^{-i phi})], which is exact and cheap for any mode count.  'auto'
    enumerates when the composition budget allows and falls back to genfunc.
    """
    p = _intensity_profile(U)
    M = len(p)
    if strategy == "auto":
        worst = _n_compositions(m_max, M) ** 2
        strategy = "enumerate" if worst <= ENUM_BUDGET else "genfunc"
    if strategy == "genfunc":
        return _smn_genfunc(p, dist, m_max)
    if strategy != "enumerate":
        raise ValueError(f"unknown strategy {strategy!r}")
    if _n_compositions(m_max, M) ** 2 > ENUM_BUDGET:
        raise BudgetError(
            "composition enumeration over budget; use strategy='genfunc' or smn_mc")
    gamma = dist.gamma if dist.kind == "central_gaussian" else None
    with np.errstate(divide="ignore"):
        logp = np.log(p)
    comps = [_compositions(m, M) for m in range(m_max + 1)]
    logws = [_log_multinomial_weights(c, logp) for c in comps]
    S = np.zeros((m_max + 1, m_max + 1), dtype=complex)
    for m in range(m_max + 1):
        K, lwm = comps[m], logws[m]
        for n in range(m + 1):
            Kp, lwn = comps[n], logws[n]
            if gamma is not None and not np.isinf(gamma):
                # e^{-g/2 sum (k-k')^2} = e^{-g/2(|k|^2+|k'|^2)} e^{g k.k'}
                sq_m = (K ** 2).sum(axis=1)
                sq_n = (Kp ** 2).sum(axis=1)
                wa = np.exp(lwm - 0.5 * gamma * sq_m)
                wb = np.exp(lwn - 0.5 * gamma * sq_n)
                G = np.exp(gamma * (K @ Kp.T))
                S[m, n] = wa @ G @ wb
            elif gamma is not None:  # gamma = inf keeps only k == k'
                if m == n:
                    S[m, n] = np.exp(2 * lwm).sum()
            else:
                wa, wb = np.exp(lwm), np.exp(lwn)
                diff = K[:, None, :] - Kp[None, :, :]
                phase = np.prod(np.asarray(dist.char(diff)), axis=2)
                S[m, n] = wa @ phase @ wb
            S[n, m] = np.conj(S[m, n])
    table = SmnTable(S=S, method="exact",
                     gamma=gamma, M=M)
    return table


def _smn_genfunc(p, dist, m_max):
    deg = m_max + 1
    ks = np.arange(deg)
    char = np.asarray(dist.char(ks[:, None] - ks[None, :]))  # char(p - q)
    inv_fact = np.exp(-gammaln(ks + 1.0))
    prod = np.zeros((deg, deg), dtype=complex)
    prod[0, 0] = 1.0
    for pj in p:
        powers = pj ** (ks[:, None] + ks[None, :])
        factor = powers * inv_fact[:, None] * inv_fact[None, :] * char
        nxt = np.zeros_like(prod)
        for i in range(deg):
            for j in range(deg):
                nxt[i:, j:] += prod[i, j] * factor[:deg - i, :deg - j]
        prod = nxt
    fact = np.exp(gammaln(ks + 1.0))
    S = prod * fact[:, None] * fact[None, :]
    return SmnTable(S=S, method="exact_genfunc",
                    gamma=dist.gamma if dist.kind == "central_gaussian" else None,
                    M=len(p))


def smn_mc(U, dist, m_max, samples, seed):
    """Monte-Carlo S_mn with per-entry standard errors."""
    if samples < 10 ** 3:
        raise ValueError("use at least 1e3 samples")
    p = _intensity_profile(U)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    phases = np.exp(1j * dist.sample(rng, (samples, len(p))))
    s1 = phases @ p
    V = np.empty((samples, m_max + 1), dtype=complex)
    V[:, 0] = 1.0
    for m in range(1, m_max + 1):
        V[:, m] = V[:, m - 1] * s1
    S = (V.T @ V.conj()) / samples
    R = np.abs(s1) ** 2
    W = np.empty((samples, 2 * m_max + 1))
    W[:, 0] = 1.0
    for m in range(1, 2 * m_max + 1):
        W[:, m] = W[:, m - 1] * R
    second = np.empty((m_max + 1, m_max + 1))
    for m in range(m_max + 1):
        for n in range(m_max + 1):
            second[m, n] = W[:, m + n].mean()
    stderr = np.sqrt(np.maximum(second - np.abs(S) ** 2, 0.0) / samples)
    return SmnTable(S=S, method="mc",
                    gamma=dist.gamma if dist.kind == "central_gaussian" else None,
                    M=len(p), stderr=stderr)


def smn_hadamard_approx(M, gamma, m_max):
    """Closed-form Hadamard approximation
    S~_mn = e^{-gamma (m-n)^2/(2M)} / [1 + gamma (m+n)/M]^{(M-1)/2}."""
    ms = np.arange(m_max + 1, dtype=float)
    dm = ms[:, None] - ms[None, :]
    sm = ms[:, None] + ms[None, :]
    if np.isinf(gamma):
        S = np.zeros((m_max + 1, m_max + 1))
        S[0, 0] = 1.0
    else:
        S = np.exp(-gamma * dm ** 2 / (2 * M)) / (1 + gamma * sm / M) ** ((M - 1) / 2.0)
    return SmnTable(S=S.astype(complex), method="hadamard_approx", gamma=gamma, M=M)


def smn_small_gamma(U, gamma, m_max):
    """First-order expansion S_mn = 1 - (gamma/2)[(m+n) w + (m-n)^2 (1-w)]."""
    p = _intensity_profile(U)
    w = 1.0 - float((p ** 2).sum())
    ms = np.arange(m_max + 1, dtype=float)
    dm = ms[:, None] - ms[None, :]
    sm = ms[:, None] + ms[None, :]
    S = 1.0 - 0.5 * gamma * (sm * w + dm ** 2 * (1 - w))
    return SmnTable(S=S.astype(complex), method="small_gamma", gamma=gamma, M=len(p))


def smn_rms_distance(table_a, table_b, block=10):
    """Root-mean-square distance over the leading block x block entries."""
    A = table_a.S[:block, :block]
    B = table_b.S[:block, :block]
    return float(np.sqrt(np.mean(np.abs(A - B) ** 2)))


# ---------------------------------------------------------------------------
# applying the suppressed map
# ---------------------------------------------------------------------------

@dataclass
class VMZResult:
    rho_out: np.ndarray
    p_vmz: float


def vmz_apply(rho_in, table):
    """Element-wise suppressed output rho_mn S_mn / p with p = sum_n rho_nn S_nn."""
    rho_in = np.asarray(rho_in, dtype=complex)
    d = rho_in.shape[0]
    if table.dim < d:
        raise ValueError("S_mn table smaller than the state cutoff")
    S = table.S[:d, :d]
    if np.max(np.abs(S - S.conj().T)) > 1e-8:
        raise ValueError("S_mn table is not Hermitian-symmetric")
    out = rho_in * S
    p = float(np.real(np.trace(out)))
    if p <= 0:
        raise ValueError("non-positive herald probability")
    return VMZResult(rho_out=out / p, p_vmz=p)


def vmz_asymptotic(rho_in, lam):
    """Infinite-ancilla limit: lambda^N rho lambda*^N normalized, p = trace."""
    rho_in = np.asarray(rho_in, dtype=complex)
    d = rho_in.shape[0]
    scale = np.asarray(lam, dtype=complex) ** np.arange(d)
    out = rho_in * np.outer(scale, scale.conj())
    p = float(np.real(np.trace(out)))
    return VMZResult(rho_out=out / p, p_vmz=p)


def vmz_invert(rho, lam):
    """Rotated linear amplification lambda^{-N}: undoes the asymptotic map."""
    return vmz_asymptotic(rho, 1.0 / np.conj(lam)).rho_out


def delta_F_first_order(ket, U, gamma, dist=None, strategy="auto"):
    """First-order fidelity gain of suppression vs bare dephasing.

    analytic: (gamma w / 2) sum |rho_mn|^2 (m-n)^2; numeric: F_supp - F_nosupp
    from the exact S_mn table and the bare element-wise dephasing map.
    """
    ket = np.asarray(ket, dtype=complex)
    d = ket.shape[0]
    rho = fock.dm(ket)
    p = _intensity_profile(U)
    w = 1.0 - float((p ** 2).sum())
    ns = np.arange(d)
    dm2 = (ns[:, None] - ns[None, :]) ** 2
    analytic = 0.5 * gamma * w * float(np.sum(np.abs(rho) ** 2 * dm2))
    dist = dist if dist is not None else central_gaussian(gamma)
    table = smn_exact(p, dist, d - 1, strategy=strategy)
    f_supp = fock.fidelity(vmz_apply(rho, table).rho_out, ket)
    bare = rho * np.exp(-gamma * dm2 / 2.0)
    f_nosupp = fock.fidelity(bare / np.trace(bare).real, ket)
    return {"dF_analytic": analytic, "dF_numeric": f_supp - f_nosupp}


# ---------------------------------------------------------------------------
# two-mode oracles (M = 2)
# ---------------------------------------------------------------------------

def _embed_with_vacuum(rho, dim):
    vac = np.zeros((dim, dim), dtype=complex)
    vac[0, 0] = 1.0
    return np.kron(np.asarray(rho, dtype=complex), vac)


def _vacuum_block(X, dim, povm_diag=None):
    """<m,j| X |n,j> contracted against a diagonal ancilla POVM (default |0><0|)."""
    X4 = X.reshape(dim, dim, dim, dim)
    if povm_diag is None:
        return np.ascontiguousarray(X4[:, 0, :, 0])
    return np.einsum("mjnj,j->mn", X4, povm_diag)


def vmz_multimode_oracle(rho_in, U2, dist, dim, angle_samples, seed,
                         batch=200):
    """Full two-mode Monte-Carlo simulation of the M = 2 suppression circuit.

    Embeds rho (x) |0><0|, applies the beam-splitter unitary of the 2x2 mode
    map, averages per-mode rotations over the angle distribution, applies the
    conjugate unitary and projects the ancilla on vacuum.  Independent oracle
    for vmz_apply; also returns a Frobenius-scale standard error.
    """
    U2 = U2.U if isinstance(U2, Interferometer) else np.asarray(U2)
    if U2.shape != (2, 2):
        raise ValueError("oracle is restricted to M = 2")
    UM = fock.two_mode_unitary(U2, dim)
    Y0 = UM @ _embed_with_vacuum(rho_in, dim) @ UM.conj().T
    # columns of UM reaching |n, 0>: enough to form the heralded block
    cols = np.arange(dim) * dim
    V = UM[:, cols]
    rng = np.random.default_rng(seed)
    ns = np.arange(dim)
    acc = np.zeros((dim, dim), dtype=complex)
    acc2 = np.zeros((dim, dim))
    done = 0
    while done < angle_samples:
        b = min(batch, angle_samples - done)
        phis = dist.sample(rng, (b, 2))
        phase = np.exp(1j * (phis[:, 0, None] * ns[None, :]))
        phase2 = np.exp(1j * (phis[:, 1, None] * ns[None, :]))
        full = (phase[:, :, None] * phase2[:, None, :]).reshape(b, dim * dim)
        for i in range(b):
            Y = (full[i][:, None] * full[i].conj()[None, :]) * Y0
            Z = V.conj().T @ Y @ V
            acc += Z
            acc2 += np.abs(Z) ** 2
        done += b
    mean = acc / angle_samples
    var = np.maximum(acc2 / angle_samples - np.abs(mean) ** 2, 0.0)
    stderr_fro = float(np.sqrt(var.sum() / angle_samples))
    p = float(np.real(np.trace(mean)))
    return VMZResult(rho_out=mean / p, p_vmz=p), stderr_fro


def vmz_two_mode_exact(rho_in, U2, gamma, dim, detector=None, gate=None,
                       gate_noise_gamma=None):
    """Deterministic M = 2 pipeline for central-Gaussian dephasing.

    Per-mode dephasing acts element-wise between the beam splitters, so the
    whole heralded map is exact.  ``detector`` = (eta, nbar) puts a thermal
    layer on the ancilla before the vacuum measurement.  ``gate`` (a two-mode
    unitary, normally a modded gate) splits the dephasing into two layers of
    gamma/2 around it; ``gate_noise_gamma`` overrides the per-layer strength.
    """
    from .channels import thermal_channel
    U2 = U2.U if isinstance(U2, Interferometer) else np.asarray(U2)
    UM = fock.two_mode_unitary(U2, dim)
    Y = UM @ _embed_with_vacuum(rho_in, dim) @ UM.conj().T
    ns = np.arange(dim)
    dm2 = (ns[:, None] - ns[None, :]) ** 2
    layer_gamma = gate_noise_gamma if gate_noise_gamma is not None else \
        (gamma / 2.0 if gate is not None else gamma)
    factor = np.exp(-layer_gamma * dm2 / 2.0)

    def dephase(X):
        X4 = X.reshape(dim, dim, dim, dim)
        X4 = X4 * factor[:, None, :, None] * factor[None, :, None, :]
        return X4.reshape(dim * dim, dim * dim)
    Y = dephase(Y)
    if gate is not None:
        Y = gate @ Y @ gate.conj().T
        Y = dephase(Y)
    Y = UM.conj().T @ Y @ UM
    povm = None
    if detector is not None:
        eta_det, nbar_det = detector
        det = thermal_channel(eta_det, nbar_det, dim)
        E = det.adjoint(np.diag((ns == 0).astype(complex)))
        povm = np.real(np.diag(E))
    out = _vacuum_block(Y, dim, povm)
    p = float(np.real(np.trace(out)))
    return VMZResult(rho_out=out / p, p_vmz=p)


def vmz_channel_oracle(rho_in, U2, channel_factory, dim):
    """Two-mode pipeline with an arbitrary per-mode Kraus channel (no dephasing).

    Used to verify that thermal or displacement noise passes through the
    suppression circuit untouched.
    """
    U2 = U2.U if isinstance(U2, Interferometer) else np.asarray(U2)
    UM = fock.two_mode_unitary(U2, dim)
    Y = UM @ _embed_with_vacuum(rho_in, dim) @ UM.conj().T
    chan = channel_factory(dim)
    eye = np.eye(dim)
    out = np.zeros_like(Y)
    for K1 in chan.kraus:
        A = np.kron(K1, eye)
        out += A @ Y @ A.conj().T
    Y, out = out, np.zeros_like(Y)
    for K2 in chan.kraus:
        A = np.kron(eye, K2)
        out += A @ Y @ A.conj().T
    Y = UM.conj().T @ out @ UM
    blk = _vacuum_block(Y, dim)
    p = float(np.real(np.trace(blk)))
    return VMZResult(rho_out=blk / p, p_vmz=p)


# ---------------------------------------------------------------------------
# statistical checks
# ---------------------------------------------------------------------------

def s_vector(U, phis):
    """s_l = sum_j e^{i phi_j} U^dag_{lj} U_{j1} for one angle draw."""
    U = U.U if isinstance(U, Interferometer) else np.asarray(U)
    return U.conj().T @ (np.exp(1j * np.asarray(phis)) * U[:, 0])


def two_design_Y_check(M, draws, seed):
    """Average of Y = sum_j |U_j1|^4 over Haar draws vs the two-design value 2/(M+1)."""
    if draws < 10 ** 3:
        raise ValueError("use at least 1e3 draws")
    rng = np.random.default_rng(seed)
    ys = np.empty(draws)
    for i in range(draws):
        ys[i] = float((haar_unitary(M, rng).p ** 2).sum())
    return {"mean": float(ys.mean()), "stderr": float(ys.std(ddof=1) / np.sqrt(draws)),
            "expected": 2.0 / (M + 1), "hadamard_value": 1.0 / M}


def psg_vmz_order_check(rho_in, U2, g, dim):
    """Trace distance between gadget-then-interferometer and
    interferometer-then-per-mode-gadgets on rho (x) vacuum (pre-channel halves)."""
    from .mitigation import psg_quasi_map, psg_quasi_map_two_mode
    U2 = U2.U if isinstance(U2, Interferometer) else np.asarray(U2)
    UM = fock.two_mode_unitary(U2, dim)
    amp = psg_quasi_map(np.asarray(rho_in, dtype=complex), g)
    rho_a = UM @ _embed_with_vacuum(amp, dim) @ UM.conj().T
    pre = UM @ _embed_with_vacuum(rho_in, dim) @ UM.conj().T
    rho_b = psg_quasi_map_two_mode(pre, g, (dim, dim))
    return fock.trace_distance(rho_a, rho_b)
