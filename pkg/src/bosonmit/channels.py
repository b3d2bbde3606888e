"""Bosonic noise channels on truncated Fock spaces.

Channel objects share a tiny duck-typed surface: ``dim``, ``label``,
``amp_factor`` (the factor a coherent amplitude is scaled by, used for
passage-inversion checks), ``apply(rho)``, ``adjoint(op)`` (Heisenberg
picture) and ``superop()`` (column-stacking d^2 x d^2 matrix).

Kraus families are truncated by completeness deficit on the guarded subspace
rather than at a fixed operator count, so accuracy is dimension-portable.
"""

import numpy as np
from dataclasses import dataclass, field

from . import fock
from .fock import CutoffError, guard_dim, ladder_ops

DEFICIT_TARGET = 1e-10
PRUNE_NORM = 1e-12


# ---------------------------------------------------------------------------
# Kraus channels
# ---------------------------------------------------------------------------

class KrausChannel:
    """Ordered Kraus family sum_k K rho K^dag."""

    def __init__(self, kraus, label="", amp_factor=1.0, guard=None):
        self.kraus = [np.asarray(K, dtype=complex) for K in kraus]
        self.dim = self.kraus[0].shape[0]
        self.label = label
        self.amp_factor = amp_factor
        self._guard = guard if guard is not None else guard_dim(self.dim)
        self._superop = None

    @property
    def completeness_deficit(self):
        g = self._guard
        acc = sum(K.conj().T @ K for K in self.kraus)
        return float(np.max(np.abs((acc - np.eye(self.dim))[:g, :g])))

    def apply(self, rho):
        rho = np.asarray(rho, dtype=complex)
        if rho.shape[0] != self.dim:
            raise ValueError("dimension mismatch")
        out = np.zeros_like(rho)
        for K in self.kraus:
            out += K @ rho @ K.conj().T
        return out

    def adjoint(self, op):
        out = np.zeros_like(np.asarray(op, dtype=complex))
        for K in self.kraus:
            out += K.conj().T @ op @ K
        return out

    def superop(self):
        if self._superop is None:
            d = self.dim
            S = np.zeros((d * d, d * d), dtype=complex)
            for K in self.kraus:
                S += np.kron(K.conj(), K)
            self._superop = S
        return self._superop


def identity_channel(dim):
    return KrausChannel([np.eye(dim)], label="identity")


def loss_channel(mu, dim, deficit=DEFICIT_TARGET):
    """Photon-loss channel, Kraus K_k = sqrt(mu^k/k!) (1-mu)^{a^dag a/2} a^k."""
    if not 0 <= mu <= 1:
        raise ValueError("loss parameter must be in [0, 1]")
    a, _, _ = ladder_ops(dim)
    ns = np.arange(dim)
    damp = np.diag((1.0 - mu) ** (ns / 2.0)).astype(complex)
    ops, ak = [], np.eye(dim, dtype=complex)
    logmu = np.log(mu) if mu > 0 else -np.inf
    from scipy.special import gammaln
    for k in range(dim):
        coeff = np.exp(0.5 * (k * logmu - gammaln(k + 1))) if mu > 0 else (1.0 if k == 0 else 0.0)
        K = coeff * damp @ ak
        if k > 0 and np.max(np.abs(K)) < PRUNE_NORM:
            break
        ops.append(K)
        chan = KrausChannel(ops, label=f"loss(mu={mu})", amp_factor=np.sqrt(1 - mu))
        if chan.completeness_deficit <= deficit:
            return chan
        ak = a @ ak
    return KrausChannel(ops, label=f"loss(mu={mu})", amp_factor=np.sqrt(1 - mu))


def amp_channel(G, dim, deficit=DEFICIT_TARGET):
    """Quantum-limited amplifier, Kraus A_k = sqrt((1-1/G)^k/(G k!)) a^dag^k G^{-a^dag a/2}."""
    if G < 1:
        raise ValueError("gain must be >= 1")
    _, adag, _ = ladder_ops(dim)
    ns = np.arange(dim)
    damp = np.diag(G ** (-ns / 2.0)).astype(complex)
    ops, adk = [], np.eye(dim, dtype=complex)
    x = 1.0 - 1.0 / G
    from scipy.special import gammaln
    best = None
    for k in range(dim):
        coeff = np.exp(0.5 * (k * np.log(x) - gammaln(k + 1) - np.log(G))) if x > 0 \
            else (G ** -0.5 if k == 0 else 0.0)
        K = coeff * adk @ damp
        if k > 0 and np.max(np.abs(K)) < PRUNE_NORM:
            break
        ops.append(K)
        # amplification consumes headroom: guard shrinks with the Kraus order
        g = max(1, guard_dim(dim) - k)
        chan = KrausChannel(ops, label=f"amp(G={G})", guard=g)
        if chan.completeness_deficit <= deficit:
            return chan
        best = chan
        adk = adag @ adk
    return best if best is not None else KrausChannel(ops, label=f"amp(G={G})")


def thermal_channel(eta, nbar, dim, deficit=DEFICIT_TARGET):
    """Thermal-noise channel as the amplifier composed after loss.

    G = 1 + eta nbar and mu = 1 - (1-eta)/G; the Kraus list is the pruned set
    of pairwise products A_j K_i.
    """
    if not 0 <= eta <= 1 or nbar < 0:
        raise ValueError("require 0 <= eta <= 1 and nbar >= 0")
    G = 1.0 + eta * nbar
    mu = 1.0 - (1.0 - eta) / G
    lo = loss_channel(mu, dim, deficit)
    am = amp_channel(G, dim, deficit)
    ops = []
    for A in am.kraus:
        for K in lo.kraus:
            P = A @ K
            if np.max(np.abs(P)) >= PRUNE_NORM:
                ops.append(P)
    chan = KrausChannel(ops, label=f"thermal(eta={eta},nbar={nbar})",
                        amp_factor=np.sqrt(1 - eta),
                        guard=max(1, guard_dim(dim) - (len(am.kraus) - 1)))
    return chan


# ---------------------------------------------------------------------------
# dephasing
# ---------------------------------------------------------------------------

@dataclass
class AngleDistribution:
    """Phase-randomization angle distribution.

    kind: 'central_gaussian' (param gamma, possibly inf), 'point_mass'
    (param phi0) or 'tabulated' (angles, weights >= 0 summing to 1).
    """
    kind: str
    gamma: float = 0.0
    phi0: float = 0.0
    angles: np.ndarray = None
    weights: np.ndarray = None

    def __post_init__(self):
        if self.kind == "tabulated":
            self.angles = np.asarray(self.angles, dtype=float)
            self.weights = np.asarray(self.weights, dtype=float)
            if np.any(self.weights < 0) or abs(self.weights.sum() - 1) > 1e-12:
                raise ValueError("tabulated weights must be >= 0 and sum to 1")
        elif self.kind not in ("central_gaussian", "point_mass"):
            raise ValueError(f"unknown angle distribution {self.kind!r}")
        if self.kind == "central_gaussian" and self.gamma < 0:
            raise ValueError("gamma must be >= 0")

    @property
    def moment(self):
        """First circular moment lambda = E[e^{i phi}]."""
        return self.char(1)

    def char(self, k):
        """E[e^{i k phi}] for integer (array) k."""
        k = np.asarray(k)
        if self.kind == "central_gaussian":
            if np.isinf(self.gamma):
                return np.where(k == 0, 1.0, 0.0) + 0j
            return np.exp(-self.gamma * k.astype(float) ** 2 / 2.0) + 0j
        if self.kind == "point_mass":
            return np.exp(1j * k * self.phi0)
        return np.asarray([(self.weights * np.exp(1j * kk * self.angles)).sum()
                           for kk in np.atleast_1d(k)]).reshape(k.shape)

    def sample(self, rng, size):
        if self.kind == "central_gaussian":
            if np.isinf(self.gamma):
                return rng.uniform(-np.pi, np.pi, size)
            return rng.normal(0.0, np.sqrt(self.gamma), size)
        if self.kind == "point_mass":
            return np.full(size, self.phi0)
        idx = rng.choice(len(self.angles), size=size, p=self.weights)
        return self.angles[idx]


def central_gaussian(gamma):
    return AngleDistribution("central_gaussian", gamma=gamma)


def point_mass(phi0):
    return AngleDistribution("point_mass", phi0=phi0)


def tabulated(angles, weights):
    return AngleDistribution("tabulated", angles=angles, weights=weights)


class ElementwiseChannel:
    """Channel acting as rho_mn -> F_mn rho_mn (dephasing in the Fock basis)."""

    def __init__(self, factors, label="", amp_factor=1.0):
        self.factors = np.asarray(factors, dtype=complex)
        self.dim = self.factors.shape[0]
        self.label = label
        self.amp_factor = amp_factor

    def apply(self, rho):
        return np.asarray(rho, dtype=complex) * self.factors

    def adjoint(self, op):
        return np.asarray(op, dtype=complex) * self.factors.conj()

    def superop(self):
        d = self.dim
        # column stacking: vec index m + n*d scales by F_mn
        return np.diag(self.factors.T.ravel())


def dephasing_channel(dist, dim):
    """Phase-randomization channel for an AngleDistribution.

    Central Gaussian uses the exact element action |m><n| -> e^{-gamma (m-n)^2/2};
    point/tabulated distributions apply the rotation mixture directly.
    """
    ns = np.arange(dim)
    diff = ns[:, None] - ns[None, :]
    if dist.kind == "central_gaussian":
        return ElementwiseChannel(dist.char(diff), label=f"dephasing(gamma={dist.gamma})")
    # rotation mixture as Kraus list sqrt(w) R(phi)
    if dist.kind == "point_mass":
        angles, weights = np.array([dist.phi0]), np.array([1.0])
    else:
        angles, weights = dist.angles, dist.weights
    ops = [np.sqrt(w) * fock.rotation(phi, dim) for phi, w in zip(angles, weights)]
    return KrausChannel(ops, label=f"dephasing({dist.kind})")


def dephasing_kraus(gamma, dim, deficit=DEFICIT_TARGET):
    """Kraus form of central-Gaussian dephasing: sqrt(gamma^k/k!) e^{-gamma N^2/2} N^k."""
    ns = np.arange(dim, dtype=float)
    envelope = np.exp(-gamma * ns ** 2 / 2.0)
    from scipy.special import gammaln
    ops = []
    g = guard_dim(dim)
    acc = np.zeros(dim)
    logn = np.log(ns, out=np.full(dim, -np.inf), where=ns > 0)
    for k in range(40 * dim):
        if k == 0:
            diag = np.ones(dim)
        elif gamma > 0:
            diag = np.exp(0.5 * (k * np.log(gamma) - gammaln(k + 1)) + k * logn)
        else:
            break
        K = np.diag(envelope * diag).astype(complex)
        ops.append(K)
        acc += np.abs(np.diag(K)) ** 2
        if np.max(np.abs(acc[:g] - 1.0)) <= deficit:
            break
    return KrausChannel(ops, label=f"dephasing_kraus(gamma={gamma})")


# ---------------------------------------------------------------------------
# Gaussian-displacement noise
# ---------------------------------------------------------------------------

class DisplacementMixtureChannel:
    """rho -> sum_i w_i D(alpha_i) rho D(alpha_i)^dag (quadrature nodes)."""

    def __init__(self, weights, alphas, dim, label="", sigma=None):
        self.weights = np.asarray(weights, dtype=float)
        self.alphas = np.asarray(alphas, dtype=complex)
        self.dim = dim
        self.label = label
        self.sigma = sigma
        self.amp_factor = 1.0
        self._ops = None
        self._superop = None

    @property
    def ops(self):
        if self._ops is None:
            self._ops = [fock.displaced_fock_matrix(al, self.dim) for al in self.alphas]
        return self._ops

    def apply(self, rho):
        rho = np.asarray(rho, dtype=complex)
        out = np.zeros_like(rho)
        for w, D in zip(self.weights, self.ops):
            out += w * (D @ rho @ D.conj().T)
        return out

    def adjoint(self, op):
        out = np.zeros_like(np.asarray(op, dtype=complex))
        for w, D in zip(self.weights, self.ops):
            out += w * (D.conj().T @ op @ D)
        return out

    def superop(self):
        if self._superop is None:
            d = self.dim
            # sum_n w_n kron(conj(D_n), D_n) as one (d^2, n) @ (n, d^2) matmul
            Dc = np.stack([D.conj() for D in self.ops]).reshape(len(self.ops), d * d)
            Dm = np.stack(self.ops).reshape(len(self.ops), d * d)
            T = (self.weights[:, None] * Dc).T @ Dm  # [(i,j), (k,l)]
            self._superop = np.ascontiguousarray(
                T.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d))
        return self._superop


def _gdn_nodes(sigma, dim, n_r, n_theta):
    # radial Gauss-Laguerre with the (1+sigma^2) rescaling that makes the
    # integrand polynomial (exact for n_r > dim/2); angular rectangle rule
    from numpy.polynomial.laguerre import laggauss
    v, wv = laggauss(n_r)
    scale = 1.0 + sigma ** 2
    u = v / scale
    w_r = wv * np.exp(v - u) / scale  # absorbs e^{-u} left in the integrand
    thetas = 2 * np.pi * np.arange(n_theta) / n_theta
    W = np.outer(w_r, np.full(n_theta, 1.0 / n_theta))
    A = np.outer(sigma * np.sqrt(u), np.exp(1j * thetas))
    return W.ravel(), A.ravel()


def gdn_channel(sigma, dim, tol=1e-8):
    """Gaussian-displacement noise via polar quadrature of the D-mixture.

    Node counts start at the polynomial-exactness estimate and are doubled
    until the action on a dense probe state changes by < tol.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return identity_channel(dim)
    if sigma > 0.25 * np.sqrt(dim):
        raise CutoffError(f"sigma={sigma} too large for dim={dim}",
                          required_dim=int(np.ceil((sigma / 0.25) ** 2)) + 1)
    n_r, n_theta = dim // 2 + 4, 2 * dim + 2
    probe = fock.dm(np.ones(dim, dtype=complex) / np.sqrt(dim))
    chan = None
    for _ in range(4):
        w, al = _gdn_nodes(sigma, dim, n_r, n_theta)
        new = DisplacementMixtureChannel(w, al, dim, label=f"gdn(sigma={sigma})", sigma=sigma)
        if chan is not None:
            if np.max(np.abs(new.apply(probe) - chan.apply(probe))) < tol:
                return chan
        chan = new
        n_r, n_theta = 2 * n_r, 2 * n_theta
    return chan


def thermal_to_gdn_sigma(eta, nbar):
    """sigma of the GDN channel obtained by amplifying thermal noise."""
    return np.sqrt(eta * (1.0 + nbar) / (1.0 - eta))


def gdn_via_amplified_thermal(eta, nbar, dim, deficit=DEFICIT_TARGET):
    """Identity route A_{1/(1-eta)} after thermal(eta, nbar); cross-validates gdn_channel."""
    chan = compose(thermal_channel(eta, nbar, dim, deficit),
                   amp_channel(1.0 / (1.0 - eta), dim, deficit))
    chan.label = f"gdn_identity_route(eta={eta},nbar={nbar})"
    chan.amp_factor = 1.0
    return chan


# ---------------------------------------------------------------------------
# composition, superoperators, distances
# ---------------------------------------------------------------------------

class ComposedChannel:
    """Sequential application: stages[0] first."""

    def __init__(self, stages, label=""):
        self.stages = list(stages)
        self.dim = self.stages[0].dim
        self.label = label or " ; ".join(s.label for s in self.stages)
        self.amp_factor = np.prod([getattr(s, "amp_factor", 1.0) for s in self.stages])

    def apply(self, rho):
        for s in self.stages:
            rho = s.apply(rho)
        return rho

    def adjoint(self, op):
        for s in reversed(self.stages):
            op = s.adjoint(op)
        return op

    def superop(self):
        S = self.stages[0].superop()
        for s in self.stages[1:]:
            S = s.superop() @ S
        return S


def compose(*channels):
    """compose(A, B) applies A first, then B."""
    if len({c.dim for c in channels}) != 1:
        raise ValueError("dimension mismatch in composition")
    return ComposedChannel(channels)


def apply_channel(chan, rho):
    return chan.apply(rho)


def superop_matrix(chan):
    """Column-stacking superoperator matrix (vec(rho) with Fortran order)."""
    if hasattr(chan, "superop"):
        return chan.superop()
    d = chan.dim
    S = np.empty((d * d, d * d), dtype=complex)
    for n in range(d):
        for m in range(d):
            E = np.zeros((d, d), dtype=complex)
            E[m, n] = 1.0
            S[:, m + n * d] = chan.apply(E).reshape(-1, order="F")
    return S


def _restrict_superop(S, d, g):
    idx = np.array([m + n * d for n in range(g) for m in range(g)])
    return S[np.ix_(idx, idx)]


def superop_distance(chan_a, chan_b, guard=None):
    """Frobenius norm of the superoperator difference, normalized by dim.

    ``guard`` restricts input and output Fock indices to n < guard, which is
    the honest comparison region when compositions can transit the cutoff.
    """
    Sa, Sb = superop_matrix(chan_a), superop_matrix(chan_b)
    d = chan_a.dim
    if guard is not None:
        Sa, Sb = _restrict_superop(Sa, d, guard), _restrict_superop(Sb, d, guard)
    return float(np.linalg.norm(Sa - Sb) / d)


def commutation_check(chan_a, chan_b, guard=None):
    """Superoperator distance between the two orderings of a channel pair."""
    return superop_distance(compose(chan_a, chan_b), compose(chan_b, chan_a), guard=guard)


# ---------------------------------------------------------------------------
# CLI-facing channel specs
# ---------------------------------------------------------------------------

def channel_from_config(spec, dim=None):
    """Build a channel from the JSON object {"kind", "eta", "nbar", "sigma", "gamma", "dim"}."""
    kind = spec.get("kind")
    d = dim if dim is not None else spec.get("dim")
    if d is None:
        raise fock.ConfigError("channel spec needs a dim")
    if kind == "thermal":
        return thermal_channel(spec["eta"], spec["nbar"], d)
    if kind == "loss":
        return loss_channel(spec["eta"], d)
    if kind == "gdn":
        return gdn_channel(spec["sigma"], d)
    if kind == "dephasing":
        return dephasing_channel(central_gaussian(spec["gamma"]), d)
    if kind == "identity":
        return identity_channel(d)
    raise fock.ConfigError(f"unknown channel kind {kind!r}")
