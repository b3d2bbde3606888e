"""Photon-subtraction-gadget error mitigation with probabilistic error cancellation.

The amplifying gadget (gain g > 1) is not completely positive, so it is
realized indirectly: a probabilistic linear amplification g_mu = g/mu, a
deterministic attenuating gadget with parameter mu < 1, and signed
quasi-probability weights omega_k recombine the photon-subtraction outcomes
into the amplified map.  Expectation values are then estimated from
multinomial samples with a clamped (range-constrained) estimator whose exact
moments are available in closed form.
"""

import numpy as np
from dataclasses import dataclass
from scipy.special import erf, erfc, gammaln

from . import fock
from .channels import KrausChannel, thermal_channel, DEFICIT_TARGET
from .fock import ConfigError, CutoffError, guard_dim

TAIL_TOL = 1e-8
# Outcome tables tolerate a fatter amplified-state tail than the passage
# oracle: near the useful mu the amplified squeezed states only fit loosely
# at practical cutoffs, exactly as in the reference experiments.
TABLE_TAIL_TOL = 1e-3


# ---------------------------------------------------------------------------
# PSG maps
# ---------------------------------------------------------------------------

def psg_attenuating_kraus(mu, dim, deficit=DEFICIT_TARGET):
    """Kraus family K_{mu,k} = sqrt((mu^{-2}-1)^k / k!) a^k mu^{a^dag a}.

    This is the deterministic attenuating gadget: a beam splitter of
    transmittance mu^2 followed by counting the subtracted photons.
    """
    if not 0 < mu <= 1:
        raise ValueError("attenuating PSG requires 0 < mu <= 1")
    a, _, _ = fock.ladder_ops(dim)
    damp = np.diag(mu ** np.arange(dim, dtype=float)).astype(complex)
    c = mu ** -2 - 1.0
    ops, ak = [], np.eye(dim, dtype=complex)
    for k in range(dim):
        logc = 0.5 * (k * np.log(c) - gammaln(k + 1)) if c > 0 else (0.0 if k == 0 else -np.inf)
        K = np.exp(logc) * (ak @ damp)
        ops.append(K)
        chan = KrausChannel(ops, label=f"psg_att(mu={mu})", amp_factor=mu)
        if chan.completeness_deficit <= deficit:
            return chan
        ak = a @ ak
        if c == 0:
            break
    return KrausChannel(ops, label=f"psg_att(mu={mu})", amp_factor=mu)


def _shift_down(mat):
    """a X a^dag on a Fock-basis matrix: (m, n) <- sqrt((m+1)(n+1)) X[m+1, n+1]."""
    d = mat.shape[0]
    out = np.zeros_like(mat)
    sq = np.sqrt(np.arange(1, d))
    out[:-1, :-1] = np.outer(sq, sq) * mat[1:, 1:]
    return out


def psg_quasi_map(rho, g):
    """Direct series evaluation of the gadget map for any g > 0.

    M[rho] = sum_k (g^{-2}-1)^k / k!  a^k g^N rho g^N a^dag^k.  Trace
    preserving for every g; completely positive only for g <= 1.
    """
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    scale = np.asarray(g, dtype=float) ** np.arange(d)
    term = rho * np.outer(scale, scale)
    c = g ** -2 - 1.0
    out = term.copy()
    for k in range(1, d):
        term = _shift_down(term) * (c / k)
        out += term
    return out


def psg_quasi_map_two_mode(rho, g, dims):
    """Tensor-product gadget map on a two-mode state (one gadget per mode)."""
    d1, d2 = dims
    rho = np.asarray(rho, dtype=complex).reshape(d1, d2, d1, d2)
    s1 = np.asarray(g, dtype=float) ** np.arange(d1)
    s2 = np.asarray(g, dtype=float) ** np.arange(d2)
    rho = rho * s1[:, None, None, None] * s2[None, :, None, None] \
              * s1[None, None, :, None] * s2[None, None, None, :]
    c = g ** -2 - 1.0
    # mode 1 series
    out = np.zeros_like(rho)
    term = rho.copy()
    out += term
    sq1 = np.sqrt(np.arange(1, d1))
    for k in range(1, d1):
        nxt = np.zeros_like(term)
        nxt[:-1, :, :-1, :] = term[1:, :, 1:, :] * sq1[:, None, None, None] * sq1[None, None, :, None]
        term = nxt * (c / k)
        out += term
    # mode 2 series
    rho, out = out, np.zeros_like(out)
    term = rho.copy()
    out += term
    sq2 = np.sqrt(np.arange(1, d2))
    for k in range(1, d2):
        nxt = np.zeros_like(term)
        nxt[:, :-1, :, :-1] = term[:, 1:, :, 1:] * sq2[None, :, None, None] * sq2[None, None, None, :]
        term = nxt * (c / k)
        out += term
    return out.reshape(d1 * d2, d1 * d2)


def linear_amp_map(rho, g):
    """Bare (subtraction-free) linear amplification/attenuation, normalized."""
    d = rho.shape[0]
    scale = np.asarray(g, dtype=float) ** np.arange(d)
    out = rho * np.outer(scale, scale)
    return out / np.trace(out).real


def amplified_state(rho, gmu, tail_tol=TAIL_TOL):
    """rho(g_mu) = g_mu^N rho g_mu^N / N_{g_mu}; returns (state, norm).

    Raises CutoffError when the amplified state leaks past the guarded
    subspace by more than ``tail_tol``.
    """
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    logs = np.arange(d) * np.log(gmu)
    logs -= logs.max()  # overflow-safe; rescaling cancels in the normalized state
    scale = np.exp(logs)
    out = rho * np.outer(scale, scale)
    tr = np.trace(out).real
    if tr <= 0 or not np.isfinite(tr):
        raise CutoffError(f"amplified state degenerate at g_mu={gmu}")
    out /= tr
    g = guard_dim(d)
    tail = float(np.real(np.trace(out[g:, g:])))
    if tail > tail_tol:
        raise CutoffError(
            f"amplified state tail {tail:.2e} beyond guard at g_mu={gmu}; increase dim")
    return out, _gain_norm(rho, gmu)


def _gain_norm(rho, gmu):
    """N_{g_mu} = tr(g_mu^N rho g_mu^N), evaluated stably in log space."""
    d = rho.shape[0]
    diag = np.real(np.diag(rho)).clip(min=0)
    logs = 2 * np.arange(d) * np.log(gmu)
    m = logs.max()
    return float(np.exp(m) * np.sum(diag * np.exp(logs - m)))


@dataclass
class QuasiDecomposition:
    """Signed weights pairing attenuating-gadget outcomes into the amplifying map."""
    weights: np.ndarray          # omega_k, alternating sign for g > 1
    kraus: KrausChannel          # attenuating gadget K_{mu, k}
    norm_gmu: float
    rho_gmu: np.ndarray
    g: float
    mu: float

    @property
    def kmax(self):
        return len(self.weights) - 1

    def reconstruct(self):
        out = np.zeros_like(self.rho_gmu)
        for w, K in zip(self.weights, self.kraus.kraus):
            out += w * (K @ self.rho_gmu @ K.conj().T)
        return out


def quasiprob_decomposition(rho_in, g, mu, deficit=DEFICIT_TARGET, tail_tol=TAIL_TOL):
    """omega_k = N_{g_mu} (g^{-2}-1)^k / (mu^{-2}-1)^k for the attenuating family.

    The subtraction count is extended until the signed reconstruction trace
    sum_k omega_k tr(K_k rho(g_mu) K_k^dag) has converged to 1: the channel
    completeness criterion alone under-truncates when mu -> 1, where the
    weights grow fast while individual outcome probabilities shrink.
    """
    rho_in = np.asarray(rho_in, dtype=complex)
    d = rho_in.shape[0]
    if g == 1 and mu == 1:
        return QuasiDecomposition(weights=np.array([1.0]),
                                  kraus=KrausChannel([np.eye(d)], label="psg_att(mu=1)"),
                                  norm_gmu=1.0, rho_gmu=rho_in, g=1.0, mu=1.0)
    if g < 1:
        raise ValueError("quasi-probability decomposition targets g >= 1")
    if not 0 < mu < 1:
        raise ValueError("mu must lie in (0, 1)")
    gmu = g / mu
    rho_amp, norm = amplified_state(rho_in, gmu, tail_tol)
    a, _, _ = fock.ladder_ops(d)
    damp = np.diag(mu ** np.arange(d, dtype=float)).astype(complex)
    c_mu = mu ** -2 - 1.0
    ratio = (g ** -2 - 1.0) / c_mu
    ops, weights = [], []
    ak = np.eye(d, dtype=complex)
    partial, quiet = 0.0, 0
    for k in range(d):
        K = np.exp(0.5 * (k * np.log(c_mu) - gammaln(k + 1))) * (ak @ damp)
        w = norm * ratio ** k
        term = w * float(np.real(np.trace(K @ rho_amp @ K.conj().T)))
        ops.append(K)
        weights.append(w)
        partial += term
        quiet = quiet + 1 if abs(term) < max(deficit, 1e-12) else 0
        if k >= 2 and quiet >= 2 and abs(partial - 1.0) < 10 * deficit:
            break
        ak = a @ ak
    chan = KrausChannel(ops, label=f"psg_att(mu={mu})", amp_factor=mu)
    return QuasiDecomposition(weights=np.asarray(weights), kraus=chan, norm_gmu=norm,
                              rho_gmu=rho_amp, g=g, mu=mu)


# ---------------------------------------------------------------------------
# mitigation passage (infinite-N oracle)
# ---------------------------------------------------------------------------

def rule_of_thumb_g(kind, eta=None, nbar=None, sigma=None, multiplier=1.0, g=None):
    """Gain threshold and matched attenuation for a channel family.

    thermal: g >> 2 sqrt(2 ln2 nbar eta/(1-eta)), g' = 1/(g sqrt(1-eta));
    gdn: g >> 2 sqrt(2 ln2) sigma, g' = 1/g.  The '>>' is resolved as
    threshold * multiplier (a heuristic, not a guarantee); when ``g`` is not
    given, max(1, multiplier * threshold) is used.
    """
    if kind == "thermal":
        if eta is None or nbar is None:
            raise ConfigError("thermal rule needs eta and nbar")
        if eta >= 1:
            raise ZeroDivisionError("eta = 1 makes the thermal rule singular")
        threshold = 2.0 * np.sqrt(2.0 * np.log(2.0) * nbar * eta / (1.0 - eta))
        if g is None:
            g = max(1.0, multiplier * threshold)
        return {"g_threshold": threshold, "g": g, "g_prime": 1.0 / (g * np.sqrt(1.0 - eta))}
    if kind == "gdn":
        if sigma is None:
            raise ConfigError("gdn rule needs sigma")
        threshold = 2.0 * np.sqrt(2.0 * np.log(2.0)) * sigma
        if g is None:
            g = max(1.0, multiplier * threshold)
        return {"g_threshold": threshold, "g": g, "g_prime": 1.0 / g}
    raise ConfigError(f"no rule of thumb for channel kind {kind!r}")


def matched_g_prime(g, channel):
    """g' with g g' mu_channel = 1, using the channel's coherent-amplitude factor."""
    return 1.0 / (g * getattr(channel, "amp_factor", 1.0))


def mitigated_passage(rho_in, channel, g, g_prime=None, inner=None,
                      variant="psg", enforce=True):
    """Infinite-N oracle: amplifying gadget, noise (and optional inner gate),
    attenuating gadget, evaluated by direct quasi-map algebra.

    variant 'psg' is the mitigation passage; 'linear' drops photon
    subtraction (bare g^N amplification); 'reversed' swaps the gadget order.
    Returns the normalized output state.
    """
    rho_in = np.asarray(rho_in, dtype=complex)
    if g_prime is None:
        g_prime = matched_g_prime(g, channel)
    if enforce:
        mu_chan = getattr(channel, "amp_factor", 1.0)
        if abs(g * g_prime * mu_chan - 1.0) > 1e-9:
            raise ConfigError(
                f"g * g' * mu_channel = {g * g_prime * mu_chan:.6f} != 1; "
                "pass enforce=False for ablations")
    if variant == "reversed":
        first, last = g_prime, g
    else:
        first, last = g, g_prime
    if variant == "linear":
        mid = linear_amp_map(rho_in, first)
    else:
        mid = psg_quasi_map(rho_in, first)
    mid = channel.apply(mid) if channel is not None else mid
    if inner is not None:
        mid = inner(mid)
    if variant == "linear":
        out = linear_amp_map(mid, last)
    else:
        out = psg_quasi_map(mid, last)
    tr = np.trace(out).real
    return out / tr


# ---------------------------------------------------------------------------
# observables and outcome tables
# ---------------------------------------------------------------------------

@dataclass
class Observable:
    """Measurement outcomes (E_l, o_l) grouped into ``n_groups`` complete POVMs.

    O = sum_l values[l] ops[l].  Each group of outcomes must resolve the
    identity; one group is chosen uniformly per copy, so joint probabilities
    carry a 1/n_groups factor and the sampled values pick up the inverse.
    """
    ops: list                  # PSD outcome operators
    values: np.ndarray         # o_l coefficients of O
    n_groups: int = 1
    label: str = ""

    def check(self):
        for E in self.ops:
            w = np.linalg.eigvalsh(0.5 * (E + E.conj().T))
            if w.min() < -1e-8:
                raise ValueError("observable outcome is not PSD")

    def expectation(self, rho):
        return float(sum(v * np.real(np.trace(E @ rho))
                         for E, v in zip(self.ops, self.values)))


def two_projector_observable(target_ket, dim=None):
    """{|t><t|, 1 - |t><t|} with values (1, 0): direct fidelity sampling."""
    ket = np.asarray(target_ket, dtype=complex)
    d = dim if dim is not None else ket.shape[0]
    P = fock.dm(ket)
    return Observable(ops=[P, np.eye(d) - P], values=np.array([1.0, 0.0]),
                      n_groups=1, label="two_projector")


@dataclass
class OutcomeTable:
    """Joint probabilities p_kl of subtracting k photons and seeing outcome l."""
    probs: np.ndarray          # (kmax+1, L), sums to 1
    values: np.ndarray         # o_l, group-rescaled
    weights: np.ndarray        # omega_k
    norm_gmu: float
    g: float
    mu: float
    g_prime: float
    herald_prob: float = 1.0   # < 1 only when a heralded suppressor is inside
    p_subtract: np.ndarray = None  # physical k-subtraction probabilities

    @property
    def chi(self):
        return np.outer(self.weights, self.values)

    @property
    def B(self):
        return float(np.sum(self.chi * self.probs))

    @property
    def B_ratio(self):
        """N->infinity value of the normalization-corrected estimator.

        Equals B for ideal trace-preserving tables; for noisy or heralded
        tables it is the plug-in value after the complete-basis pass that
        pins the identity expectation to 1.
        """
        denom = float(self.weights @ self.subtraction_marginal)
        return float(np.sum(self.chi * self.probs) / denom)

    def A(self, N):
        chi, q = self.chi.ravel(), self.probs.ravel()
        return float((chi ** 2 @ q - (chi @ q) ** 2) / N)

    @property
    def subtraction_marginal(self):
        return self.probs.sum(axis=1)


def propagate_observable_back(channel, g_prime, observable, psgn_layer=None,
                              suppressor=None, deficit=DEFICIT_TARGET):
    """Adjoint-propagate the outcome operators through the mu-independent tail
    of the circuit (noise channel, optional suppressor, attenuating gadget,
    trailing noise layers).  The result can be reused across a mu scan.
    """
    observable.check()
    dim = observable.ops[0].shape[0]
    att_out = psg_attenuating_kraus(g_prime, dim, deficit) if g_prime <= 1 else None
    back_ops = []
    for E in observable.ops:
        X = np.asarray(E, dtype=complex)
        if psgn_layer is not None:
            X = psgn_layer.adjoint(X)
        if att_out is not None:
            X = att_out.adjoint(X)
        else:
            # g' > 1 occurs only in ablations; fall back to the series adjoint
            X = _quasi_adjoint(X, g_prime)
        if psgn_layer is not None:
            X = psgn_layer.adjoint(X)
        X = channel.adjoint(X)
        if suppressor is not None:
            X = suppressor.adjoint(X)
        if psgn_layer is not None:
            X = psgn_layer.adjoint(X)
        back_ops.append(X)
    return back_ops


def _table_from_back_ops(rho_in, g, mu, g_prime, observable, back_ops,
                         psgn_layer=None, heralded=False, deficit=DEFICIT_TARGET,
                         tail_tol=TABLE_TAIL_TOL):
    rho_in = np.asarray(rho_in, dtype=complex)
    rho0 = psgn_layer.apply(rho_in) if psgn_layer is not None else rho_in
    rho_amp, _ = amplified_state(rho0, g / mu, tail_tol)
    if psgn_layer is not None:
        rho_amp = psgn_layer.apply(rho_amp)
    quasi = quasiprob_decomposition(rho_in, g, mu, deficit, tail_tol)  # omega from the ideal input
    branches = [K @ rho_amp @ K.conj().T for K in quasi.kraus.kraus]
    p_subtract = np.array([float(np.real(np.trace(br))) for br in branches])
    probs = np.empty((len(branches), len(back_ops)))
    for k, br in enumerate(branches):
        for l, X in enumerate(back_ops):
            probs[k, l] = max(0.0, float(np.real(np.sum(X.T * br)))) / observable.n_groups
    total = probs.sum()
    if not heralded and abs(total - 1.0) > 1e-6:
        raise ConfigError(f"outcome probabilities sum to {total:.8f}; "
                          "observable groups are incomplete")
    probs /= total
    values = np.asarray(observable.values, dtype=float) * observable.n_groups
    return OutcomeTable(probs=probs, values=values, weights=quasi.weights,
                        norm_gmu=quasi.norm_gmu, g=g, mu=mu, g_prime=g_prime,
                        herald_prob=float(total), p_subtract=p_subtract)


def outcome_probabilities(rho_in, channel, g, mu, g_prime=None, observable=None,
                          psgn=None, suppressor=None, deficit=DEFICIT_TARGET):
    """Build the joint outcome table p_kl = <o_l| sigma_k |o_l>.

    sigma_k is the k-subtraction branch pushed through the noise channel
    (plus optional suppressor stage) and the attenuating gadget.  ``psgn``
    inserts five thermal layers (eta0/5 each): before amplification, after
    amplification, before the channel, after the channel, and before the
    measurement.
    """
    rho_in = np.asarray(rho_in, dtype=complex)
    d = rho_in.shape[0]
    if g_prime is None:
        g_prime = matched_g_prime(g, channel)
    if observable is None:
        raise ConfigError("an observable is required")
    layer = None
    if psgn is not None:
        layer = thermal_channel(psgn["eta0"] / 5.0, psgn["nbar"], d, deficit)
    back_ops = propagate_observable_back(channel, g_prime, observable,
                                         psgn_layer=layer, suppressor=suppressor,
                                         deficit=deficit)
    return _table_from_back_ops(rho_in, g, mu, g_prime, observable, back_ops,
                                psgn_layer=layer, heralded=suppressor is not None,
                                deficit=deficit)


def _quasi_adjoint(op, g):
    """Adjoint of the gadget map applied to an observable (series form)."""
    d = op.shape[0]
    c = g ** -2 - 1.0
    scale = np.asarray(g, dtype=float) ** np.arange(d)
    out = np.zeros_like(op)
    term = op.copy()
    out += term
    sq = np.sqrt(np.arange(1, d))
    for k in range(1, d):
        nxt = np.zeros_like(term)
        nxt[1:, 1:] = np.outer(sq, sq) * term[:-1, :-1]  # a^dag X a
        term = nxt * (c / k)
        out += term
    return out * np.outer(scale, scale)


# ---------------------------------------------------------------------------
# constrained estimator statistics
# ---------------------------------------------------------------------------

@dataclass
class EstimatorStats:
    A: float
    B: float
    a: float
    b: float
    N: int


def stats_from_table(table, N, a, b):
    return EstimatorStats(A=table.A(N), B=table.B, a=a, b=b, N=N)


def constrained_estimate(r, a, b):
    """Clamp of the raw linear-combination estimator to its physical range."""
    if a >= b:
        raise ValueError("need a < b")
    return float(np.clip(r, a, b))


def estimator_moments(stats, target=None):
    """Exact mean and second moment of the clamped Gaussian-limit estimator."""
    A, B, a, b = stats.A, stats.B, stats.a, stats.b
    if A < 0:
        raise ValueError("A must be >= 0")
    scale2 = max(abs(B - a), abs(b - B), b - a) ** 2
    if A == 0:
        mean = float(np.clip(B, a, b))
        second = mean ** 2
    elif A > 1e12 * scale2:
        # flat-Gaussian limit; the direct formulas cancel O(sqrt(A)) terms
        s = np.sqrt(2.0 * A)
        mean = 0.5 * (a + b) + ((B - a) ** 2 - (b - B) ** 2) / (2 * np.sqrt(np.pi) * s)
        second = 0.5 * (a ** 2 + b ** 2) + (
            B ** 2 * (b - a) - a ** 2 * (B - a) - b ** 2 * (b - B)
            - ((B - a) ** 3 + (b - B) ** 3) / 6.0) / (np.sqrt(np.pi) * s)
    else:
        # regrouped with erfc so extreme bounds do not cancel catastrophically
        s = np.sqrt(2.0 * A)
        xa, xb = (B - a) / s, (b - B) / s
        ea, eb = erf(xa), erf(xb)
        ca, cb = erfc(xa), erfc(xb)
        ga, gb = np.exp(-xa ** 2), np.exp(-xb ** 2)
        pref = np.sqrt(A / (2 * np.pi))
        mean = 0.5 * B * (ea + eb) + 0.5 * a * ca + 0.5 * b * cb + pref * (ga - gb)
        second = (0.5 * (A + B ** 2) * (ea + eb)
                  + 0.5 * a ** 2 * ca + 0.5 * b ** 2 * cb
                  + pref * (ga * (B + a) - gb * (B + b)))
    out = {"mean": float(mean), "second_moment": float(second),
           "variance": float(second - mean ** 2)}
    if target is not None:
        out["mse"] = out["variance"] + (out["mean"] - target) ** 2
    return out


def mse(stats, target):
    return estimator_moments(stats, target)["mse"]


# ---------------------------------------------------------------------------
# mu optimization, sampling, protocol driver
# ---------------------------------------------------------------------------

def optimize_mu(rho_targ, channel, g, observable, N, a=0.0, b=1.0, g_prime=None,
                target=None, grid_size=64, mu_range=(0.02, 0.995), refine_tol=1e-4):
    """Minimize the analytic MSE over mu by grid scan plus golden-section refinement.

    Uses the ideal target state and noiseless probabilities (protocol step:
    the search never sees gadget noise).  Returns (mu_opt, landscape).
    """
    if g <= 1:
        raise ValueError("mu optimization requires g > 1")
    if target is None:
        target = observable.expectation(np.asarray(rho_targ, dtype=complex))
    if g_prime is None:
        g_prime = matched_g_prime(g, channel)
    # log-spaced toward both endpoints: the divergences sit at 0 and 1
    half = grid_size // 2
    grid = np.unique(np.concatenate([
        np.geomspace(mu_range[0], 0.5, half),
        1.0 - np.geomspace(1.0 - mu_range[1], 0.5, grid_size - half)[::-1],
    ]))
    back_ops = propagate_observable_back(channel, g_prime, observable)

    def dval(mu):
        try:
            table = _table_from_back_ops(rho_targ, g, mu, g_prime, observable, back_ops)
        except (CutoffError, ConfigError):
            return np.inf
        return mse(stats_from_table(table, N, a, b), target)

    landscape = [(float(m), dval(m)) for m in grid]
    finite = [(m, D) for m, D in landscape if np.isfinite(D)]
    if not finite:
        raise CutoffError("MSE landscape is infinite everywhere; cutoff too small")
    i = int(np.argmin([D for _, D in landscape]))
    lo = grid[max(0, i - 1)]
    hi = grid[min(len(grid) - 1, i + 1)]
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    c = hi - invphi * (hi - lo)
    d_ = lo + invphi * (hi - lo)
    fc, fd = dval(c), dval(d_)
    while hi - lo > refine_tol:
        if fc < fd:
            hi, d_, fd = d_, c, fc
            c = hi - invphi * (hi - lo)
            fc = dval(c)
        else:
            lo, c, fc = c, d_, fd
            d_ = lo + invphi * (hi - lo)
            fd = dval(d_)
    mu_opt = 0.5 * (lo + hi)
    return float(mu_opt), landscape


def sample_pec(table, N, seed):
    """One multinomial sample of size N over the flattened p_kl; returns nu_kl."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    counts = rng.multinomial(int(N), table.probs.ravel())
    return counts.reshape(table.probs.shape) / float(N)


def pec_estimate(table, freqs, a, b, renormalize=True):
    """Constrained PEC estimate from observed frequencies.

    With ``renormalize`` the overall quasi-weight scale N_{g_mu} is
    re-estimated from the same data so that the identity observable would
    read exactly 1 (the complete-basis normalization pass).
    """
    w_tilde = table.weights / table.norm_gmu
    raw = float(np.sum(np.outer(table.weights, table.values) * freqs))
    if renormalize:
        denom = float(w_tilde @ freqs.sum(axis=1))
        if denom <= 0:
            return constrained_estimate(b if table.B > b else a, a, b)
        raw = float(np.sum(np.outer(w_tilde, table.values) * freqs)) / denom
    return constrained_estimate(raw, a, b)


def max_success_prob(g, mu_opt):
    """Best-case success probability of the probabilistic amplification, (g/mu)^-2."""
    return float((g / mu_opt) ** -2)


def hybrid_success_prob(g, mu_opt, p_k, p_vmz_k):
    """Hybrid gadget+interferometer success: (g/mu)^-2 sum_k p_k p_vmz_k."""
    return float((g / mu_opt) ** -2 * np.sum(np.asarray(p_k) * np.asarray(p_vmz_k)))


def run_psgpec(rho_in, channel, g, observable, N, seed, mu="auto", g_prime=None,
               a=0.0, b=1.0, psgn=None, target=None, grid_size=64):
    """End-to-end protocol: mu optimization, sampling, normalization, estimate."""
    landscape = None
    if mu == "auto":
        mu, landscape = optimize_mu(rho_in, channel, g, observable, N,
                                    a=a, b=b, g_prime=g_prime, target=target,
                                    grid_size=grid_size)
    table = outcome_probabilities(rho_in, channel, g, mu, g_prime, observable, psgn=psgn)
    freqs = sample_pec(table, N, seed)
    estimate = pec_estimate(table, freqs, a, b, renormalize=True)
    ideal_table = table if psgn is None else \
        outcome_probabilities(rho_in, channel, g, mu, g_prime, observable)
    result = {
        "estimate": estimate,
        "B": ideal_table.B,
        "A": ideal_table.A(N),
        "mu_opt": float(mu),
        "p_succ_max": max_success_prob(g, mu),
        "landscape": [{"mu": m, "D": D} for m, D in landscape] if landscape else None,
        "seed": seed,
    }
    if psgn is not None:
        # analytic noisy asymptote: plug-in probabilities with the data-free
        # normalization condition <1> = 1
        w_tilde = table.weights / table.norm_gmu
        denom = float(w_tilde @ table.subtraction_marginal)
        result["B_noisy"] = float(
            np.sum(np.outer(w_tilde, table.values) * table.probs) / denom)
    return result
