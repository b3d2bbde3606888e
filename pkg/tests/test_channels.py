import numpy as np
import pytest

from bosonmit import fock, channels as ch


def test_loss_special_cases():
    assert len(ch.loss_channel(0.0, 10).kraus) == 1
    lo = ch.loss_channel(0.3, 10)
    assert lo.completeness_deficit <= 1e-10
    # coherent state transmission
    rho = fock.dm(fock.coherent_state(1.2, 40))
    out = ch.loss_channel(0.36, 40).apply(rho)
    assert fock.fidelity(out, fock.coherent_state(1.2 * 0.8, 40)) == pytest.approx(1.0, abs=1e-10)


def test_loss_on_fock2_binomial_statistics():
    # oracle: binomial loss statistics C(2,k) mu^k (1-mu)^{2-k}
    out = ch.loss_channel(0.3, 10).apply(fock.dm(fock.fock_state(2, 10)))
    assert np.allclose(np.real(np.diag(out)[:3]), [0.09, 0.42, 0.49], atol=1e-12)


def test_amp_special_cases():
    assert ch.amp_channel(1.0, 12).completeness_deficit <= 1e-12
    out = ch.amp_channel(1.4, 60).apply(fock.dm(fock.fock_state(0, 60)))
    # amplified vacuum is thermal with mean G-1
    assert fock.mean_photon(out) == pytest.approx(0.4, abs=1e-8)


def test_thermal_reduces_to_loss():
    d = ch.superop_distance(ch.thermal_channel(0.2, 0.0, 24), ch.loss_channel(0.2, 24))
    assert d <= 1e-10


def test_thermal_vacuum_mean_photon():
    out = ch.thermal_channel(0.1, 0.5, 30).apply(fock.dm(fock.fock_state(0, 30)))
    assert fock.mean_photon(out) == pytest.approx(0.05, abs=1e-9)


def test_amp_after_loss_is_thermal():
    eta, nbar, dim = 0.1, 0.5, 30
    G = 1 + eta * nbar
    lhs = ch.compose(ch.loss_channel(1 - (1 - eta) / G, dim), ch.amp_channel(G, dim))
    assert ch.superop_distance(lhs, ch.thermal_channel(eta, nbar, dim)) <= 1e-12


def test_gdn_identity_route():
    # Fig-3-style parameters: sigma(0.05, 0.5) = 0.281
    sigma = ch.thermal_to_gdn_sigma(0.05, 0.5)
    assert sigma == pytest.approx(0.281, abs=5e-4)
    lhs = ch.gdn_via_amplified_thermal(0.05, 0.5, 30)
    rhs = ch.gdn_channel(sigma, 30)
    assert ch.superop_distance(lhs, rhs) <= 1e-7


@pytest.mark.parametrize("eta,nbar", [(0.02, 0.3), (0.05, 0.5), (0.08, 1.0)])
def test_gdn_factorization_triples(eta, nbar):
    sigma = ch.thermal_to_gdn_sigma(eta, nbar)
    d = ch.superop_distance(ch.gdn_via_amplified_thermal(eta, nbar, 24),
                            ch.gdn_channel(sigma, 24))
    assert d <= 1e-7


def test_gdn_zero_sigma_and_guard():
    assert ch.superop_distance(ch.gdn_channel(0.0, 10), ch.identity_channel(10)) == 0.0
    with pytest.raises(fock.CutoffError):
        ch.gdn_channel(3.0, 20)


def test_gdn_additivity_exact_on_guard():
    dim, s = 30, 0.1
    lhs = ch.compose(ch.gdn_channel(s, dim), ch.gdn_channel(s, dim))
    rhs = ch.gdn_channel(np.sqrt(2) * s, dim)
    assert ch.superop_distance(lhs, rhs, guard=18) <= 1e-9


def test_dephasing_element_action():
    dim, gamma = 12, 0.23
    chan = ch.dephasing_channel(ch.central_gaussian(gamma), dim)
    E = np.zeros((dim, dim), dtype=complex)
    E[3, 7] = 1.0
    out = chan.apply(E)
    assert out[3, 7] == pytest.approx(np.exp(-gamma * 16 / 2))
    assert ch.superop_distance(ch.dephasing_channel(ch.central_gaussian(0.0), dim),
                               ch.identity_channel(dim)) == 0.0


def test_dephasing_kraus_route_matches_elementwise():
    dim = 30
    kr = ch.dephasing_kraus(0.05, dim)
    el = ch.dephasing_channel(ch.central_gaussian(0.05), dim)
    assert kr.completeness_deficit <= 1e-10
    assert ch.superop_distance(kr, el, guard=fock.guard_dim(dim)) <= 1e-10


def test_dephasing_additivity_exact():
    dim = 24
    lhs = ch.compose(ch.dephasing_channel(ch.central_gaussian(0.03), dim),
                     ch.dephasing_channel(ch.central_gaussian(0.07), dim))
    rhs = ch.dephasing_channel(ch.central_gaussian(0.10), dim)
    assert ch.superop_distance(lhs, rhs) <= 1e-14


def test_thermal_approximate_additivity():
    dim = 30
    t1 = ch.thermal_channel(0.01, 0.5, dim)
    t12 = ch.thermal_channel(0.02, 0.5, dim)
    assert ch.superop_distance(ch.compose(t1, t1), t12) <= 0.01


def test_point_and_tabulated_dephasing():
    dim = 8
    pm = ch.dephasing_channel(ch.point_mass(0.4), dim)
    R = fock.rotation(0.4, dim)
    rho = fock.dm(fock.coherent_state(0.6, dim, guard=False))
    assert np.max(np.abs(pm.apply(rho) - R @ rho @ R.conj().T)) < 1e-14
    tab = ch.tabulated([0.0, np.pi], [0.5, 0.5])
    assert tab.moment == pytest.approx(0.0)
    chan = ch.dephasing_channel(tab, dim)
    assert abs(np.trace(chan.apply(rho)) - 1) < 1e-12


def test_angle_distribution_moments():
    assert ch.central_gaussian(0.0).moment == pytest.approx(1.0)
    g = ch.central_gaussian(0.3)
    assert g.moment == pytest.approx(np.exp(-0.15))
    assert ch.point_mass(1.2).moment == pytest.approx(np.exp(1.2j))
    assert ch.central_gaussian(np.inf).moment == pytest.approx(0.0)
    assert np.any(ch.central_gaussian(np.inf).sample(np.random.default_rng(0), 5) != 0)


def test_trace_preservation_and_positivity_random_states():
    rng = np.random.default_rng(11)
    dim = 24
    chans = [
        ch.thermal_channel(0.1, 0.5, dim),
        ch.loss_channel(0.3, dim),
        ch.gdn_channel(0.2, dim),
        ch.dephasing_channel(ch.central_gaussian(0.1), dim),
    ]
    for _ in range(5):
        ket = rng.normal(size=16) + 1j * rng.normal(size=16)
        ket = np.concatenate([ket / np.linalg.norm(ket), np.zeros(dim - 16)])
        rho = fock.dm(ket)
        for chan in chans:
            out = chan.apply(rho)
            assert abs(np.trace(out).real - 1) <= 1e-7
            assert np.min(np.linalg.eigvalsh(0.5 * (out + out.conj().T))) >= -1e-8


def test_commutation_with_dephasing():
    dim = 30
    dp = ch.dephasing_channel(ch.central_gaussian(0.05), dim)
    th = ch.thermal_channel(0.1, 0.5, dim)
    assert ch.commutation_check(dp, th) <= 1e-9
    gd = ch.gdn_channel(0.281, dim)
    assert ch.commutation_check(dp, gd) <= 1e-7
    # negative control: thermal and GDN do not commute
    assert ch.commutation_check(th, ch.gdn_channel(0.5, dim), guard=fock.guard_dim(dim)) > 1e-3


def test_superop_of_identity():
    assert np.max(np.abs(ch.identity_channel(5).superop() - np.eye(25))) == 0.0


def test_generic_superop_matches_kraus_superop():
    dim = 10
    chan = ch.thermal_channel(0.2, 0.4, dim)
    S1 = chan.superop()

    class Wrapper:  # applier without .superop
        dim = chan.dim

        def apply(self, rho):
            return chan.apply(rho)

    S2 = ch.superop_matrix(Wrapper())
    assert np.max(np.abs(S1 - S2)) < 1e-12


def test_channel_from_config():
    spec = {"kind": "thermal", "eta": 0.1, "nbar": 0.5, "dim": 12}
    chan = ch.channel_from_config(spec)
    assert chan.dim == 12
    with pytest.raises(fock.ConfigError):
        ch.channel_from_config({"kind": "nope", "dim": 4})
