import numpy as np
import pytest

from bosonmit import fock


def test_ladder_entries_and_commutator():
    a, adag, num = fock.ladder_ops(3)
    assert a[1, 2] == pytest.approx(np.sqrt(2))
    comm = a @ adag - adag @ a
    assert np.allclose(comm[:2, :2], np.eye(2))
    # number expectation on |5> at dim 16
    _, _, num16 = fock.ladder_ops(16)
    ket = fock.fock_state(5, 16)
    assert np.real(ket.conj() @ num16 @ ket) == pytest.approx(5.0)


@pytest.mark.parametrize("dim", [4, 16, 40, 80])
def test_commutator_guarded(dim):
    a, adag, _ = fock.ladder_ops(dim)
    comm = a @ adag - adag @ a
    g = dim - 1
    assert np.max(np.abs(comm[:g - 1, :g - 1] - np.eye(dim)[:g - 1, :g - 1])) <= 1e-12


def test_ladder_rejects_dim_1():
    with pytest.raises(ValueError):
        fock.ladder_ops(1)


def test_coherent_vacuum_and_amplitude():
    assert np.allclose(fock.coherent_state(0.0, 5), fock.fock_state(0, 5))
    amps = fock.coherent_state(1.0, 30)
    assert amps[1] == pytest.approx(np.exp(-0.5), abs=1e-12)


def test_coherent_mean_photon():
    # oracle: direct sum n |amps_n|^2 at generous cutoff
    amps = fock.coherent_state(2.0, 40)
    assert np.sum(np.arange(40) * np.abs(amps) ** 2) == pytest.approx(4.0, abs=1e-6)


def test_coherent_tail_guard():
    with pytest.raises(fock.CutoffError) as exc:
        fock.coherent_state(4.0, 20)
    assert exc.value.required_dim >= 32
    assert fock.coherent_tail_mass(1.0, 30) < 1e-8


def test_displacement_matches_coherent():
    al = 0.6 - 0.4j
    D = fock.displacement(al, 40)
    assert np.linalg.norm(D[:, 0] - fock.coherent_state(al, 40)) < 1e-8


def test_rotation_is_fourier_at_half_pi():
    R = fock.rotation(np.pi / 2, 6)
    assert np.allclose(np.diag(R), 1j ** np.arange(6))


def test_gain_on_coherent():
    # g^{a^dag a}|alpha> prop |g alpha> with norm^2 e^{(g^2-1)|alpha|^2}
    g, al, dim = 1.2, 1.1, 50
    vec = fock.gain(g, dim) @ fock.coherent_state(al, dim)
    norm2 = np.linalg.norm(vec) ** 2
    assert norm2 == pytest.approx(np.exp((g ** 2 - 1) * abs(al) ** 2), rel=1e-8)
    assert np.linalg.norm(vec / np.linalg.norm(vec) - fock.coherent_state(g * al, dim)) < 1e-8


@pytest.mark.parametrize("kind,params", [
    ("displacement", {"alpha": 0.5 + 0.2j}),
    ("squeeze", {"z": 0.3}),
    ("rotation", {"phi": 1.1}),
])
def test_gaussian_unitarity_guarded(kind, params):
    U = fock.gaussian_ops(kind, 48, **params)
    assert fock.unitarity_defect(U) <= 1e-8


def test_position_coeffs_values():
    psi = fock.position_coeffs(0.0, 8)
    assert psi[0].real == pytest.approx(np.pi ** -0.25, abs=1e-12)
    assert abs(psi[1]) < 1e-14


def test_position_coeffs_convergence():
    # regularized completeness sum stable under dim growth once e^{-eps n}
    # has decayed; at eps = 0.01 that takes dims in the thousands
    def reg_sum(dim, x=1.0, eps=0.01):
        psi = fock.position_coeffs(x, dim).real
        return np.sum(psi ** 2 * np.exp(-eps * np.arange(dim)))
    assert reg_sum(1600) == pytest.approx(reg_sum(1610), abs=1e-6)


def test_tensor_and_partial_trace():
    rho = fock.dm(fock.coherent_state(0.9, 12))
    anc = fock.dm(fock.fock_state(0, 12))
    joint = fock.tensor(rho, anc)
    assert np.trace(joint).real == pytest.approx(1.0)
    back = fock.partial_trace(joint, [12, 12], 0)
    assert np.max(np.abs(back - rho)) < 1e-12
    # two-mode coherent product
    al, be = 0.7, -0.4 + 0.5j
    joint = fock.dm(fock.tensor(fock.coherent_state(al, 12), fock.coherent_state(be, 12)))
    keep1 = fock.partial_trace(joint, [12, 12], 1)
    assert np.max(np.abs(keep1 - fock.dm(fock.coherent_state(be, 12)))) < 1e-10


def test_partial_trace_three_modes():
    kets = [fock.coherent_state(0.3, 5), fock.fock_state(1, 4), fock.coherent_state(0.2j, 6)]
    joint = fock.dm(fock.tensor(*kets))
    mid = fock.partial_trace(joint, [5, 4, 6], 1)
    assert np.max(np.abs(mid - fock.dm(kets[1]))) < 1e-12


def test_state_metrics():
    ket = fock.coherent_state(1.0, 30)
    m = fock.state_metrics(fock.dm(ket), ket)
    assert m["fidelity"] == pytest.approx(1.0, abs=1e-12)
    assert fock.fidelity(fock.fock_state(0, 10), fock.fock_state(1, 10)) == 0.0
    # |<0|alpha>|^2 = e^{-|alpha|^2}
    f = fock.fidelity(fock.dm(fock.fock_state(0, 30)), fock.coherent_state(1.0, 30))
    assert f == pytest.approx(np.exp(-1.0), abs=1e-9)


def test_metrics_dim_mismatch():
    with pytest.raises(ValueError):
        fock.fidelity(fock.fock_state(0, 4), fock.fock_state(0, 5))


def test_fuchs_van_de_graaf():
    rng = np.random.default_rng(7)
    d = 8
    for _ in range(100):
        ket = rng.normal(size=d) + 1j * rng.normal(size=d)
        ket /= np.linalg.norm(ket)
        mixed = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        mixed = mixed @ mixed.conj().T
        mixed /= np.trace(mixed).real
        F = fock.fidelity(mixed, ket)
        T = fock.trace_distance(mixed, ket)
        assert 1 - F <= T + 1e-10
        assert T <= np.sqrt(1 - F) + 1e-10


def test_wigner_vacuum_and_fock1():
    xs = np.linspace(-4, 4, 41)
    g = fock.wigner_grid(fock.dm(fock.fock_state(0, 56)), xs, xs)
    # oracle: Gaussian closed form e^{-x^2-p^2}/pi
    X, P = np.meshgrid(xs, xs, indexing="ij")
    assert np.max(np.abs(g.values - np.exp(-X ** 2 - P ** 2) / np.pi)) < 1e-6
    assert g.values[20, 20] == pytest.approx(1 / np.pi, abs=1e-10)
    assert g.mass == pytest.approx(1.0, abs=1e-6)
    g1 = fock.wigner_grid(fock.dm(fock.fock_state(1, 56)), xs, xs)
    assert g1.values[20, 20] == pytest.approx(-1 / np.pi, abs=1e-10)
    assert g1.mass == pytest.approx(1.0, abs=1e-4)


def test_wigner_squeezed_matches_closed_form():
    r = 0.4
    xs = np.linspace(-4, 4, 31)
    ket = fock.squeeze(r, 56)[:, 0]
    g = fock.wigner_grid(fock.dm(ket), xs, xs)
    X, P = np.meshgrid(xs, xs, indexing="ij")
    target = np.exp(-X ** 2 * np.exp(2 * r) - P ** 2 * np.exp(-2 * r)) / np.pi
    assert np.max(np.abs(g.values - target)) < 1e-6


def test_wigner_coverage_warning():
    g = fock.wigner_grid(fock.dm(fock.coherent_state(2.0, 40)), np.linspace(-1, 1, 11), np.linspace(-1, 1, 11))
    assert g.warning is not None


def test_phase_space_grid_csv(tmp_path):
    xs = np.linspace(-1, 1, 3)
    g = fock.wigner_grid(fock.dm(fock.fock_state(0, 24)), xs, xs)
    path = tmp_path / "w.csv"
    g.to_csv(path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "x,p,w"
    assert len(lines) == 1 + 9
    # row-major, x outer: second row is (x0, p1)
    row = lines[2].split(",")
    assert float(row[0]) == -1.0 and float(row[1]) == 0.0


def test_two_mode_unitary_mode_map():
    U2 = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    UM = fock.two_mode_unitary(U2, 20)
    assert fock.unitarity_defect(UM, dim_guard=20 * 20) <= 1e-10
    al = 0.8
    out = UM @ fock.tensor(fock.coherent_state(al, 20), fock.fock_state(0, 20))
    tgt = fock.tensor(fock.coherent_state(al * U2[0, 0], 20),
                      fock.coherent_state(al * U2[1, 0], 20))
    assert np.linalg.norm(out - tgt) < 1e-8


def test_two_mode_apply_matches_dense():
    rng = np.random.default_rng(3)
    U2 = np.array([[0.6, 0.8j], [0.8j, 0.6]])
    psi = rng.normal(size=(10, 10)) + 1j * rng.normal(size=(10, 10))
    psi /= np.linalg.norm(psi)
    dense = (fock.two_mode_unitary(U2, 10) @ psi.reshape(-1)).reshape(10, 10)
    assert np.linalg.norm(fock.two_mode_apply(U2, psi) - dense) < 1e-10


def test_project_psd_logs_clipped_mass():
    rho = np.diag([1.05, -0.05]).astype(complex)
    fixed, clipped = fock.project_psd(rho)
    assert clipped == pytest.approx(0.05)
    assert np.min(np.linalg.eigvalsh(fixed)) >= 0
    assert np.trace(fixed).real == pytest.approx(1.0)
