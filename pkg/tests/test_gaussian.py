import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import block_diag

from optomech.errors import PhysicalityError
from optomech.gaussian import (BipartiteBlocks, en_upper_bound, eta_minus, log_negativity,
                               log_negativity_modes, log_negativity_partition, occupancy,
                               random_physical_cm, simon_criterion, swap_fidelity,
                               tripartite_class, two_mode_squeezed)
from optomech.lyapunov import steady_state_cm, symplectic_eigenvalues
from optomech.model import single_mode_model

from conftest import N0_P0


def rot(phi):
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s], [s, c]])


def squeeze(z):
    return np.diag([math.exp(z), math.exp(-z)])


def test_blocks_reassemble():
    V = random_physical_cm(3, np.random.default_rng(0))
    V = 0.5 * (V + V.T)
    b = BipartiteBlocks.from_cm(V, 0, 2)
    sub = V[np.ix_([0, 1, 4, 5], [0, 1, 4, 5])]
    np.testing.assert_array_equal(b.matrix(), sub)


def test_vacua_are_separable():
    b = BipartiteBlocks.from_cm(0.5 * np.eye(4))
    assert eta_minus(b) == pytest.approx(0.5) and log_negativity(b) == 0
    assert not simon_criterion(b)


@pytest.mark.parametrize("r", [0.3, 0.5, 1.0])
def test_two_mode_squeezed_negativity(r):
    # partial transpose of a squeezed vacuum has eta_minus = exp(-2r)/2
    b = BipartiteBlocks.from_cm(two_mode_squeezed(r))
    assert log_negativity(b) == pytest.approx(2 * r, abs=1e-9)
    assert simon_criterion(b)


def test_simon_matches_negativity_on_random_states():
    rng = np.random.default_rng(2024)
    verdicts = []
    for _ in range(200):
        b = BipartiteBlocks.from_cm(random_physical_cm(2, rng, max_squeeze=0.8, max_thermal=0.6))
        verdicts.append(simon_criterion(b))
        assert simon_criterion(b) == (log_negativity(b) > 0) == (eta_minus(b) < 0.5)
    assert 20 < sum(verdicts) < 180


def test_pairwise_matches_partition_formula():
    rng = np.random.default_rng(5)
    for _ in range(50):
        V = random_physical_cm(2, rng)
        assert log_negativity_modes(V, 0, 1) == pytest.approx(log_negativity_partition(V, [0]),
                                                              abs=1e-9)


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), a=st.floats(0, 6.3), b=st.floats(0, 6.3),
       z1=st.floats(-1, 1), z2=st.floats(-1, 1))
def test_negativity_invariant_under_local_symplectics(seed, a, b, z1, z2):
    V = random_physical_cm(2, np.random.default_rng(seed))
    S = block_diag(rot(a) @ squeeze(z1), squeeze(z2) @ rot(b))
    e0 = log_negativity_modes(V, 0, 1)
    e1 = log_negativity_modes(S @ V @ S.T, 0, 1)
    assert abs(e0 - e1) < 1e-9


def test_occupancy_of_ground_and_thermal_states():
    assert occupancy(0.5 * np.eye(2)) == (0.0, 1.0)
    n, ratio = occupancy(np.diag([0.5, 0.5, 7.5, 7.5]), 1)
    assert n == pytest.approx(7.0) and ratio == 1.0
    with pytest.raises(PhysicalityError):
        occupancy(np.diag([0.2, 0.2]))


def test_equipartition_fails_near_threshold():
    # Delta = kappa = omega_m, threshold at G = sqrt(2)
    far = occupancy(steady_state_cm(single_mode_model(0.3, 1, 1, 1e-5, N0_P0)))[1]
    near = occupancy(steady_state_cm(single_mode_model(1.41, 1, 1, 1e-5, N0_P0)))[1]
    assert abs(far - 1) < 0.05 and near > 10


def test_intracavity_negativity_grows_toward_threshold():
    en = [log_negativity_modes(steady_state_cm(single_mode_model(G, 1, 1, 1e-5, N0_P0)), 0, 1)
          for G in np.linspace(0.3, 1.41, 12)]
    assert en[0] < en[-1] and np.all(np.diff(en) > 0) and en[-1] > 0.3


def test_tripartite_vacuum_is_ppt():
    rep = tripartite_class(0.5 * np.eye(6))
    assert rep.n_npt == 0 and rep.label == "PPT in every bipartition"


def test_tripartite_pair_plus_vacuum():
    V = block_diag(two_mode_squeezed(1.0), 0.5 * np.eye(2))
    rep = tripartite_class(V)
    assert rep.npt == {0: True, 1: True, 2: False}
    assert rep.label == "one-mode biseparable"
    assert rep.eta_minus[0] == pytest.approx(math.exp(-2) / 2)


def test_tripartite_three_mode_entangled_state():
    # beam-split one arm of a two-mode squeezed state
    V = block_diag(two_mode_squeezed(0.8), 0.5 * np.eye(2))
    c = s = 1 / math.sqrt(2)
    S = np.eye(6)
    S[2:, 2:] = np.kron(np.array([[c, s], [-s, c]]), np.eye(2))
    rep = tripartite_class(S @ V @ S.T)
    assert rep.label == "fully tripartite-entangled"


def test_fidelity_closed_cases():
    assert swap_fidelity(0.5 * np.eye(2), 0.5 * np.eye(2)) == pytest.approx(1.0)
    assert swap_fidelity(0.5 * np.eye(2), 1.5 * np.eye(2)) == pytest.approx(0.5)
    for n in (0.3, 4.0):
        assert swap_fidelity(0.5 * np.eye(2), (n + 0.5) * np.eye(2)) == pytest.approx(1 / (n + 1))


def test_fidelity_symmetric_and_only_one_for_equal_pure_states():
    rng = np.random.default_rng(8)
    for _ in range(30):
        A, B = (random_physical_cm(1, rng) for _ in range(2))
        assert swap_fidelity(A, B) == pytest.approx(swap_fidelity(B, A), rel=1e-12)
        assert swap_fidelity(A, B) < 1
    P = squeeze(0.4) @ (0.5 * np.eye(2)) @ squeeze(0.4)
    assert swap_fidelity(P, P) == pytest.approx(1.0, abs=1e-12)
    assert swap_fidelity(P, 0.5 * np.eye(2)) < 1 - 1e-3


def test_mirror_field_fidelity_drops_with_decay_rate():
    best = []
    for k in (0.2, 0.5, 1.0, 2.0):
        fs = []
        for G in np.linspace(0.05, 1.4, 60):
            try:
                V = steady_state_cm(single_mode_model(G, 1.0, k, 1e-5, N0_P0))
            except Exception:
                continue
            fs.append(swap_fidelity(V.block(0, 0), V.block(1, 1)))
        best.append(max(fs))
    assert best[0] > 0.9 and np.all(np.diff(best) < 0)


def test_bound_closed_values():
    k, g = 0.1, 1e-5
    assert en_upper_bound(math.sqrt(2 * k * g), k, g, 0.0) == pytest.approx(math.log(2))
    for n0 in (1.0, 3.0, 100.0):
        assert en_upper_bound(math.sqrt(2 * k * g), k, g, n0) <= 0


def test_random_states_are_physical():
    rng = np.random.default_rng(1)
    for m in (1, 2, 3):
        for _ in range(20):
            assert symplectic_eigenvalues(random_physical_cm(m, rng))[0] >= 0.5 - 1e-12


def rwa_negativity(G, kappa, gamma_m, n0):
    """Closed-form steady state of the resonant down-conversion model.

    h = G/2; the state is phase-insensitive with occupancies n_a, n_b and
    correlator |<ab>| = mu.
    """
    h, x = G / 2, gamma_m / 2
    s = h * h / (kappa * x)
    mu = h * (n0 + 1) / ((kappa + x) * (1 - s))
    na, nb = h * mu / kappa, n0 + h * mu / x
    eta = 0.5 * ((na + nb + 1) - math.sqrt((na - nb) ** 2 + 4 * mu * mu))
    return max(0.0, -math.log(2 * eta))


BLUE = dict(kappa=0.1, gamma_m=1e-4)


@pytest.mark.parametrize("n0", [0.0, 1.0, 5.0, 500.0])
@pytest.mark.parametrize("frac", [0.2, 0.7, 0.99])
def test_blue_sideband_matches_down_conversion_closed_form(n0, frac):
    k, g = BLUE["kappa"], BLUE["gamma_m"]
    G = frac * math.sqrt(2 * k * g)
    en = log_negativity_modes(steady_state_cm(single_mode_model(G, -1.0, k, g, n0)), 0, 1)
    assert en == pytest.approx(rwa_negativity(G, k, g, n0), rel=5e-3, abs=1e-7)


def test_blue_sideband_bound_holds_to_leading_order():
    # exact threshold for any entanglement is n0 = 2 kappa / gamma_m; below it
    # E_N exceeds the clamped bound by at most O(gamma_m / kappa)
    k, g = BLUE["kappa"], BLUE["gamma_m"]
    Gth = math.sqrt(2 * k * g)
    for n0 in (0.0, 0.5, 1.0, 3.0, 100.0, 2 * k / g, 3e3):
        for frac in np.linspace(0.05, 0.99, 12):
            G = frac * Gth
            en = log_negativity_modes(steady_state_cm(single_mode_model(G, -1.0, k, g, n0)), 0, 1)
            assert en <= max(0.0, en_upper_bound(G, k, g, n0)) + g / k
            if n0 >= 2 * k / g:
                assert en < 1e-6
