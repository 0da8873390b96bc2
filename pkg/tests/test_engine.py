import io

import numpy as np
import pytest

from reference import events_match, reference_decimate
from sdrg.engine import ActiveChain, DecimationError, DecimationHistory, SingletEvent, TrioEvent, decimate, init_chain
from sdrg.spin_model import SPIN_HALF, SPIN_ONE, SPIN_THREE_HALVES, Explicit, ModelKind, PowerLaw

H, B = ModelKind.HEISENBERG, ModelKind.BIQUADRATIC


def test_init_chain_explicit():
    chain = init_chain(4, H, SPIN_HALF, Explicit((0.1, 1.0, 0.2)))
    assert chain.n_active == 4
    assert [b.strength for b in chain.bonds] == [0.1, 1.0, 0.2]


def test_init_chain_power_law():
    chain = init_chain(200_000, H, SPIN_HALF, PowerLaw(-0.8), np.random.default_rng(0))
    j = np.array([b.strength for b in chain.bonds])
    assert j.size == 199_999 and j.min() > 0 and j.max() <= 1


def test_init_chain_parity():
    with pytest.raises(ValueError):
        init_chain(3, H, SPIN_HALF, Explicit((0.1, 0.2)))


@pytest.mark.parametrize("couplings,left", [((0.1, 1.0, 0.2), 1), ((0.5, 0.5, 0.1), 0), ((0.3,), 0)])
def test_find_strongest_bond(couplings, left):
    bond = ActiveChain(couplings, H, SPIN_HALF).find_strongest_bond()
    assert bond.left == left and bond.strength == max(couplings)


def test_singlet_step():
    chain = ActiveChain([0.1, 1.0, 0.2], H, SPIN_HALF)
    ev = chain.step()
    assert isinstance(ev, SingletEvent)
    assert (ev.a, ev.b) == ((2,), (3,))
    assert ev.new_coupling == pytest.approx(0.01, rel=1e-15)
    assert [s.constituents for s in chain.sites] == [(1,), (4,)]
    assert chain.bonds[0].strength == pytest.approx(0.01, rel=1e-15)


def test_trio_step():
    chain = ActiveChain([0.9, 1.0, 0.2], H, SPIN_ONE)
    ev = chain.step()
    assert isinstance(ev, TrioEvent)
    assert ev.members == ((1,), (2,), (3,)) and ev.edge
    (site,) = [s for s in chain.sites if len(s.constituents) == 3]
    assert site.spin == SPIN_ONE and site.constituents == (1, 2, 3)
    hist = chain.run_to_completion()
    assert hist.pairs() == [((1, 2, 3), (4,))]


def test_biquadratic_only_singlets():
    rng = np.random.default_rng(1)
    for _ in range(50):
        hist = decimate(0.7 + 0.3 * rng.random(20 - 1), B, SPIN_ONE)
        assert hist.n_trios == 0 and hist.n_singlets == 10


def test_hand_traced_history():
    hist = decimate([0.1, 1.0, 0.2], H, SPIN_HALF)
    assert hist.pairs() == [((2,), (3,)), ((1,), (4,))]
    assert decimate([0.4], H, SPIN_HALF).pairs() == [((1,), (2,))]


def test_step_on_empty_chain():
    chain = ActiveChain([0.4], H, SPIN_HALF)
    chain.step()
    with pytest.raises(DecimationError):
        chain.step()
    with pytest.raises(DecimationError):
        chain.find_strongest_bond()


def test_heap_matches_scan_at_every_step():
    rng = np.random.default_rng(2)
    for spin in (SPIN_HALF, SPIN_ONE):
        for _ in range(100):
            n = 2 * int(rng.integers(1, 33))
            chain = ActiveChain((1 - rng.random(n - 1)) ** 5, H, spin)
            while chain.n_active:
                bonds = chain.bonds
                j = [b.strength for b in bonds]
                best = bonds[int(np.argmax(j))]
                got = chain.find_strongest_bond()
                assert (got.left, got.strength) == (best.left, best.strength)
                chain.step()


@pytest.mark.parametrize("spin", [SPIN_HALF, SPIN_ONE, SPIN_THREE_HALVES])
def test_against_brute_force_decimation(spin):
    rng = np.random.default_rng(spin.twice_s)
    for _ in range(200):
        n = 2 * int(rng.integers(1, 40))
        j = (1 - rng.random(n - 1)) ** 5
        got = decimate(j, H, spin).events
        want = reference_decimate(j, H, spin)
        assert events_match(got, want)
        if spin == SPIN_HALF:
            assert got == want


def test_ties_follow_chain_order():
    j = [0.5, 0.5, 0.5, 0.5, 0.5]
    assert decimate(j, H, SPIN_HALF).events == reference_decimate(j, H, SPIN_HALF)


@pytest.mark.parametrize("spin", [SPIN_HALF, SPIN_ONE, SPIN_THREE_HALVES])
def test_history_partitions_sites(spin):
    rng = np.random.default_rng(4)
    for _ in range(20):
        n = 2 * int(rng.integers(1, 500))
        hist = decimate((1 - rng.random(n - 1)) ** 5, H, spin)
        assert hist.n_singlets + 2 * hist.n_trios == n // 2 + hist.n_trios
        flat = np.sort(hist.partner_flat)
        np.testing.assert_array_equal(flat, np.arange(1, n + 1))
        assert np.all(hist.partner_sizes % 2 == 1)
        # every active site removal is an even count
        assert 2 * len(hist) == n


def test_singlet_omegas_never_rise_without_trios():
    rng = np.random.default_rng(8)
    hist = decimate((1 - rng.random(9999)) ** 5, H, SPIN_HALF)
    assert np.all(np.diff(hist.omegas) <= 0) and hist.omega_increases == 0


def test_deterministic():
    j = (1 - np.random.default_rng(3).random(999)) ** 5
    a = decimate(j, H, SPIN_THREE_HALVES)
    b = decimate(j, H, SPIN_THREE_HALVES)
    assert a.events == b.events


def test_jsonl_round_trip():
    j = (1 - np.random.default_rng(6).random(199)) ** 5
    hist = decimate(j, H, SPIN_ONE)
    buf = io.StringIO()
    hist.write_jsonl(buf)
    buf.seek(0)
    back = DecimationHistory.read_jsonl(buf)
    assert back.events == hist.events
    np.testing.assert_array_equal(back.partner_flat, hist.partner_flat)
    np.testing.assert_array_equal(back.partner_sizes, hist.partner_sizes)
    assert back.n_trios == hist.n_trios and back.edge_trios == hist.edge_trios


def test_rejects_bad_couplings():
    with pytest.raises(ValueError):
        ActiveChain([0.1, -0.2, 0.3], H, SPIN_HALF)
    with pytest.raises(ValueError):
        ActiveChain([0.1, 0.2, 0.3], B, SPIN_HALF)
