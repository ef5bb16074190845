import itertools

import numpy as np
import pytest

from purisim import oracle
from purisim.bell import (ALL_LABELS, BICNOT_TABLE, PARITY_TABLE, PHI_MINUS, PHI_PLUS, PSI_MINUS, PSI_PLUS,
                          RATE_ORDER, Basis, BellLabel, bicnot_x, bicnot_z, is_good, parity,
                          pauli_frame_after_local_measure)


def dense_parity(label, basis):
    """Parity read off the dense local measurement: 0 or 1 with certainty."""
    state = oracle.DenseState.bell_product([label])
    p_odd = sum(b.probability for b in oracle.measure_local(state, 0, basis) if b.outcome[0] ^ b.outcome[1])
    assert p_odd == pytest.approx(round(p_odd), abs=1e-12)
    return int(round(p_odd))


def test_codes_and_names():
    assert [lab.code for lab in ALL_LABELS] == [0, 1, 2, 3]
    assert BellLabel.from_code(3) == PSI_MINUS
    assert PHI_PLUS.name == "phi+"
    assert RATE_ORDER == (PHI_PLUS.code, PSI_PLUS.code, PSI_MINUS.code, PHI_MINUS.code)


@pytest.mark.parametrize("label", ALL_LABELS)
@pytest.mark.parametrize("basis", list(Basis))
def test_parity_matches_dense_measurement(label, basis):
    assert parity(label, basis) == dense_parity(label, basis)
    assert PARITY_TABLE[basis][label.code] == parity(label, basis)


def test_phi_plus_has_even_parity_everywhere():
    assert all(parity(PHI_PLUS, b) == 0 for b in Basis)
    assert is_good(PHI_PLUS) and not is_good(PSI_MINUS)


def test_per_basis_error_map():
    # which rate components show up as parity-1 in each basis (rate order I, x, y, z)
    order = [BellLabel.from_code(c) for c in RATE_ORDER]
    ones = {b.value: {("I", "x", "y", "z")[n] for n, lab in enumerate(order) if parity(lab, b)} for b in Basis}
    assert ones == {"Z": {"x", "y"}, "X": {"z", "y"}, "Y": {"x", "z"}}


@pytest.mark.parametrize("basis, fn", [("Z", bicnot_z), ("X", bicnot_x)])
def test_bicnot_matches_dense_oracle(basis, fn):
    for c, d in itertools.product(ALL_LABELS, repeat=2):
        rho = oracle.apply_bicnot(oracle.DenseState.bell_product([c, d]), 0, 1, basis)
        expect = oracle.DenseState.bell_product(list(fn(c, d)))
        assert np.allclose(oracle.in_bell_basis(rho), oracle.in_bell_basis(expect), atol=1e-12)


@pytest.mark.parametrize("basis", ["Z", "X"])
def test_bicnot_is_an_involution_and_table_agrees(basis):
    fn = bicnot_z if basis == "Z" else bicnot_x
    ctrl, dest = BICNOT_TABLE[Basis(basis)]
    for c, d in itertools.product(ALL_LABELS, repeat=2):
        assert fn(*fn(c, d)) == (c, d)
        assert (ctrl[4 * c.code + d.code], dest[4 * c.code + d.code]) == tuple(x.code for x in fn(c, d))


def test_phi_minus_pair_under_z_bicnot():
    # two phase errors on a Z group: the control stays phi- (no bit error) and the destination reads even
    c, d = bicnot_z(PHI_MINUS, PHI_MINUS)
    assert c == PHI_PLUS and parity(d, "Z") == 0


def test_local_frame_is_uniform_and_consistent():
    for lab, basis in itertools.product(ALL_LABELS, Basis):
        frame = pauli_frame_after_local_measure(lab, basis)
        assert sum(frame.values()) == pytest.approx(1.0)
        assert all(a ^ b == parity(lab, basis) for a, b in frame)
