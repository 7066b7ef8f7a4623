import math

import numpy as np
import pytest
from hypothesis import given, settings as hsettings, strategies as st

from qreuse.dataset import ConceptDataset, class_basis, partition, qram_init
from qreuse.errors import PreconditionError
from qreuse.oracle import OracleConfig, apply_oracle, build_oracle
from qreuse.postproc import (
    OutcomeKind,
    alpha_probabilities,
    apply_kraus,
    apply_recovery,
    build_recovery,
    consistency_probabilities,
    kraus_pair,
    measure_alpha,
    measure_beta,
    optimal_theta,
    recovery_setup,
)
from qreuse.statevec import StateVector, apply, born_probabilities, fidelity, project, tensor

from conftest import closed_p

ZERO = StateVector.basis(0, 2)
SX = np.array([[0, 1], [1, 0]])
REDUCED = class_basis(None, "reduced")


class ForcedRng:
    """Stand-in generator that forces an outcome of a two-outcome measurement."""

    def __init__(self, *uniforms):
        self.uniforms = list(uniforms)

    def random(self):
        return self.uniforms.pop(0)


def oracle_state(xi0, L, mode="reduced", n_bits=2):
    ds = ConceptDataset.from_xi0(xi0, n_bits)
    basis = class_basis(ds, mode)
    s = tensor(ZERO, tensor(ZERO, qram_init(ds, mode=mode)))
    return ds, basis, apply_oracle(s, build_oracle(OracleConfig(L), basis))


def alpha_for(xi0, L, m, mode="reduced"):
    ds, basis, s = oracle_state(xi0, L, mode)
    p0 = born_probabilities(s, 1)[0]
    u = 0.0 if m == 0 else min(1.0, p0 + (1 - p0) / 2)
    return ds, basis, measure_alpha(s, ForcedRng(u))


class TestKraus:
    def test_projective_limit(self):
        k = kraus_pair(OracleConfig(1.0), REDUCED)
        np.testing.assert_allclose(k.a0.matrix, np.diag([1, 0]))
        np.testing.assert_allclose(k.a1.matrix, np.diag([0, 1]))

    def test_no_information(self):
        k = kraus_pair(OracleConfig(0.0), REDUCED)
        np.testing.assert_allclose(k.a0.matrix, np.diag([math.sqrt(0.5)] * 2))
        np.testing.assert_allclose(k.a1.matrix, k.a0.matrix)

    def test_half(self):
        k = kraus_pair(OracleConfig(0.5), REDUCED)
        np.testing.assert_allclose(k.a0.matrix, np.diag([math.sqrt(0.75), math.sqrt(0.25)]))

    def test_eigenvalues(self):
        c = OracleConfig(0.3)
        k = kraus_pair(c, REDUCED)
        lp, lm = math.sqrt(c.lambda_plus), math.sqrt(c.lambda_minus)
        np.testing.assert_allclose(sorted(np.linalg.eigvals(k.a0.matrix).real), [lm, lp])
        np.testing.assert_allclose(np.diag(k.a1.matrix).real, [lm, lp])

    @pytest.mark.parametrize("mode", ["reduced", "full"])
    def test_complete_on_grid(self, mode):
        basis = class_basis(ConceptDataset.from_xi0(0.3, 4), mode)
        for L in np.linspace(0, 1, 11):
            assert kraus_pair(OracleConfig(float(L)), basis).completeness_defect() < 1e-10

    def test_matches_oracle_blocks(self):
        # <m| O |0> on the answer register is the Kraus operator for outcome m
        ds = ConceptDataset.from_xi0(0.6, 3)
        basis = class_basis(ds, "full")
        c = OracleConfig(0.35)
        op = build_oracle(c, basis).matrix
        n = basis.dim
        k = kraus_pair(c, basis)
        for m in (0, 1):
            np.testing.assert_allclose(np.abs(op[m * n:(m + 1) * n, :n]), np.abs(k[m].matrix), atol=1e-15)

    def test_factorization_grid(self):
        for xi0 in np.linspace(0, 1, 11):
            for L in np.linspace(0, 1, 11):
                ds = ConceptDataset.from_xi0(float(xi0))
                c = OracleConfig(float(L))
                psi0 = qram_init(ds)
                _, _, s = oracle_state(float(xi0), float(L))
                for m in (0, 1):
                    expected_p = closed_p(xi0, L)[m]
                    if expected_p < 1e-14:
                        continue
                    p, phi = apply_kraus(kraus_pair(c, REDUCED), m, psi0)
                    w, post = project(s, 1, m)
                    assert abs(p - expected_p) < 1e-10 and abs(w - p) < 1e-10
                    assert fidelity(phi, StateVector((2,), post.tensor_view()[0, m])) > 1 - 1e-10


class TestAlpha:
    def test_symmetric(self):
        part = partition(ConceptDataset.from_xi0(0.5))
        for L in (0.0, 0.4, 1.0):
            assert alpha_probabilities(OracleConfig(L), part) == pytest.approx((0.5, 0.5))

    def test_example(self, ds_07):
        assert alpha_probabilities(OracleConfig(0.5), partition(ds_07)) == pytest.approx((0.6, 0.4))

    def test_infimum_boundary(self):
        part = partition(ConceptDataset.from_xi0(0.0))
        assert alpha_probabilities(OracleConfig(1.0), part) == pytest.approx((0.0, 1.0))
        c = OracleConfig(0.4)
        assert alpha_probabilities(c, part)[0] == pytest.approx(c.lambda_minus)

    def test_post_state_example(self):
        _, _, res = alpha_for(0.7, 0.5, 0)
        assert res.m_alpha == 0 and res.probability == pytest.approx(0.6)
        np.testing.assert_allclose(np.abs(res.phi.amps), [0.935414346693, 0.353553390593], atol=1e-11)

    def test_perfect_collapse(self):
        _, _, res = alpha_for(0.4, 1.0, 0)
        np.testing.assert_allclose(np.abs(res.phi.amps), [1, 0], atol=1e-15)

    @pytest.mark.parametrize("m", [0, 1])
    def test_no_disturbance_without_information(self, m):
        ds, _, res = alpha_for(0.7, 0.0, m)
        assert fidelity(res.phi, qram_init(ds)) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_excited_ancilla(self):
        ds = ConceptDataset.from_xi0(0.5)
        s = tensor(StateVector.basis(1, 2), tensor(ZERO, qram_init(ds)))
        with pytest.raises(PreconditionError):
            measure_alpha(s, np.random.default_rng(0))


class TestTheta:
    @pytest.mark.parametrize("L, theta", [(1.0, math.pi / 2), (0.0, 0.0),
                                          (0.5, 0.9553166181245093)])
    def test_values(self, L, theta):
        # 0.5: arccos(1/sqrt 3)
        assert optimal_theta(OracleConfig(L)) == pytest.approx(theta, abs=1e-12)

    def test_range(self):
        for L in np.linspace(0, 1, 21):
            assert 0 <= optimal_theta(OracleConfig(float(L))) <= math.pi / 2


class TestRecoveryUnitary:
    def test_theta_zero_flips_ancilla(self):
        np.testing.assert_allclose(build_recovery(0, 0.0).matrix, np.kron(SX, np.eye(2)), atol=1e-15)

    @pytest.mark.parametrize("theta", [0.1, 0.5, 1.0, math.pi / 2])
    @pytest.mark.parametrize("m", [0, 1])
    def test_unitary(self, theta, m):
        u = build_recovery(m, theta).matrix
        np.testing.assert_allclose(u.conj().T @ u, np.eye(4), atol=1e-10)

    def test_full_embedding_unitary(self):
        basis = class_basis(ConceptDataset.from_xi0(0.3, 4), "full")
        setup = recovery_setup(OracleConfig(0.45), basis)
        assert setup.u0.is_unitary() and setup.u1.is_unitary()

    def test_branch_weights(self):
        # ancilla outcome 1 after answer 0 carries lambda-/P0 = 0.25/0.6
        _, basis, res = alpha_for(0.7, 0.5, 0)
        out = apply_recovery(res, recovery_setup(OracleConfig(0.5), basis))
        np.testing.assert_allclose(born_probabilities(out, 0), [0.35 / 0.6, 0.25 / 0.6], atol=1e-12)


def _beta(xi0, L, m, b, mode="reduced"):
    ds, basis, res = alpha_for(xi0, L, m, mode)
    out = apply_recovery(res, recovery_setup(OracleConfig(L), basis))
    pb0 = born_probabilities(out, 0)[0]
    u = pb0 / 2 if b == 0 else pb0 + (1 - pb0) / 2
    return ds, basis, out, measure_beta(out, m, ForcedRng(u))


class TestBeta:
    def test_example_probabilities(self):
        _, _, out, _ = _beta(0.7, 0.5, 0, 0)
        qc, qi = born_probabilities(out, 0)
        assert qc == pytest.approx(0.35 / 0.6, abs=1e-12)
        assert qi == pytest.approx(0.25 / 0.6, abs=1e-12)
        assert consistency_probabilities(OracleConfig(0.5), partition(ConceptDataset.from_xi0(0.7)), 0) \
            == pytest.approx((0.58333333333, 0.41666666667))

    def test_perfect_oracle_always_answers(self):
        for xi0 in (0.2, 0.5, 0.9):
            for m in (0, 1):
                _, _, out, _ = _beta(xi0, 1.0, m, m)
                assert born_probabilities(out, 0)[m] == pytest.approx(1.0, abs=1e-12)

    def test_random_oracle_never_answers(self):
        for m in (0, 1):
            _, _, out, _ = _beta(0.6, 0.0, m, 1 - m)
            assert born_probabilities(out, 0)[m] == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("m", [0, 1])
    def test_consistent_extracts_class_state(self, m):
        _, basis, _, res = _beta(0.7, 0.5, m, m)
        assert res.consistent and res.kind is OutcomeKind.EXTRACTED and res.answer == m
        target = StateVector((2,), basis.states[m])
        assert fidelity(res.post, target) == pytest.approx(1.0, abs=1e-10)

    @pytest.mark.parametrize("m", [0, 1])
    def test_inconsistent_recovers_input(self, m):
        ds, _, _, res = _beta(0.7, 0.5, m, 1 - m)
        assert not res.consistent and res.kind is OutcomeKind.RECOVERED and res.answer is None
        assert fidelity(res.post, qram_init(ds)) >= 1 - 1e-10

    def test_full_mode_extraction_has_only_matching_labels(self):
        ds, _, _, res = _beta(0.3, 0.6, 1, 1, mode="full")
        probs = np.abs(res.post.amps) ** 2
        assert all(probs[i] < 1e-20 for i, lab in enumerate(ds.labels) if lab != 1)

    def test_rejects_uncollapsed_answer(self):
        _, _, s = oracle_state(0.5, 0.5)
        with pytest.raises(PreconditionError):
            measure_beta(s, 0, np.random.default_rng(0))


@given(xi0=st.floats(0.01, 0.99), L=st.floats(0.0, 1.0), m=st.integers(0, 1),
       mode=st.sampled_from(["reduced", "full"]))
@hsettings(max_examples=150, deadline=None)
def test_branch_structure_property(xi0, L, m, mode):
    ds, basis, res = alpha_for(xi0, L, m, mode)
    c, part = OracleConfig(L), partition(ds)
    out = apply_recovery(res, recovery_setup(c, basis))
    q = born_probabilities(out, 0)
    qc, qi = consistency_probabilities(c, part, m)
    assert abs(q[m] - qc) < 1e-10 and abs(q[1 - m] - qi) < 1e-10
    assert abs(qc + qi - 1) < 1e-12
    assert abs(part.xi[m] * L + c.lambda_minus - alpha_probabilities(c, part)[m]) < 1e-12
    if qi > 1e-12:
        _, rec = project(out, 0, 1 - m)
        data = StateVector((basis.dim,), rec.tensor_view()[1 - m, m])
        assert fidelity(data, qram_init(ds, mode=mode)) >= 1 - 1e-10
    if qc > 1e-12:
        _, ext = project(out, 0, m)
        data = StateVector((basis.dim,), ext.tensor_view()[m, m])
        assert fidelity(data, StateVector((basis.dim,), basis.states[m])) >= 1 - 1e-10


@pytest.mark.parametrize("L", [0.2, 0.5, 0.8])
def test_only_optimal_theta_recovers_conclusively(L):
    c = OracleConfig(L)
    best = optimal_theta(c)
    ds = ConceptDataset.from_xi0(0.7)
    part = partition(ds)
    psi0 = qram_init(ds)
    for theta in np.linspace(0, math.pi / 2, 37):
        for m in (0, 1):
            _, _, res = alpha_for(0.7, L, m)
            out = apply(build_recovery(m, float(theta)), res.state, [0, 2])
            w, rec = project(out, 0, 1 - m)
            fid = fidelity(StateVector((2,), rec.tensor_view()[1 - m, m]), psi0)
            target = c.lambda_minus / alpha_probabilities(c, part)[m]
            assert fid < 1 - 1e-9 or w < target - 1e-9
    for m in (0, 1):
        _, _, res = alpha_for(0.7, L, m)
        out = apply(build_recovery(m, best), res.state, [0, 2])
        w, rec = project(out, 0, 1 - m)
        assert w == pytest.approx(c.lambda_minus / alpha_probabilities(c, part)[m], abs=1e-12)
        assert fidelity(StateVector((2,), rec.tensor_view()[1 - m, m]), psi0) >= 1 - 1e-10
