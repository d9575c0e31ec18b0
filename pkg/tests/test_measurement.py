import numpy as np
import pytest

from vqreg.circuit import PhaseVector, apply_regression_map, regression_map_state
from vqreg.data import RawTable, standardize
from vqreg.encoders import COMPACT_BINARY, ONE_HOT, make_layout, prepare_exact
from vqreg.measurement import (
    ESTIMATOR_EXACT,
    LayoutMismatchError,
    ShadowConfig,
    VARIANCE_OPERATOR,
    VARIANCE_IDENTITY_PLUS_M,
    exact_cost_estimate,
    exact_expectation,
    measured_qubit_count,
    model_metrics,
    operator_identity_check,
    pauli_shadow_estimate,
    readout_attenuation,
    required_shots,
    shadow_snapshot_budget,
    shadow_string_snapshot_estimates,
    shot_estimate_compact,
    shot_estimate_one_hot,
    variance_operator_derived,
    variance_identity_plus_m,
)
from vqreg.statevector import basis_state, from_amplitudes
from tests.test_encoders import table_from_values


def random_std(num_rows, num_features, seed):
    rng = np.random.default_rng(seed)
    return standardize(RawTable(rng.uniform(-1, 1, (num_rows, num_features + 1))))


def one_hot_state(cell_amps):
    cell_amps = np.asarray(cell_amps, dtype=np.float64)
    n = cell_amps.size
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[np.uint64(1) << np.arange(n, dtype=np.uint64)] = cell_amps
    return from_amplitudes(n, amps)


def test_exact_expectation_examples():
    layout = make_layout(ONE_HOT, 2, 1)
    assert abs(exact_expectation(one_hot_state([-0.5, 0.5, -0.5, 0.5]), layout)) < 1e-15
    assert abs(exact_expectation(one_hot_state([0.5, 0.0, 0.5, 0.0]), layout) - 0.5) < 1e-15
    assert exact_expectation(one_hot_state([0, 0, 0, 0]), layout) == 0.0


def test_exact_expectation_matches_dense_operator():
    # oracle: dense M_hat on the code space for random subnormalized states
    rng = np.random.default_rng(0)
    for _ in range(5):
        L, M = int(rng.integers(2, 5)), int(rng.integers(1, 4))
        m_hat = np.kron(np.eye(L), np.ones((M + 1, M + 1)))
        cells = rng.standard_normal(L * (M + 1)) * 0.5
        want = cells @ m_hat @ cells
        layout = make_layout(ONE_HOT, L, M)
        assert abs(exact_expectation(one_hot_state(cells), layout) - want) < 1e-12


def test_exact_expectation_layout_errors():
    layout = make_layout(ONE_HOT, 2, 1)
    with pytest.raises(LayoutMismatchError):
        exact_expectation(basis_state(3, 0), layout)
    # weight on a non-code state (|1100...>) must be rejected
    amps = np.zeros(16, dtype=np.complex128)
    amps[3] = 1.0
    with pytest.raises(LayoutMismatchError):
        exact_expectation(from_amplitudes(4, amps), layout)


def test_exact_cost_estimate_contract():
    layout = make_layout(ONE_HOT, 2, 1)
    est = exact_cost_estimate(one_hot_state([0.5, 0.0, 0.5, 0.0]), layout)
    assert est.estimator == ESTIMATOR_EXACT
    assert est.shots == 0 and est.std_error == 0.0


def test_operator_identity_examples():
    report = operator_identity_check(2, 1)
    assert report.deviation_m_plus_one == 0.0
    assert report.deviation_identity_plus_m == 1.0
    np.testing.assert_allclose(np.unique(np.round(report.eigenvalues, 9)), [0.0, 2.0])

    report = operator_identity_check(1, 2)
    assert report.deviation_m_plus_one == 0.0
    np.testing.assert_allclose(report.m_hat_squared, 3.0 * report.m_hat)


def test_operator_identity_all_small_sizes():
    for L in range(1, 7):
        for M in range(1, 6):
            if L * (M + 1) > 12:
                continue
            report = operator_identity_check(L, M)
            assert report.deviation_m_plus_one == 0.0
            assert report.deviation_identity_plus_m > 0.0
            eigs = np.unique(np.round(report.eigenvalues, 9))
            assert set(eigs.tolist()) <= {0.0, float(M + 1)}


def _prepared(std, scheme, phases):
    prep = prepare_exact(std, scheme)
    state = regression_map_state(prep, phases)
    psi0, _ = apply_regression_map(prep, phases)
    return prep, state, exact_expectation(psi0, prep.layout)


def test_compact_estimator_perfect_fit_and_unbiasedness():
    std = table_from_values([[0.5, 0.5], [0.5, 0.5]])
    prep, state, exact = _prepared(std, COMPACT_BINARY, PhaseVector([np.pi, 0.0]))
    assert exact < 1e-20
    est = shot_estimate_compact(state, prep.layout, 10**5, seed=0)
    assert abs(est.value) <= 5 * max(est.std_error, 1e-4)

    std = random_std(2, 1, 1)
    prep, state, exact = _prepared(std, COMPACT_BINARY, PhaseVector([np.pi, 0.8]))
    vals = np.array([
        shot_estimate_compact(state, prep.layout, 4000, seed=s).value for s in range(200)
    ])
    z = (vals.mean() - exact) / (vals.std(ddof=1) / np.sqrt(vals.size))
    assert abs(z) < 3.0


def test_one_hot_estimator_agreement():
    std = random_std(2, 1, 2)
    prep, state, exact = _prepared(std, ONE_HOT, PhaseVector([np.pi, 0.6]))
    est = shot_estimate_one_hot(state, prep.layout, 10**5, seed=3)
    assert abs(est.value - exact) <= 5 * est.std_error


def test_one_hot_estimator_single_row_limit():
    # one occupied basis state per row and W = 0: the cross terms vanish and
    # the estimate reduces to the ancilla-0 weight
    std = table_from_values([[1.0, 0.0]])
    prep, state, exact = _prepared(std, ONE_HOT, PhaseVector([np.pi, np.pi / 2]))
    assert abs(exact - 1.0) < 1e-12
    est = shot_estimate_one_hot(state, prep.layout, 30000, seed=4)
    assert abs(est.value - 1.0) <= 5 * max(est.std_error, 1e-3)


def test_estimator_readout_attenuation_means():
    std = random_std(4, 3, 5)
    phases = PhaseVector(np.array([np.pi, np.pi / 2, np.pi / 2, np.pi / 2]))
    for scheme, estimator in ((COMPACT_BINARY, shot_estimate_compact),
                              (ONE_HOT, shot_estimate_one_hot)):
        prep, state, exact = _prepared(std, scheme, phases)
        n_meas = measured_qubit_count(prep.layout)
        delta = 0.01
        vals = [estimator(state, prep.layout, 10**5, delta, seed=s).value for s in range(10)]
        expected = readout_attenuation(delta, n_meas) * exact
        se = np.std(vals, ddof=1) / np.sqrt(len(vals))
        assert abs(np.mean(vals) - expected) < 4 * se + 1e-3


def test_estimator_validation():
    std = random_std(2, 1, 6)
    prep, state, _ = _prepared(std, COMPACT_BINARY, PhaseVector([np.pi, 0.3]))
    with pytest.raises(ValueError):
        shot_estimate_compact(state, prep.layout, 0)
    with pytest.raises(ValueError):
        shot_estimate_compact(state, prep.layout, 100, readout_delta=0.6)
    with pytest.raises(LayoutMismatchError):
        shot_estimate_one_hot(state, prep.layout, 100)
    prep_o = prepare_exact(std, ONE_HOT)
    with pytest.raises(LayoutMismatchError):
        shot_estimate_compact(regression_map_state(prep_o, PhaseVector([np.pi, 0.3])),
                              prep_o.layout, 100)


def test_shadow_identity_string_is_exactly_one():
    bases = np.random.default_rng(0).integers(0, 3, size=(50, 3))
    bits = np.random.default_rng(1).integers(0, 2, size=(50, 3))
    np.testing.assert_array_equal(shadow_string_snapshot_estimates(bases, bits, []), 1.0)


def test_shadow_estimator_unbiased():
    std = random_std(2, 1, 7)
    prep = prepare_exact(std)
    exact = exact_expectation(prep.state, prep.layout)
    vals = []
    for rep in range(500):
        cfg = ShadowConfig(snapshots=120, locality=prep.layout.n_m, seed=rep)
        vals.append(pauli_shadow_estimate(prep.state, prep.layout, cfg).value)
    vals = np.array(vals)
    z = (vals.mean() - exact) / (vals.std(ddof=1) / np.sqrt(vals.size))
    # median-of-means is only asymptotically mean-unbiased; 3 combined sigma
    assert abs(z) < 3.0


def test_shadow_norm_rescaling():
    std = random_std(2, 1, 8)
    phases = PhaseVector([np.pi, 0.4])
    prep = prepare_exact(std)
    psi0, p = apply_regression_map(prep, phases)
    exact = exact_expectation(psi0, prep.layout)
    cfg = ShadowConfig(snapshots=40000, locality=prep.layout.n_m, seed=9)
    est = pauli_shadow_estimate(psi0.renormalized(), prep.layout, cfg, norm_squared=p)
    assert abs(est.value - exact) < 0.05


def test_shadow_variance_scales_with_shots():
    psi = basis_state(2, 0)
    layout = make_layout(COMPACT_BINARY, 2, 1)
    variances = []
    snapshots = [250, 1000, 4000]
    for S in snapshots:
        vals = [
            pauli_shadow_estimate(psi, layout, ShadowConfig(S, 1, seed=100 + r)).value
            for r in range(120)
        ]
        variances.append(np.var(vals, ddof=1))
    slope = np.polyfit(np.log10(snapshots), np.log10(variances), 1)[0]
    assert abs(slope + 1.0) < 0.25


def test_shadow_validation():
    psi = basis_state(2, 0)
    layout = make_layout(COMPACT_BINARY, 2, 1)
    with pytest.raises(ValueError):
        pauli_shadow_estimate(psi, layout, ShadowConfig(snapshots=3, locality=1))
    with pytest.raises(ValueError):
        pauli_shadow_estimate(from_amplitudes(2, [0.5, 0, 0, 0]), layout,
                              ShadowConfig(snapshots=100, locality=1))
    with pytest.raises(LayoutMismatchError):
        pauli_shadow_estimate(psi, make_layout(ONE_HOT, 2, 1),
                              ShadowConfig(snapshots=100, locality=1))
    assert ShadowConfig(snapshots=100, locality=2).shadow_norm_bound == 16.0
    assert ShadowConfig(snapshots=100, locality=1, failure_prob=0.05).groups == 6
    assert shadow_snapshot_budget(1, 0.25) == int(np.ceil(12 * np.log(2) * 4 / 0.0625))


def test_model_metrics_anchor_points():
    std = random_std(6, 3, 10)
    phases = PhaseVector(np.array([np.pi, 0.1, 0.2, 0.3]))
    c0 = std.c0
    assert model_metrics(0.0, std, phases).r_squared == 1.0
    assert abs(model_metrics(c0, std, phases).r_squared) < 1e-12
    assert abs(model_metrics(4 * c0, std, phases).r_squared + 3.0) < 1e-12
    for m_feats in range(1, 9):
        s = random_std(12, m_feats, 11 + m_feats)
        assert abs(s.c0 - 1.0 / (1.0 + m_feats)) < 1e-10


def test_required_shots_examples():
    budget = required_shots(0.0, 6, 0.01, 0.05, VARIANCE_IDENTITY_PLUS_M)
    assert budget.required_shots == 59915
    assert budget.variance_identity_plus_m == 1.0
    op = required_shots(0.0, 6, 0.01, 0.05, VARIANCE_OPERATOR)
    assert op.variance_operator == 0.0 and op.required_shots == 0
    assert op.shots_identity_plus_m == 59915  # both formulas always reported

    # epsilon halved -> un-ceiled budget exactly quadruples
    for eps in (0.01, 0.02):
        raw = 2 * variance_identity_plus_m(0.1, 3) * np.log(1 / 0.05) / eps**2
        raw_half = 2 * variance_identity_plus_m(0.1, 3) * np.log(1 / 0.05) / (eps / 2) ** 2
        assert raw_half == 4 * raw
        a = required_shots(0.1, 3, eps, 0.05, VARIANCE_IDENTITY_PLUS_M).required_shots
        b = required_shots(0.1, 3, eps / 2, 0.05, VARIANCE_IDENTITY_PLUS_M).required_shots
        assert abs(b - 4 * a) <= 3  # ceiling slack only


def test_variance_formulas():
    assert variance_identity_plus_m(0.2, 4) == 1.0 + 4 * 0.2 - 0.04
    assert variance_operator_derived(0.2, 4) == 5 * 0.2 - 0.04
    with pytest.raises(ValueError):
        required_shots(0.1, 2, -1.0, 0.05)
    with pytest.raises(ValueError):
        required_shots(0.1, 2, 0.1, 1.5)
    with pytest.raises(ValueError):
        required_shots(0.1, 2, 0.1, 0.05, "unknown")


def test_measured_qubit_counts():
    assert measured_qubit_count(make_layout(ONE_HOT, 4, 3)) == 17
    assert measured_qubit_count(make_layout(COMPACT_BINARY, 4, 3)) == 5
