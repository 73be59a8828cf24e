import numpy as np
import pytest

from support import dblquad_complex, quad_complex

from polycgo import (
    AMPLITUDE_ONLY,
    FULL_CGO,
    STATIONARY_PHASE_CONSTANT,
    ComplexGrid,
    DegenerateProbeError,
    PerturbedOperator,
    PhaseSpec,
    RecoveryProblem,
    extraction_noise_floor,
    field_from_expression,
    identity_lhs,
    integrate,
    plateau_cutoff,
    recover_all,
    sample_bilinear,
    stationary_phase_calibration,
    stationary_phase_extract,
)


def single_bump_problem(n=256, mode=AMPLITUDE_ONLY, h_list=(0.2, 0.14, 0.1), m=2,
                        bump="bump(0, 0, 0.7, 1)", probes=(0.2 + 0.1j,)):
    g = ComplexGrid(0j, 1.0, n)
    L = PerturbedOperator(g, m, form="divergence")
    Lt = PerturbedOperator(g, m, {(0, 0): field_from_expression(g, bump)}, form="divergence")
    return RecoveryProblem(L, Lt, probes, h_list, mode=mode)


class TestFresnelConstant:
    def test_1d_quadrature_product_oracle(self):
        # the plane integral of exp(2i*Re(z^2)/h) splits into two line
        # integrals; high-resolution quadrature of each (with a smooth, wide
        # window) must reproduce sqrt(pi h/2) exp(+-i pi/4), so the product is
        # (pi/2) h -- the constant the extraction divides by
        h = 0.05

        def window(t):
            # plateau 1 on |t|<=0.6, smooth to 0 by |t|=1.4
            a = np.clip((1.4 - abs(t)) / 0.8, 0.0, 1.0)
            return np.where(
                a >= 1.0, 1.0, np.where(a <= 0.0, 0.0, np.exp(1.0 - 1.0 / np.maximum(a, 1e-12)))
            )

        plus = quad_complex(lambda t: np.exp(2j * t * t / h) * window(t), -1.4, 1.4,
                            epsabs=1e-12, epsrel=1e-12, limit=2000)
        minus = quad_complex(lambda t: np.exp(-2j * t * t / h) * window(t), -1.4, 1.4,
                             epsabs=1e-12, epsrel=1e-12, limit=2000)
        expect = np.sqrt(np.pi * h / 2.0) * np.exp(1j * np.pi / 4.0)
        assert plus == pytest.approx(expect, rel=1e-2)
        assert minus == pytest.approx(np.conj(expect), rel=1e-2)
        product = plus * minus
        assert product == pytest.approx(np.pi * h / 2.0, rel=1e-2)
        assert STATIONARY_PHASE_CONSTANT == pytest.approx(np.pi / 2.0)

    def test_grid_calibration_approaches_constant(self):
        g = ComplexGrid(0j, 1.0, 512)
        vals = []
        for h in (0.1, 0.05):
            c = stationary_phase_calibration(g, PhaseSpec(0.05 + 0.02j, h))
            vals.append(abs(c - STATIONARY_PHASE_CONSTANT) / STATIONARY_PHASE_CONSTANT)
        assert vals[-1] <= 0.02
        assert vals[-1] < vals[0]

    def test_cutoff_shape(self, grid128):
        chi = plateau_cutoff(grid128, 0.1 + 0.1j, 0.2, 0.4)
        r = np.abs(grid128.nodes - (0.1 + 0.1j))
        assert np.allclose(chi.values[r <= 0.19], 1.0)
        assert np.all(chi.values[r >= 0.41] == 0.0)
        assert np.all((np.abs(chi.values) <= 1.0 + 1e-15))

    def test_per_index_empirical_constants(self):
        from polycgo.recovery import empirical_constants

        g = ComplexGrid(0j, 1.0, 512)
        base = np.pi / 2.0
        # m=2: every index within 10% at h=0.05
        cs = empirical_constants(g, PhaseSpec(0.25 + 0.2j, 0.05), 2)
        assert max(abs(v - base) / base for v in cs.values()) <= 0.10
        # higher indices carry curved monomial weights whose corrections are
        # first order in h: the worst deviation must shrink with h
        worst = {}
        for h in (0.1, 0.05):
            cs3 = empirical_constants(g, PhaseSpec(0.25 + 0.2j, h), 3)
            worst[h] = max(abs(v - base) / base for v in cs3.values())
        assert worst[0.05] < worst[0.1]


class TestIdentity:
    def test_identical_operators_give_zero(self):
        g = ComplexGrid(0j, 1.0, 128)
        coeffs = {(0, 0): field_from_expression(g, "bump(0.1, 0, 0.6, 1)")}
        L = PerturbedOperator(g, 2, dict(coeffs), form="divergence")
        Lt = PerturbedOperator(g, 2, dict(coeffs), form="divergence")
        prob = RecoveryProblem(L, Lt, [0.1 + 0.1j], [0.3, 0.2])
        assert identity_lhs(prob, 0, 0, 0.3, 0.1 + 0.1j) == 0
        rep = recover_all(prob)
        assert all(r.extracted == 0 for r in rep.rows)

    def test_against_brute_force_quadrature(self):
        # independent adaptive 2D quadrature of the same oscillatory integrand
        prob = single_bump_problem(n=512, h_list=(0.2, 0.1))
        z0, h, R = 0.2 + 0.1j, 0.1, 0.7
        got = identity_lhs(prob, 0, 0, h, z0)

        def f(x, y):
            t = (x * x + y * y) / (R * R)
            b = np.exp(1.0 - 1.0 / (1.0 - t)) if t < 1 else 0.0
            w = 2.0 * ((x - z0.real) ** 2 - (y - z0.imag) ** 2) / h
            return b * np.exp(1j * w)

        oracle = dblquad_complex(f, -1, 1, -1, 1, epsabs=1e-10, epsrel=1e-10)
        assert got == pytest.approx(oracle, rel=1e-6)

    def test_extraction_recovers_bump_value(self):
        prob = single_bump_problem(n=512, h_list=(0.14, 0.1, 0.07))
        z0 = 0.2 + 0.1j
        vals = [(h, identity_lhs(prob, 0, 0, h, z0)) for h in prob.h_list]
        extracted, err_bar = stationary_phase_extract(vals, z0)
        truth = sample_bilinear(prob.differences[(0, 0)], z0)
        assert abs(extracted - truth) / abs(truth) <= 0.1
        assert err_bar < abs(truth)

    def test_triangularity_higher_terms_vanish(self):
        # a coefficient at (1,1) cannot enter the (0,0) pairing: dbar a = 0
        g = ComplexGrid(0j, 1.0, 128)
        L = PerturbedOperator(g, 2, form="divergence")
        Lt = PerturbedOperator(
            g, 2, {(1, 1): field_from_expression(g, "bump(0, 0, 0.6, 1)")},
            form="divergence",
        )
        prob = RecoveryProblem(L, Lt, [0.1 + 0.1j], [0.3, 0.2])
        assert identity_lhs(prob, 0, 0, 0.3, 0.1 + 0.1j) == 0
        # but it does enter its own pairing
        assert abs(identity_lhs(prob, 1, 1, 0.3, 0.1 + 0.1j)) > 1e-3

    def test_extract_needs_two_samples(self):
        with pytest.raises(ValueError):
            stationary_phase_extract([(0.1, 1.0 + 0j)], 0j)

    def test_extract_zero_values(self):
        value, err = stationary_phase_extract([(0.2, 0j), (0.1, 0j)], 0j)
        assert value == 0 and err == 0

    def test_full_cgo_close_to_amplitude_only(self):
        # remainder cross terms are higher order in h
        prob_a = single_bump_problem(n=128, h_list=(0.3,), mode=AMPLITUDE_ONLY)
        prob_f = single_bump_problem(n=128, h_list=(0.3,), mode=FULL_CGO)
        z0 = 0.2 + 0.1j
        va = identity_lhs(prob_a, 0, 0, 0.3, z0)
        vf = identity_lhs(prob_f, 0, 0, 0.3, z0)
        assert abs(vf - va) < 0.5 * abs(va)
        assert vf != va


class TestRecoveryProblem:
    def test_rejects_uncompact_difference(self):
        g = ComplexGrid(0j, 1.0, 64)
        L = PerturbedOperator(g, 2, form="divergence")
        Lt = PerturbedOperator(g, 2, {(0, 0): g.constant(1.0)}, form="divergence")
        with pytest.raises(ValueError):
            RecoveryProblem(L, Lt, [0j], [0.3])

    def test_rejects_mismatched_operators(self):
        g = ComplexGrid(0j, 1.0, 64)
        L2 = PerturbedOperator(g, 2, form="divergence")
        L3 = PerturbedOperator(g, 3, form="divergence")
        with pytest.raises(ValueError):
            RecoveryProblem(L2, L3, [0j], [0.3])

    def test_degenerate_probe_on_frame(self):
        prob = single_bump_problem()
        with pytest.raises(DegenerateProbeError):
            prob.check_probe(0.95 + 0j)
        with pytest.raises(DegenerateProbeError):
            identity_lhs(prob, 0, 0, 0.2, 0.95 + 0j)

    def test_degenerate_probe_listed_not_fatal(self):
        prob = single_bump_problem(probes=(0.2 + 0.1j, 0.98 + 0j))
        rep = recover_all(prob)
        assert len(rep.degenerate) == 1
        assert rep.degenerate[0][0] == 0.98 + 0j
        assert {r.z0 for r in rep.rows} == {0.2 + 0.1j}

    def test_conditioning_bound_triggers_degeneracy(self):
        g = ComplexGrid(0j, 1.0, 128)
        L = PerturbedOperator(g, 2, form="divergence")
        Lt = PerturbedOperator(
            g, 2, {(0, 0): field_from_expression(g, "bump(0, 0, 0.6, 1)")},
            form="divergence",
        )
        prob = RecoveryProblem(
            L, Lt, [0.5 + 0.5j], [0.3], conditioning_bound=0.1
        )
        with pytest.raises(DegenerateProbeError, match="bound"):
            prob.check_probe(0.5 + 0.5j)

    def test_noise_floor_positive_and_tiny(self):
        g = ComplexGrid(0j, 1.0, 128)
        floor = extraction_noise_floor(g, 1, 1, 0.1, 0.2 + 0.1j)
        assert 0 < floor < 1e-10


class TestRecoverAll:
    def test_single_bump_recovery(self):
        prob = single_bump_problem(n=512, h_list=(0.2, 0.14, 0.1, 0.07))
        rep = recover_all(prob)
        h_min = min(r.h for r in rep.rows)
        target = [r for r in rep.rows if (r.j, r.k) == (0, 0) and r.h == h_min]
        assert target[0].rel_err <= 0.15
        assert 0.5 <= rep.slopes[(0, 0)] <= 2.5

    def test_levels_feed_subtraction(self):
        # hand-expanded two-level check for m=2: with only B(0,0) nonzero, the
        # (0,1) pairing is B(0,0)-contaminated at leading order; the recovery
        # must subtract it and report a near-zero (0,1) difference
        prob = single_bump_problem(n=512, h_list=(0.1, 0.07))
        rep = recover_all(prob)
        h_min = min(r.h for r in rep.rows)
        b00 = sample_bilinear(prob.differences[(0, 0)], 0.2 + 0.1j)
        raw01 = identity_lhs(prob, 0, 1, h_min, 0.2 + 0.1j) / (
            STATIONARY_PHASE_CONSTANT * h_min
        )
        # the uncorrected value is dominated by B00 * conj(z0)
        assert abs(raw01 - b00 * np.conj(0.2 + 0.1j)) < 0.5 * abs(b00 * np.conj(0.2 + 0.1j))
        rec01 = [r for r in rep.rows if (r.j, r.k) == (0, 1) and r.h == h_min][0]
        assert abs(rec01.extracted) < 0.2 * abs(raw01)

    def test_bit_identical_reruns(self, tmp_path):
        prob1 = single_bump_problem(n=128, h_list=(0.3, 0.2))
        prob2 = single_bump_problem(n=128, h_list=(0.3, 0.2))
        rep1, rep2 = recover_all(prob1), recover_all(prob2)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        rep1.write_csv(p1, "x")
        rep2.write_csv(p2, "x")
        assert p1.read_bytes() == p2.read_bytes()

    def test_report_files(self, tmp_path):
        import json

        prob = single_bump_problem(n=128, h_list=(0.3, 0.2))
        rep = recover_all(prob)
        csv_path = tmp_path / "results.csv"
        rep.write_csv(csv_path, "deadbeef")
        head = csv_path.read_text().splitlines()
        assert head[0] == "# config_sha256=deadbeef"
        assert head[1].split(",")[:3] == ["m", "j", "k"]
        man_path = tmp_path / "manifest.json"
        rep.write_manifest(man_path, "deadbeef")
        doc = json.loads(man_path.read_text())
        assert doc["config_sha256"] == "deadbeef"
        assert doc["config"]["m"] == 2
        assert doc["rows"] == len(rep.rows)


class TestBilinearSampling:
    def test_exact_on_nodes(self, grid64):
        f = grid64.sample(lambda z: z**2 + np.conj(z))
        node = grid64.nodes[20, 30]
        assert sample_bilinear(f, complex(node)) == pytest.approx(node**2 + np.conj(node))

    def test_linear_fields_exact_off_node(self, grid64):
        f = grid64.sample(lambda z: 2 * z.real + 3j * z.imag)
        z = 0.1234 + 0.0567j
        assert sample_bilinear(f, z) == pytest.approx(2 * z.real + 3j * z.imag, rel=1e-10)
