import dataclasses
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from uqbench.physics import (
    ConfigError,
    DomainError,
    ScenarioConfig,
    UncertainInput,
    compute_cp,
    effective_saturation,
    flux_derivative,
    fractional_flow,
    injection_velocity,
    max_flux_derivative,
    pressure_profile,
    rel_perm,
)


class TestScenarioConfig:
    def test_defaults_are_table_values(self, cfg):
        assert cfg.rho_g == 479.0
        assert cfg.mu_n == 3.95e-5
        assert cfg.mu_w == 2.535e-4
        assert cfg.Q == pytest.approx(1600.0 / 86400.0)
        assert cfg.p_max == 320e5 and cfg.p_min == 300e5
        assert cfg.n_cells == 250

    def test_invariants_enforced(self):
        with pytest.raises(ConfigError):
            ScenarioConfig(Sr_w=0.6, Sr_n=0.5)
        with pytest.raises(ConfigError):
            ScenarioConfig(p_max=1e5, p_min=2e5)
        with pytest.raises(ConfigError):
            ScenarioConfig(mu_n=0.0)
        with pytest.raises(ConfigError):
            ScenarioConfig(r_max=0.5)

    def test_file_roundtrip(self, cfg, tmp_path):
        import yaml
        path = tmp_path / "scenario.yaml"
        path.write_text(yaml.safe_dump(cfg.to_file_dict()))
        loaded = ScenarioConfig.from_file(path)
        assert loaded == cfg

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "scenario.yaml"
        path.write_text("co2_densityy: 479\n")
        with pytest.raises(ConfigError, match="co2_densityy"):
            ScenarioConfig.from_file(path)


class TestUncertainInput:
    def test_validation(self):
        with pytest.raises(ConfigError):
            UncertainInput(-1.5, 2.0, 0.15)
        with pytest.raises(ConfigError):
            UncertainInput(0.0, 0.0, 0.15)
        with pytest.raises(ConfigError):
            UncertainInput(0.0, 2.0, 1.2)
        UncertainInput(-1.0, 2.0, 0.15)  # zero-injection limit is admissible


class TestEffectiveSaturation:
    def test_vanishes_at_residual(self):
        assert effective_saturation(0.2, 0.2) == 0.0

    def test_identity_at_full(self):
        assert effective_saturation(1.0, 0.35) == 1.0

    def test_direct_value(self):
        assert effective_saturation(0.8, 0.2) == pytest.approx(0.75)

    def test_invalid_residual(self):
        with pytest.raises(ConfigError):
            effective_saturation(0.5, 1.0)


class TestRelPerm:
    def test_boundaries(self):
        assert rel_perm(1.0, 3.1) == (1.0, 0.0)
        assert rel_perm(0.0, 3.1) == (0.0, 1.0)

    def test_quadratic_midpoint(self):
        kn, kw = rel_perm(0.5, 2.0)
        assert kn == pytest.approx(0.25) and kw == pytest.approx(0.25)

    def test_invalid_exponent(self):
        with pytest.raises(ConfigError):
            rel_perm(0.5, 0.0)


class TestFractionalFlow:
    def test_endpoints(self, cfg):
        assert fractional_flow(0.0, 2.0, cfg) == 0.0
        assert fractional_flow(1.0, 2.0, cfg) == 1.0

    def test_midpoint_against_rational_oracle(self, cfg):
        # kr = 1/4 on both sides; exact rational arithmetic on the table
        # viscosities gives the reference value.
        mob_n = Fraction(1, 4) / Fraction(395, 10**7)
        mob_w = Fraction(1, 4) / Fraction(2535, 10**7)
        expected = float(mob_n / (mob_n + mob_w))
        assert fractional_flow(0.5, 2.0, cfg) == pytest.approx(expected, rel=1e-12)
        assert expected == pytest.approx(0.865, abs=5e-4)

    @given(s=st.floats(0.0, 1.0), om2=st.floats(1.0, 6.0))
    def test_bounded(self, s, om2):
        f = fractional_flow(s, om2, ScenarioConfig())
        assert 0.0 <= f <= 1.0

    def test_monotone_in_saturation(self, cfg):
        s = np.linspace(0.0, 1.0, 1001)
        for om2 in (1.0, 2.0, 4.5, 6.0):
            f = fractional_flow(s, om2, cfg)
            assert np.all(np.diff(f) >= -1e-15)

    def test_s_shape_single_inflection(self, cfg):
        # derivative has a single interior maximum: one sign change in the
        # second difference of f over 1000 sample points
        s = np.linspace(0.0, 1.0, 1000)
        d2 = np.diff(fractional_flow(s, 2.0, cfg), 2)
        signs = np.sign(d2[np.abs(d2) > 1e-14])
        changes = np.count_nonzero(np.diff(signs) != 0)
        assert changes == 1

    def test_derivative_matches_finite_difference(self, cfg):
        s = np.linspace(0.01, 0.99, 23)
        h = 1e-7
        for om2 in (1.5, 2.0, 3.7):
            fd = (fractional_flow(s + h, om2, cfg) - fractional_flow(s - h, om2, cfg)) / (2 * h)
            np.testing.assert_allclose(flux_derivative(s, om2, cfg), fd,
                                       rtol=1e-5, atol=1e-8)
        assert max_flux_derivative(2.0, cfg) > 0


class TestPressure:
    def test_cp_table_value(self, cfg):
        assert compute_cp(cfg) == pytest.approx(3.48e-3, rel=0.01)

    def test_cp_linear_in_pressure_drop(self, cfg):
        wide = dataclasses.replace(cfg, p_min=cfg.p_max - 2 * (cfg.p_max - cfg.p_min))
        assert compute_cp(wide) == pytest.approx(2 * compute_cp(cfg), rel=1e-12)

    def test_cp_inverse_in_rate(self, cfg):
        doubled = dataclasses.replace(cfg, Q=2 * cfg.Q)
        assert compute_cp(doubled) == pytest.approx(compute_cp(cfg) / 2, rel=1e-12)

    def test_cp_domain_error(self, cfg):
        bad = dataclasses.replace(cfg, r_min=0.5, r_max=0.9)
        with pytest.raises(DomainError):
            compute_cp(bad)

    def test_endpoints(self, cfg):
        assert pressure_profile(1.0, 0.0, cfg) == cfg.p_max
        assert pressure_profile(cfg.r_max, 0.0, cfg) == pytest.approx(cfg.p_min, rel=1e-14)

    def test_geometric_midpoint(self, cfg):
        p = pressure_profile(np.sqrt(cfg.r_max), 0.0, cfg)
        assert p == pytest.approx(0.5 * (cfg.p_max + cfg.p_min), rel=1e-14)

    def test_drop_proportional_to_rate_factor(self, cfg):
        r = 123.0
        base = cfg.p_max - pressure_profile(r, 0.0, cfg)
        for om1 in (-0.4, 0.25, 0.8):
            drop = cfg.p_max - pressure_profile(r, om1, cfg)
            assert drop == pytest.approx((1 + om1) * base, rel=1e-12)

    def test_out_of_domain(self, cfg):
        with pytest.raises(DomainError):
            pressure_profile(0.5, 0.0, cfg)
        with pytest.raises(DomainError):
            pressure_profile(cfg.r_max + 1.0, 0.0, cfg)

    def test_pressure_profile_independent_of_permeability(self, cfg):
        # K_A cancels between cp and the 1/(lambda K_A) factor, so the
        # pressure solution is unchanged when cp is recomputed
        other = dataclasses.replace(cfg, K_A=10 * cfg.K_A)
        r = np.array([1.0, 5.0, 120.0, cfg.r_max])
        np.testing.assert_allclose(pressure_profile(r, 0.3, other),
                                   pressure_profile(r, 0.3, cfg), rtol=1e-14)

    def test_transport_depends_on_permeability_only_through_u(self, cfg):
        # scaling K_A up and the pressure drop down by the same factor
        # leaves u, and with it the whole transport problem, unchanged
        other = dataclasses.replace(
            cfg, K_A=10 * cfg.K_A,
            p_min=cfg.p_max - (cfg.p_max - cfg.p_min) / 10)
        assert injection_velocity(0.3, other) == pytest.approx(
            injection_velocity(0.3, cfg), rel=1e-14)
