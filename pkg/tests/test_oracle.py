"""Time-domain validation path: integration, reproducibility, comparison."""

import numpy as np
import pytest

from conftest import make_du
from sasc.model import InstabilityError
from sasc.spectra import SpectrumTable, output_spectrum
from sasc import oracle


def short_config(model, seed=101, **kwargs):
    defaults = dict(dt=0.002, n_steps=8192, ensemble=4, seed=seed, port=0,
                    segment_length=2048)
    defaults.update(kwargs)
    return oracle.OracleConfig(model=model, **defaults)


class TestConfig:
    def test_parameter_validation(self):
        model = make_du()
        with pytest.raises(ValueError):
            short_config(model, dt=-0.1)
        with pytest.raises(ValueError):
            short_config(model, ensemble=0)
        with pytest.raises(ValueError):
            short_config(model, n_steps=100)  # below one Welch segment
        with pytest.raises(ValueError):
            short_config(model, port=5)

    def test_burn_in_defaults_to_segment_length(self):
        cfg = short_config(make_du())
        assert cfg.effective_burn_in == 2048
        assert short_config(make_du(), burn_in=17).effective_burn_in == 17


class TestSimulate:
    def test_deterministic_for_fixed_seed(self):
        model = make_du()
        run_a = oracle.simulate(short_config(model, seed=7))
        run_b = oracle.simulate(short_config(model, seed=7))
        assert np.array_equal(run_a.psd, run_b.psd)
        assert np.array_equal(run_a.stderr, run_b.stderr)

    def test_different_seeds_differ(self):
        model = make_du()
        run_a = oracle.simulate(short_config(model, seed=7))
        run_b = oracle.simulate(short_config(model, seed=8))
        assert not np.array_equal(run_a.psd, run_b.psd)

    def test_output_shape_and_positivity(self):
        run = oracle.simulate(short_config(make_du()))
        assert run.omega.shape == run.psd.shape == run.stderr.shape
        assert np.all(np.diff(run.omega) > 0)
        assert np.all(run.psd >= 0.0)
        assert run.n_segments > 1

    def test_unstable_model_rejected(self):
        model = make_du(delta_a=-1.0, kappa_a=0.1, magnitude=0.5)
        with pytest.raises(InstabilityError):
            oracle.simulate(short_config(model))

    def test_oversized_step_rejected(self):
        with pytest.raises(ValueError):
            oracle.simulate(short_config(make_du(), dt=0.5))

    def test_matches_frequency_domain_prediction(self):
        model = make_du()
        run = oracle.simulate(
            short_config(model, n_steps=32768, ensemble=16, seed=42)
        )
        predicted = output_spectrum(model, run.omega, port=0)
        report = oracle.compare(run, predicted)
        assert report.fraction_within >= 0.97


class TestCompare:
    def test_perfect_agreement(self):
        run = oracle.simulate(short_config(make_du(), seed=5))
        table = SpectrumTable(omega=run.omega, columns={"psd": run.psd.copy()})
        report = oracle.compare(run, table)
        assert report.fraction_within == 1.0
        assert report.max_abs_z == 0.0
        assert report.n_bins == len(run.omega)

    def test_systematic_offset_detected(self):
        run = oracle.simulate(short_config(make_du(), seed=5))
        wrong = run.psd + 10.0 * np.maximum(run.stderr, 1e-12)
        report = oracle.compare(run, SpectrumTable(omega=run.omega,
                                                   columns={"psd": wrong}))
        assert report.fraction_within == 0.0
        assert report.max_abs_z >= 10.0

    def test_column_must_be_named_when_ambiguous(self):
        run = oracle.simulate(short_config(make_du(), seed=5))
        table = SpectrumTable(omega=run.omega,
                              columns={"a": run.psd, "b": run.psd})
        with pytest.raises(ValueError):
            oracle.compare(run, table)
        report = oracle.compare(run, table, column="a")
        assert report.fraction_within == 1.0

    def test_disjoint_frequency_support_rejected(self):
        run = oracle.simulate(short_config(make_du(), seed=5))
        top = run.omega.max()
        table = SpectrumTable(omega=np.array([top + 1.0, top + 2.0]),
                              columns={"psd": np.array([1.0, 1.0])})
        with pytest.raises(ValueError):
            oracle.compare(run, table)
