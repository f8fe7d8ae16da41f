"""
Tests for experiment configs and field recipes.
"""
import json
import tempfile
from pathlib import Path

from django.test import SimpleTestCase, override_settings

from verification.services.config import ExperimentConfig, build_measure, get_check_names
from verification.services.errors import ConfigError
from verification.services.levy import AtomicMeasure, DensityMeasure, beta_moment
from verification.services.recipes import build_field, get_recipe, get_recipe_names


def hardy_config(**changes):
    data = {
        'schema_version': 1,
        'name': 'hardy-small',
        'time': {'T': 1.0, 'steps': 20},
        'exponents': {'p': [2, 3, 4]},
        'check': {'name': 'lemma3', 'j_count': 2, 'trials': 3},
    }
    data.update(changes)
    return data


class ValidationTests(SimpleTestCase):
    """Tests that invalid configs name the offending field."""

    def assertConfigError(self, data, field):
        with self.assertRaises(ConfigError) as ctx:
            ExperimentConfig.from_dict(data)
        self.assertEqual(ctx.exception.field, field)

    def test_valid_config(self):
        """Test that a minimal lemma3 config loads with defaults."""
        config = ExperimentConfig.from_dict(hardy_config())
        self.assertEqual(config.check, 'lemma3')
        self.assertEqual(config.ps, (2, 3, 4))
        self.assertEqual(config.check_params['index_mode'], 'nonneg')
        self.assertEqual(config.grid.n, 64)
        self.assertEqual(config.kind, 'heat')

    def test_zero_trials(self):
        """Test that trials = 0 is rejected before anything runs."""
        data = hardy_config(check={'name': 'lemma3', 'j_count': 2, 'trials': 0})
        self.assertConfigError(data, 'check.trials')

    def test_missing_required_param(self):
        """Test that a missing required check parameter is named."""
        self.assertConfigError(hardy_config(check={'name': 'lemma3', 'trials': 3}), 'check.j_count')

    def test_unknown_keys(self):
        """Test that unknown top-level and check keys are rejected."""
        self.assertConfigError(hardy_config(colour='red'), 'colour')
        data = hardy_config(check={'name': 'lemma3', 'j_count': 2, 'trials': 3, 'bogus': 1})
        self.assertConfigError(data, 'check.bogus')

    def test_unknown_check(self):
        """Test that an unknown check name is rejected."""
        self.assertConfigError(hardy_config(check={'name': 'lemma9'}), 'check.name')

    def test_schema_version(self):
        """Test that other schema versions are rejected."""
        self.assertConfigError(hardy_config(schema_version=2), 'schema_version')
        data = hardy_config()
        del data['schema_version']
        self.assertConfigError(data, 'schema_version')

    def test_grid(self):
        """Test that n must be a power of two."""
        self.assertConfigError(hardy_config(grid={'n': 100}), 'grid')
        self.assertConfigError(hardy_config(grid={'n': '64'}), 'grid.n')

    def test_exponents(self):
        """Test the p and alpha ranges."""
        self.assertConfigError(hardy_config(exponents={'p': [0.5]}), 'exponents.p')
        # the Hardy check needs p > 1
        self.assertConfigError(hardy_config(exponents={'p': [1]}), 'exponents.p')
        self.assertConfigError(hardy_config(kind='fractional'), 'exponents.alpha')
        self.assertConfigError(hardy_config(kind='fractional', exponents={'alpha': [1.0]}),
                               'exponents.alpha')

    def test_levy(self):
        """Test Levy measure descriptions."""
        self.assertConfigError(hardy_config(levy={'kind': 'gamma'}), 'levy.kind')
        self.assertConfigError(hardy_config(levy={'kind': 'uniform', 'low': 2.0, 'high': 1.0}), 'levy')
        self.assertConfigError(hardy_config(levy={'kind': 'atoms', 'atoms': [[1.0]]}), 'levy.atoms')

    def test_field_recipe(self):
        """Test recipe names and parameters."""
        self.assertConfigError(hardy_config(field_recipe={'name': 'noise'}), 'field_recipe.name')
        self.assertConfigError(hardy_config(field_recipe={'name': 'single_mode'}),
                               'field_recipe.params.k0')
        self.assertConfigError(hardy_config(field_recipe={'name': 'zero', 'params': {'k0': 1}}),
                               'field_recipe.params.k0')

    def test_samples(self):
        """Test that Monte Carlo checks need at least two samples."""
        self.assertConfigError(hardy_config(samples=1), 'samples')

    @override_settings(LEVY_HEAT_SEED=17)
    def test_seed_default_from_settings(self):
        """Test that the seed defaults to LEVY_HEAT_SEED."""
        self.assertEqual(ExperimentConfig.from_dict(hardy_config()).seed, 17)


class FanOutTests(SimpleTestCase):
    """Tests for the exponent fan-out."""

    def test_p_list(self):
        """Test one run per p for the Hardy check."""
        runs = ExperimentConfig.from_dict(hardy_config()).fan_out()
        self.assertEqual([run['p'] for run in runs], [2, 3, 4])

    def test_p_and_k(self):
        """Test the p x k product for the stochastic estimate."""
        config = ExperimentConfig.from_dict(hardy_config(
            exponents={'p': [2, 4], 'k': [0, 1, 2]}, check={'name': 'theorem'},
        ))
        self.assertEqual(len(config.fan_out()), 6)

    def test_fractional(self):
        """Test one run per alpha and p."""
        config = ExperimentConfig.from_dict(hardy_config(
            kind='fractional', exponents={'p': [2, 3], 'alpha': [0.5, 0.75]}, check={'name': 'prop1'},
        ))
        runs = config.fan_out()
        self.assertEqual(len(runs), 4)
        self.assertEqual({run['kind'].label for run in runs},
                         {config.semigroups()[0].label, config.semigroups()[1].label})

    def test_no_exponents(self):
        """Test that the partition check runs once."""
        config = ExperimentConfig.from_dict(hardy_config(check={'name': 'partition'}))
        self.assertEqual(len(config.fan_out()), 1)


class ConfigTests(SimpleTestCase):
    """Tests for loading, overrides and derived objects."""

    def test_round_trip(self):
        """Test that to_dict is accepted by from_dict."""
        config = ExperimentConfig.from_dict(hardy_config())
        self.assertEqual(ExperimentConfig.from_dict(config.to_dict()), config)

    def test_overrides(self):
        """Test that None keeps the config value."""
        config = ExperimentConfig.from_dict(hardy_config(seed=3))
        self.assertEqual(config.with_overrides(seed=None, workers=2).seed, 3)
        self.assertEqual(config.with_overrides(seed=9).seed, 9)

    def test_load(self):
        """Test loading a config from disk."""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'hardy.json'
            path.write_text(json.dumps(hardy_config()))
            self.assertEqual(ExperimentConfig.load(path).check, 'lemma3')

    def test_load_invalid_json(self):
        """Test that unreadable files raise ConfigError."""
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'broken.json'
            path.write_text('{"schema_version": 1,')
            with self.assertRaises(ConfigError) as ctx:
                ExperimentConfig.load(path)
            self.assertEqual(ctx.exception.field, 'config')
            with self.assertRaises(ConfigError):
                ExperimentConfig.load(Path(tmp) / 'missing.json')

    def test_shipped_experiments(self):
        """Test that every config under experiments/ is valid."""
        directory = Path(__file__).resolve().parents[2] / 'experiments'
        paths = sorted(directory.glob('*.json'))
        self.assertGreater(len(paths), 0)
        for path in paths:
            config = ExperimentConfig.load(path)
            self.assertIn(config.check, get_check_names())

    def test_build_measure(self):
        """Test measures built from descriptions."""
        atoms = build_measure({'kind': 'atoms', 'atoms': [[1.0, 1.0], [-1.0, 1.0]]})
        self.assertIsInstance(atoms, AtomicMeasure)
        self.assertAlmostEqual(beta_moment(atoms, 2), 2.0)
        uniform = build_measure({'kind': 'uniform', 'low': 1.0, 'high': 2.0, 'mass': 1.0,
                                 'symmetric': False})
        self.assertIsInstance(uniform, DensityMeasure)
        truncated = build_measure({'kind': 'power_law', 'gamma': 0.5, 'low': 0.0, 'high': 1.0,
                                   'scale': 1.0, 'symmetric': False, 'epsilon': 0.1})
        self.assertAlmostEqual(truncated.total_mass / ((0.1 ** -0.5 - 1.0) / 0.5), 1.0, places=7)


class RecipeTests(SimpleTestCase):
    """Tests for the field recipe registry."""

    def setUp(self):
        config = ExperimentConfig.from_dict(hardy_config(grid={'n': 32}, time={'T': 1.0, 'steps': 10}))
        self.grid, self.tgrid = config.grid, config.time

    def test_registry(self):
        """Test recipe lookup."""
        self.assertIn('random_decay', get_recipe_names())
        self.assertIsNone(get_recipe('noise'))
        with self.assertRaises(ValueError):
            build_field('noise', self.grid, self.tgrid)

    def test_zero(self):
        """Test that the zero recipe is mean-zero and time-constant."""
        g = build_field('zero', self.grid, self.tgrid)
        self.assertTrue(g.is_mean_zero())
        self.assertTrue(g.is_time_constant())

    def test_random_decay_is_reproducible(self):
        """Test that the same seed gives the same field."""
        first = build_field('random_decay', self.grid, self.tgrid, {'seed': 4})
        second = build_field('random_decay', self.grid, self.tgrid, {'seed': 4})
        self.assertEqual(first.coefficients.tolist(), second.coefficients.tolist())
        self.assertTrue(first.is_mean_zero())

    def test_random_decay_time_varying(self):
        """Test independent frames when time_constant is false."""
        g = build_field('random_decay', self.grid, self.tgrid, {'time_constant': False})
        self.assertFalse(g.is_time_constant())
        self.assertEqual(len(g.frames), self.tgrid.steps + 1)

    def test_step_in_time(self):
        """Test that the mode switches at switch * T."""
        g = build_field('step_in_time', self.grid, self.tgrid, {'k0': 2, 'switch': 0.5})
        self.assertEqual(abs(g.coefficients[0][self.grid.mode_position(2)]), 1.0)
        self.assertEqual(abs(g.coefficients[-1]).max(), 0.0)
