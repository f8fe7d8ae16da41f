"""
Tests for the management commands.
"""
import csv
import json
import tempfile
from dataclasses import replace
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from verification.services.config import ExperimentConfig
from verification.services.runner import LOG_NAME, read_records, run


class CommandTestCase(SimpleTestCase):
    """Temporary output directory and config files."""

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.out = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def write_config(self, data, name='config.json'):
        path = self.out / name
        path.write_text(json.dumps(data))
        return str(path)

    def call(self, command, config, *args):
        stdout = StringIO()
        call_command(command, '--config', config, '--out', str(self.out), *args,
                     stdout=stdout, stderr=StringIO())
        return stdout.getvalue()

    def records(self):
        return read_records(self.out / LOG_NAME)


def hardy_data(trials=5):
    return {
        'schema_version': 1,
        'name': 'hardy-small',
        'time': {'T': 1.0, 'steps': 100},
        'exponents': {'p': [2, 3, 4]},
        'seed': 7,
        'check': {'name': 'lemma3', 'j_count': 2, 'trials': trials},
    }


class ExperimentCommandTests(CommandTestCase):
    """Tests for config handling shared by the experiment commands."""

    def test_hardy_appends_one_record_per_p(self):
        """Test that p = 2, 3, 4 gives three records."""
        output = self.call('hardy', self.write_config(hardy_data()))
        records = self.records()
        self.assertEqual([r['run']['p'] for r in records], [2, 3, 4])
        self.assertTrue(all(r['verdict'] == 'pass' for r in records))
        self.assertTrue(all(r['name'] == 'lemma3' for r in records))
        self.assertIn('all checks passed', output)

    def test_log_is_appended(self):
        """Test that a second run adds to the existing log."""
        config = self.write_config(hardy_data())
        self.call('hardy', config)
        self.call('hardy', config)
        self.assertEqual(len(self.records()), 6)

    def test_runs_are_reproducible(self):
        """Test that identical configs and seeds give identical records."""
        config = self.write_config(hardy_data())
        self.call('hardy', config)
        self.call('hardy', config)
        first, second = self.records()[:3], self.records()[3:]
        for a, b in zip(first, second):
            a.pop('created')
            b.pop('created')
            self.assertEqual(a, b)

    def test_zero_trials(self):
        """Test that trials = 0 fails before running."""
        with self.assertRaises(CommandError) as ctx:
            self.call('hardy', self.write_config(hardy_data(trials=0)))
        self.assertIn('check.trials', str(ctx.exception))
        self.assertEqual(self.records(), [])

    def test_missing_config(self):
        """Test that a missing file is reported as an invalid config."""
        with self.assertRaises(CommandError) as ctx:
            self.call('hardy', str(self.out / 'missing.json'))
        self.assertIn('invalid config', str(ctx.exception))

    def test_wrong_check_for_command(self):
        """Test that a command rejects checks it does not handle."""
        config = self.write_config({'schema_version': 1, 'check': {'name': 'partition'}})
        with self.assertRaises(CommandError) as ctx:
            self.call('hardy', config)
        self.assertIn('not handled', str(ctx.exception))

    def test_seed_override(self):
        """Test that --seed replaces the config seed in the record."""
        self.call('hardy', self.write_config(hardy_data()), '--seed', '5')
        records = self.records()
        self.assertTrue(all(r['seed'] == 5 for r in records))
        self.assertEqual(records[0]['parameters']['seed'], 5)

    def test_workers_must_be_positive(self):
        """Test that --workers 0 is rejected."""
        with self.assertRaises(CommandError):
            self.call('hardy', self.write_config(hardy_data()), '--workers', '0')

    def test_precondition_failure(self):
        """Test that a failed precondition is recorded and fails the command."""
        config = self.write_config({
            'schema_version': 1,
            'grid': {'n': 32},
            'time': {'T': 0.1, 'steps': 10},
            'field_recipe': {'name': 'random_decay', 'params': {'mean_zero': False}},
            'check': {'name': 'prop1', 'homogeneous': True},
        })
        with self.assertRaises(CommandError):
            self.call('prop1', config)
        records = self.records()
        self.assertEqual(len(records), 1)
        self.assertEqual(records[0]['verdict'], 'fail')
        self.assertIn('mean-zero', records[0]['criterion'])


class CheckCommandTests(CommandTestCase):
    """Tests for the individual check commands."""

    def test_partition_check(self):
        """Test the partition of unity on 256 points."""
        config = self.write_config({'schema_version': 1, 'grid': {'n': 256},
                                    'check': {'name': 'partition'}})
        self.call('partition_check', config)
        record = self.records()[0]
        self.assertEqual(record['verdict'], 'pass')
        self.assertEqual(record['parameters']['j_max'], 8)

    def test_run_experiment_accepts_any_check(self):
        """Test the generic command on the partition check."""
        config = self.write_config({'schema_version': 1, 'check': {'name': 'partition'}})
        self.call('run_experiment', config)
        self.assertEqual(self.records()[0]['name'], 'partition')

    def test_prop1_single_mode(self):
        """Test the deterministic estimate on a single mode."""
        config = self.write_config({
            'schema_version': 1,
            'grid': {'n': 64},
            'time': {'T': 0.05, 'steps': 100},
            'field_recipe': {'name': 'single_mode', 'params': {'k0': 8}},
            'exponents': {'p': [2, 3]},
            'check': {'name': 'prop1'},
        })
        self.call('prop1', config)
        records = self.records()
        self.assertEqual(len(records), 2)
        self.assertEqual([len(r['refinement']) for r in records], [2, 2])

    def test_fractional(self):
        """Test that the fractional command runs one record per alpha."""
        config = self.write_config({
            'schema_version': 1,
            'grid': {'n': 32},
            'time': {'T': 0.05, 'steps': 20},
            'field_recipe': {'name': 'single_mode', 'params': {'k0': 4}},
            'exponents': {'p': [2], 'alpha': [0.5, 0.75]},
            'check': {'name': 'prop1'},
        })
        self.call('fractional', config)
        records = self.records()
        self.assertEqual(len(records), 2)
        self.assertTrue(all(r['run']['kind'] != 'heat' for r in records))
        self.assertTrue(all(r['config']['kind'] == 'fractional' for r in records))

    def test_fractional_needs_alpha(self):
        """Test that the fractional command needs an alpha list."""
        config = self.write_config({'schema_version': 1, 'check': {'name': 'prop1'}})
        with self.assertRaises(CommandError):
            self.call('fractional', config)

    def test_isometry(self):
        """Test the isometry command on a small grid."""
        config = self.write_config({
            'schema_version': 1,
            'grid': {'n': 16},
            'time': {'T': 0.5, 'steps': 20},
            'field_recipe': {'name': 'random_decay', 'params': {'seed': 3}},
            'samples': 2000,
            'seed': 11,
            'check': {'name': 'isometry'},
        })
        self.call('isometry', config)
        self.assertEqual(self.records()[0]['verdict'], 'pass')


class PlotDataTests(CommandTestCase):
    """Tests for the plot_data command."""

    def plot(self, selector):
        call_command('plot_data', '--selector', selector, '--out', str(self.out), stdout=StringIO())
        with (self.out / f"{selector}.csv").open() as table:
            return list(csv.reader(table))

    def test_empty_log(self):
        """Test that a missing log gives a header-only table."""
        self.assertEqual(self.plot('lemma1'), [['scaled_time', 'kernel_l1', 'j']])

    def test_refinement_rows(self):
        """Test one row per refinement level."""
        self.call('hardy', self.write_config(hardy_data()))
        rows = self.plot('refinement')
        self.assertEqual(rows[0], ['check', 'level', 'ratio'])
        self.assertEqual(len(rows), 1 + 3 * 2)
        self.assertEqual({row[1] for row in rows[1:]}, {'100', '200'})

    def test_ratio_vs_p(self):
        """Test one row per p."""
        self.call('hardy', self.write_config(hardy_data()))
        rows = self.plot('ratio_vs_p')
        self.assertEqual([row[2] for row in rows[1:]], ['2.0', '3.0', '4.0'])

    def test_decay_rows(self):
        """Test that lemma1 series become decay rows."""
        record = {'name': 'lemma1', 'run': {'check': 'lemma1', 'kind': 'heat'}, 'refinement': [],
                  'series': [{'j': 2, 'time': 0.0625, 'scaled_time': 1.0, 'kernel_l1': 0.5}]}
        (self.out / LOG_NAME).write_text(json.dumps(record) + '\n')
        self.assertEqual(self.plot('lemma1')[1], ['1.0', '0.5', '2'])

    def test_unknown_selector(self):
        """Test that argparse rejects unknown selectors."""
        with self.assertRaises(CommandError):
            call_command('plot_data', '--selector', 'histogram', '--out', str(self.out))


class RunnerTests(CommandTestCase):
    """Tests for runner.run outside the commands."""

    def theorem_config(self, **levy):
        config = ExperimentConfig.from_dict({
            'schema_version': 1,
            'grid': {'n': 16},
            'time': {'T': 0.1, 'steps': 5},
            'field_recipe': {'name': 'random_decay', 'params': {'seed': 1}},
            'samples': 200,
            'check': {'name': 'theorem'},
        })
        return replace(config, levy=levy) if levy else config

    def test_divergent_measure_is_a_failed_record(self):
        """Test that an infinite jump mass fails the check and the exit status."""
        config = self.theorem_config(kind='power_law', gamma=1.5, low=0.0, high=1.0, scale=1.0,
                                     symmetric=True, epsilon=None)
        result = run(config, str(self.out))
        self.assertEqual(result.exit_status, 1)
        self.assertFalse(result.reports[0].passed)
        self.assertIn('total mass', result.reports[0].criterion)
        self.assertEqual(self.records()[0]['verdict'], 'fail')

    def test_finite_measure_exits_cleanly(self):
        """Test exit status 0 when every check passes."""
        result = run(self.theorem_config(), str(self.out))
        self.assertEqual(result.exit_status, 0)
