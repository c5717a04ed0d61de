import json
import os
import tempfile

from django.test import SimpleTestCase

from icdcoder import core, params
from icdcoder.exceptions import ParamMissing, ParamValidationError
from icdcoder.helpers import SeededCommand
from icdcoder.tests.setup import commands


def resolve(command, values=None, config=None):
    return command(values, config=config or {}).resolve()


class ParamResolutionTests(SimpleTestCase):

    def test_default(self):
        """
        A named parameter works with or without a value as long as a default
        is set.
        """
        self.assertEqual(resolve(commands.NamedParam)['limit'], 5)
        self.assertEqual(resolve(commands.NamedParam, {'limit': '200'})
                         ['limit'], 200)

    def test_required_positional(self):
        self.assertEqual(resolve(commands.Positional, {'limit': '10'})
                         ['limit'], 10)
        self.assertRaises(ParamMissing, resolve, commands.Positional)

    def test_optional_left_out(self):
        """
        Parameters given nowhere and not required are left out of the run
        configuration.
        """
        data = resolve(commands.PositionalOptional, {'start': 1})
        self.assertEqual(data['start'], 1)
        self.assertNotIn('end', data)

    def test_optional_last(self):
        """
        Required positional parameters can not follow optional ones.
        """

        def build():
            class Bad(core.Command):
                start = params.IntegerParam(required=False)
                end = params.IntegerParam()

        self.assertRaises(TypeError, build)

    def test_config_file(self):
        """
        The command line wins over the config file, which wins over the
        default.
        """
        data = resolve(commands.NamedParam, config={'limit': 7})
        self.assertEqual(data['limit'], 7)
        data = resolve(commands.NamedParam, {'limit': 3}, {'limit': 7})
        self.assertEqual(data['limit'], 3)

    def test_config_file_read(self):
        directory = tempfile.mkdtemp()
        path = os.path.join(directory, 'run.json')
        with open(path, 'w') as f:
            json.dump({'limit': 11, 'verbosity': 0}, f)
        try:
            data = commands.NamedParam({'config': path}).resolve()
        finally:
            os.remove(path)
            os.rmdir(directory)
        self.assertEqual(data['limit'], 11)
        self.assertEqual(data['verbosity'], 0)

    def test_unknown_config_key(self):
        self.assertRaisesMessage(
            ParamValidationError, "does not take parameter 'limt'",
            commands.NamedParam, None, {'limt': 3})

    def test_clean_order(self):
        """
        Param.clean, then clean_<name>, then the command-wide clean.
        """
        data = resolve(commands.CleanOrder, {'word': 'w'})
        self.assertEqual(data['word'], 'w-field-command')

    def test_implicit_params(self):
        data = resolve(commands.NamedParam)
        self.assertEqual(data['threads'], 1)
        self.assertEqual(data['verbosity'], 1)
        self.assertNotIn('config', data)

    def test_inherited_params(self):
        opts = commands.Child._meta
        self.assertIn('limit', opts.params)
        self.assertIn('limit', opts.parent_params)
        self.assertEqual([p.name for p in opts.positional_params], ['name'])

    def test_default_name(self):
        self.assertEqual(commands.PositionalOptional._meta.name,
                         'positional-optional')

    def test_registry(self):
        self.assertIs(commands.registry['test-command'],
                      commands.TestCommand)
        self.assertIs(commands.registry['seeded'], commands.Seeded)
        self.assertIs(commands.registry['families'], commands.Families)


class ParamTypeTests(SimpleTestCase):

    def test_integer(self):
        self.assertRaises(ParamValidationError, resolve, commands.NamedParam,
                          {'limit': 'many'})
        self.assertRaises(ParamValidationError, resolve, commands.NamedParam,
                          {'threads': 0})
        self.assertRaises(ParamValidationError, resolve, commands.NamedParam,
                          config={'limit': 2.5})

    def test_float_bounds(self):
        self.assertEqual(resolve(commands.Rates, {'rate': '1'})['rate'], 1.0)
        self.assertRaises(ParamValidationError, resolve, commands.Rates,
                          {'rate': '1.5'})
        self.assertRaises(ParamValidationError, resolve, commands.Rates,
                          {'lr': '0'})
        self.assertEqual(resolve(commands.Rates, {'lr': '0.01'})['lr'], 0.01)

    def test_choice(self):
        self.assertEqual(resolve(commands.Rates, {'kind': 'b'})['kind'], 'b')
        self.assertRaisesMessage(ParamValidationError, 'must be one of a, b',
                                 resolve, commands.Rates, {'kind': 'c'})

    def test_list(self):
        data = resolve(commands.Rates, {'codes': 'I25, E11 "E14"'})
        self.assertEqual(data['codes'], ['I25', 'E11', 'E14'])
        data = resolve(commands.Rates, config={'codes': ['I25', 'J44']})
        self.assertEqual(data['codes'], ['I25', 'J44'])

    def test_boolean(self):
        self.assertFalse(resolve(commands.Rates)['flag'])
        self.assertTrue(resolve(commands.Rates, {'flag': True})['flag'])
        self.assertRaises(ParamValidationError, resolve, commands.Rates,
                          config={'flag': 'yes'})

    def test_path_must_exist(self):
        self.assertRaisesMessage(ParamValidationError, 'Cannot read config',
                                 commands.NamedParam,
                                 {'config': '/no/such/run.json'})
        param = params.PathParam(must_exist=True)
        param.name = 'dataset'
        self.assertRaisesMessage(ParamValidationError, 'does not exist',
                                 param.clean, '/no/such/data.tsv')
        self.assertEqual(param.clean('-'), '-')


class SeededCommandTests(SimpleTestCase):

    def test_seed_required(self):
        self.assertRaises(ParamMissing, resolve, commands.Seeded)
        command = commands.Seeded({'seed': '4'}, config={})
        self.assertEqual(command.execute(), 4)

    def test_seed_non_negative(self):
        self.assertRaises(ParamValidationError, resolve, commands.Seeded,
                          {'seed': -1})

    def test_explicit_seed_param(self):
        """
        A seeded command can not declare its own ``seed`` parameter.
        """

        def build():
            class Bad(SeededCommand):
                seed = params.IntegerParam(named=True)

        self.assertRaises(TypeError, build)


class ModelCommandTests(SimpleTestCase):

    def test_family_dispatch(self):
        command = commands.Families({'seed': 1, 'family': 'lstm'}, config={})
        self.assertEqual(command.execute(), ('lstm', 1))

    def test_family_default(self):
        command = commands.Families({'seed': 2}, config={})
        self.assertEqual(command.execute(), ('bow', 2))

    def test_family_choices(self):
        self.assertRaises(ParamValidationError, resolve, commands.Families,
                          {'seed': 1, 'family': 'transformer'})
