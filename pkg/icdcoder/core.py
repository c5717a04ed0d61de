import json
import logging
import sys

from icdcoder import utils, params
from icdcoder.exceptions import ParamMissing, ParamValidationError

logger = logging.getLogger(__name__)


class Options(object):

    def __init__(self, meta, *args, **kwargs):
        super(Options, self).__init__(*args, **kwargs)
        self.positional_params = []
        self.named_params = {}
        # A list of parameter names that are inherited from bases
        self.parent_params = []
        self.name = getattr(meta, 'name', None)
        self.help = getattr(meta, 'help', None)
        self.registry = getattr(meta, 'registry', None)

    @property
    def params(self):
        if not hasattr(self, '_params'):
            all_params = dict([(param.name, param)
                               for param in self.positional_params])
            all_params.update(self.named_params)
            self._params = all_params
        return self._params

    def reset_params(self):
        if hasattr(self, '_params'):
            del self._params

    def add_named(self, name, param):
        """
        Add an implicit named parameter unless the command declares its own.
        """
        if name in self.named_params:
            return
        param.name = name
        param.named = True
        self.named_params[name] = param

    def post_process(self):
        self.add_named('config', params.PathParam(
            required=False, must_exist=True, metavar='JSON',
            help='JSON file of parameter values; command line wins.'))
        self.add_named('threads', params.IntegerParam(
            default=1, min_value=1,
            help='Worker threads for prediction loops.'))
        self.add_named('verbosity', params.IntegerParam(
            default=1, min_value=0,
            help='0 warnings only, 1 progress, 2 and 3 debug output.'))
        self.reset_params()


class DeclarativeParamsMetaclass(type):
    options_class = Options

    def __new__(cls, name, bases, attrs):
        super_new = super(DeclarativeParamsMetaclass, cls).__new__
        parents = [b for b in bases if isinstance(b, DeclarativeParamsMetaclass)]
        if not parents:
            return super_new(cls, name, bases, attrs)

        meta = attrs.pop('Meta', None)
        opts = cls.options_class(meta)

        # Generate the command name if it wasn't explicitly provided.
        if not opts.name:
            opts.name = utils.get_default_name(name).replace('_', '-')

        all_params = [(param_name.rstrip('_'), attrs.pop(param_name))
                      for param_name, obj in list(attrs.items())
                      if isinstance(obj, params.Param)]
        all_params.sort(key=lambda x: x[1].creation_counter)

        # Put the positional and named parameters in their respective places.
        optional_positional = False
        for param_name, param in all_params:
            param.name = param_name
            if param.positional:
                if param.required:
                    if optional_positional:
                        raise TypeError(
                            "Required '%s' positional parameter of '%s' "
                            "cannot exist after optional positional "
                            "parameters." % (param.name, opts.name)
                        )
                else:
                    optional_positional = True
                opts.positional_params.append(param)
            else:
                opts.named_params[param_name] = param

        # If this class is subclassing another command, add that command's
        # positional parameters before ones declared here. The bases are
        # looped in reverse to preserve the correct order of positional
        # parameters and correctly override named parameters.
        for base in bases[::-1]:
            base_opts = getattr(base, '_meta', None)
            if hasattr(base_opts, 'positional_params'):
                opts.positional_params = base_opts.positional_params + \
                    opts.positional_params
            if hasattr(base_opts, 'named_params'):
                for param_name, param in base_opts.named_params.items():
                    if param_name not in opts.named_params:
                        opts.named_params[param_name] = param
                        opts.parent_params.append(param_name)

        attrs['_meta'] = opts

        opts.post_process()

        new_class = super_new(cls, name, bases, attrs)

        if opts.registry is not None:
            opts.registry[opts.name] = new_class

        return new_class


class BaseCommand(object):
    """
    A subcommand of the ``icdcoder`` program.
    """

    def __init__(self, values=None, config=None, stdout=None):
        """
        :param values: Values given on the command line, keyed by parameter
            name. ``None`` means not given.
        :param config: Values loaded from a ``--config`` JSON file. If not
            passed, the file named by the ``config`` value is read.
        :param stdout: Stream for results meant for the user; standard output
            by default.
        """
        self.stdout = stdout or sys.stdout
        self._values = dict((k, v) for k, v in (values or {}).items()
                            if v is not None)
        if config is None:
            config = self.load_config(self._values.get('config'))
        unknown = sorted(set(config) - set(self._meta.params))
        if unknown:
            raise ParamValidationError(
                "'%s' does not take parameter '%s'" % (self._meta.name,
                                                       unknown[0])
            )
        self._config = config

    @staticmethod
    def load_config(path):
        if not path:
            return {}
        try:
            with open(path, encoding='utf-8') as f:
                config = json.load(f)
        except OSError as e:
            raise ParamValidationError('Cannot read config file %s: %s' % (
                path, e.strerror or e))
        except ValueError as e:
            raise ParamValidationError('Invalid JSON in %s: %s' % (path, e))
        if not isinstance(config, dict):
            raise ParamValidationError('%s must hold a JSON object' % path)
        return dict((k.replace('-', '_'), v) for k, v in config.items())

    @classmethod
    def add_arguments(cls, parser):
        for param in cls._meta.positional_params:
            param.add_to_parser(parser)
        for name in sorted(cls._meta.named_params):
            cls._meta.named_params[name].add_to_parser(parser)

    def clean(self, data):
        """
        Additional command-wide cleaning after each individual Param's
        ``clean`` has been called.
        """
        return data

    def resolve(self):
        """
        Look up and clean every parameter, returning a dictionary containing
        the cleaned data (the run configuration).

        Lookup order is the command line, then the ``--config`` file, then
        the parameter default. Parameters given nowhere and not required are
        left out of the dictionary.

        Cleaning order is similar to forms:

        1) The parameter's ``.clean()`` method.
        2) The command's ``clean_PARAMNAME()`` method, if any.
        3) The command's ``.clean()`` method.
        """
        data = {}
        for name, param in self._meta.params.items():
            value = self._values.get(name)
            if value is None:
                value = self._config.get(name)
            if value is None:
                value = param.default
            if value is None:
                if param.required:
                    raise ParamMissing(
                        "'%s' parameter to '%s' is required" % (
                            name, self._meta.name)
                    )
                continue
            value = param.clean(value)
            command_clean = getattr(self, 'clean_%s' % name, None)
            if command_clean is not None:
                value = command_clean(value)
            data[name] = value
        return self.clean(data)

    def execute(self):
        data = self.resolve()
        logger.debug('%s config: %r', self._meta.name, data)
        return self.handle(data)

    def handle(self, data):
        raise NotImplementedError(
            "Command subclasses must implement this method.")


class Command(BaseCommand, metaclass=DeclarativeParamsMetaclass):
    # This is a separate class from BaseCommand in order to abstract the way
    # parameters are specified. This class (Command) is the one that does the
    # fancy metaclass stuff purely for the semantic sugar -- it allows one
    # to define a command using declarative syntax.
    # BaseCommand itself has no way of designating parameters.
    pass
