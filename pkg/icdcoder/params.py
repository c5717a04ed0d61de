import os

from icdcoder.exceptions import ParamValidationError
from icdcoder.utils import smarter_split


class Param(object):
    """
    A command parameter used for parsing and validation.

    This is the base class for all other parameter types, but this class can
    still be used directly for generic string values.
    """
    # Tracks each time a Param instance is created. Used to retain order.
    creation_counter = 0

    def __init__(self, required=True, default=None, named=False, help=None,
                 metavar=None):
        """
        :param required:
            Whether the parameter must be given, either on the command line
            or in the ``--config`` file. Required positional parameters can
            not occur after optional ones.

            Defaults to ``True``.

        :param default:
            The value used if the parameter is given nowhere.

            Defaults to ``None``.

        :param named:
            Make this a named parameter, given as ``--name value`` on the
            command line. Positional parameters are given bare.

            Defaults to ``False``.

        :param help:
            Help text shown by ``icdcoder <command> --help``.
        """
        self.required = required
        self.default = default
        self.named = named
        self.help = help
        self.metavar = metavar
        self.name = None

        # Params are never required if a default is set.
        if default is not None:
            self.required = False

        # Increase the creation counter, and save our local copy.
        self.creation_counter = Param.creation_counter
        Param.creation_counter += 1

    @property
    def positional(self):
        return not self.named

    @property
    def flag(self):
        return '--%s' % self.name.replace('_', '-')

    def parser_kwargs(self):
        """
        Keyword arguments for ``ArgumentParser.add_argument``.

        Defaults are deliberately left out of the parser: a missing value
        must stay distinguishable from one that was given, so the
        ``--config`` file can fill it in.
        """
        kwargs = {'help': self.help, 'default': None}
        if self.metavar:
            kwargs['metavar'] = self.metavar
        if self.positional:
            kwargs['nargs'] = '?'
        return kwargs

    def add_to_parser(self, parser):
        if self.positional:
            parser.add_argument(self.name, **self.parser_kwargs())
        else:
            parser.add_argument(self.flag, dest=self.name,
                                **self.parser_kwargs())

    def clean(self, value):
        """
        Validate the resolved ``value``.

        This method is often overridden or extended by subclasses to alter or
        perform further validation of the value, raising
        ``ParamValidationError`` as necessary.
        """
        return value


class StringParam(Param):

    def clean(self, value):
        return str(value)


class IntegerParam(Param):
    """
    Tries to cast the value to an integer, raising a validation error if
    this fails.
    """

    def __init__(self, *args, **kwargs):
        self.min_value = kwargs.pop('min_value', None)
        super(IntegerParam, self).__init__(*args, **kwargs)

    def clean(self, value):
        try:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            value = int(value)
        except (TypeError, ValueError):
            raise ParamValidationError(
                "Value for '%s' must be an integer (got %r)" % (self.name,
                                                                value)
            )
        if self.min_value is not None and value < self.min_value:
            raise ParamValidationError(
                "Value for '%s' must be at least %d (got %d)" % (
                    self.name, self.min_value, value)
            )
        return value


class FloatParam(Param):
    """
    Tries to cast the value to a float within optional bounds.
    """

    def __init__(self, *args, **kwargs):
        self.min_value = kwargs.pop('min_value', None)
        self.max_value = kwargs.pop('max_value', None)
        self.exclusive_min = kwargs.pop('exclusive_min', False)
        super(FloatParam, self).__init__(*args, **kwargs)

    def clean(self, value):
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise ParamValidationError(
                "Value for '%s' must be a number (got %r)" % (self.name,
                                                              value)
            )
        low = self.min_value
        if low is not None and (value < low or
                                (self.exclusive_min and value == low)):
            raise ParamValidationError(
                "Value for '%s' must be %s %s (got %s)" % (
                    self.name, self.exclusive_min and 'above' or 'at least',
                    low, value)
            )
        if self.max_value is not None and value > self.max_value:
            raise ParamValidationError(
                "Value for '%s' must be at most %s (got %s)" % (
                    self.name, self.max_value, value)
            )
        return value


class ChoiceParam(StringParam):

    def __init__(self, *args, **kwargs):
        try:
            self.choices = tuple(kwargs.pop('choices'))
        except KeyError:
            raise TypeError("A 'choices' keyword argument is required")
        super(ChoiceParam, self).__init__(*args, **kwargs)

    def clean(self, value):
        value = super(ChoiceParam, self).clean(value)
        if value not in self.choices:
            raise ParamValidationError(
                "Value for '%s' must be one of %s (got %r)" % (
                    self.name, ', '.join(self.choices), value)
            )
        return value


class BooleanParam(Param):
    """
    A flag which doesn't take a value on the command line.

    In a ``--config`` file it takes ``true`` or ``false``.
    """

    def __init__(self, help=None):
        super(BooleanParam, self).__init__(required=False, default=False,
                                           named=True, help=help)

    def parser_kwargs(self):
        return {'help': self.help, 'action': 'store_const', 'const': True,
                'default': None}

    def clean(self, value):
        if not isinstance(value, bool):
            raise ParamValidationError(
                "Value for '%s' must be true or false (got %r)" % (self.name,
                                                                   value)
            )
        return value


class PathParam(StringParam):
    """
    A filesystem path, optionally required to exist already.
    """

    def __init__(self, *args, **kwargs):
        self.must_exist = kwargs.pop('must_exist', False)
        super(PathParam, self).__init__(*args, **kwargs)

    def clean(self, value):
        value = super(PathParam, self).clean(value)
        if self.must_exist and value != '-' and not os.path.exists(value):
            raise ParamValidationError(
                "Path for '%s' does not exist: %s" % (self.name, value)
            )
        return value


class ListParam(Param):
    """
    A list of values given as one comma and/or space separated string, or as
    a JSON list in a ``--config`` file.
    """

    def clean(self, value):
        if isinstance(value, (list, tuple)):
            values = [str(v) for v in value]
        else:
            values = list(smarter_split(value))
        if self.required and not values:
            raise ParamValidationError("No values provided for '%s'" %
                                       self.name)
        return values
