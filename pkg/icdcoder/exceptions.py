class IcdCoderError(Exception):
    """
    Base class for every error raised by icdcoder.
    """
    exit_code = 1


class InputError(IcdCoderError, ValueError):
    """
    Bad input from a user, a file or a caller.
    """
    exit_code = 2


class DataError(InputError):

    def __init__(self, message, line=None):
        if line is not None:
            message = 'line %d: %s' % (line, message)
        super().__init__(message)
        self.line = line


class GenerationError(InputError):
    pass


class SchemaError(InputError):

    def __init__(self, message, path=''):
        if path:
            message = '%s: %s' % (path, message)
        super().__init__(message)
        self.path = path


class ParamValidationError(InputError):
    pass


class DimensionError(IcdCoderError, ValueError):
    pass


class ContractError(IcdCoderError):
    pass


class ConfigurationError(IcdCoderError):
    exit_code = 2


class ClassIndexError(IcdCoderError, IndexError):
    pass


class ParamMissing(KeyError):
    pass
