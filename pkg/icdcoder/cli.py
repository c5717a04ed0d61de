"""
Command-line entry point: ``icdcoder <command> [options]``.
"""
import argparse
import logging
import sys
import traceback

from icdcoder import get_version
from icdcoder.commands import COMMANDS, ORDER
from icdcoder.exceptions import IcdCoderError, ParamMissing

logger = logging.getLogger('icdcoder')

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
LOG_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)


def build_parser():
    parser = argparse.ArgumentParser(
        prog='icdcoder',
        description='Assign three-character ICD-10 codes to problem-list '
                    'entries.')
    parser.add_argument('--version', action='version',
                        version='%(prog)s ' + get_version())
    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND')
    subparsers.required = True
    for name in ORDER:
        command = COMMANDS[name]
        sub = subparsers.add_parser(name, help=command._meta.help,
                                    description=command.__doc__)
        command.add_arguments(sub)
    return parser


def configure_logging(verbosity):
    level = LOG_LEVELS[min(verbosity, len(LOG_LEVELS) - 1)]
    root = logging.getLogger()
    if not root.handlers:
        logging.basicConfig(format=LOG_FORMAT, stream=sys.stderr)
    logger.setLevel(level)


def run(argv=None, stdout=None, stderr=None):
    """
    Parse ``argv``, run the command and return its exit status.
    """
    stderr = stderr or sys.stderr
    parser = build_parser()
    args = vars(parser.parse_args(argv))
    name = args.pop('command')
    verbosity = 1
    try:
        command = COMMANDS[name](args, stdout=stdout)
        data = command.resolve()
        verbosity = data['verbosity']
        configure_logging(verbosity)
        logger.debug('%s config: %r', name, data)
        command.handle(data)
    except ParamMissing as e:
        stderr.write('icdcoder %s: %s\n' % (name, e.args[0]))
        return 2
    except IcdCoderError as e:
        stderr.write('icdcoder %s: %s\n' % (name, e))
        return e.exit_code
    except OSError as e:
        stderr.write('icdcoder %s: %s\n' % (name, e))
        return 2
    except Exception as e:
        if verbosity >= 2:
            traceback.print_exc(file=stderr)
        stderr.write('icdcoder %s: internal error: %s\n' % (name, e))
        return 1
    return 0


def main(argv=None):
    sys.exit(run(argv))
