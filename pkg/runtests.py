#!/usr/bin/env python
import sys

import django
from django.conf import settings

if not settings.configured:
    settings.configure(
        DATABASES={},
        INSTALLED_APPS=[],
        LOGGING_CONFIG=None,
    )
django.setup()

from django.test.runner import DiscoverRunner


def runtests(*test_args):
    if not test_args:
        test_args = ['icdcoder.tests']
    failures = DiscoverRunner(verbosity=1, interactive=False).run_tests(
        test_args)
    sys.exit(bool(failures))


if __name__ == '__main__':
    runtests(*sys.argv[1:])
