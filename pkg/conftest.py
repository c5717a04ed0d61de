import django
from django.conf import settings

# Mirror runtests.py so the Django-based test cases run under pytest.
if not settings.configured:
    settings.configure(
        DATABASES={},
        INSTALLED_APPS=[],
        LOGGING_CONFIG=None,
    )
django.setup()
