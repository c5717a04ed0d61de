"""
Heatmap output: ANSI terminal lines, a standalone HTML page rendered with
the Django template engine, and CSV.
"""
import csv
import io
import os
import sys

from django.conf import settings
from django.template import Context, Engine

from icdcoder.exceptions import InputError
from icdcoder.explain.heatmap import FORMATS, ramp_bucket

# xterm-256 background colours of the eight ramp steps.
ANSI_RAMP = (255, 224, 217, 210, 203, 196, 160, 124)
ANSI_CELL = '\x1b[%d;48;5;%dm%s'
ANSI_RESET = '\x1b[0m'
TEMPLATE_DIR = os.path.join(os.path.dirname(__file__), 'templates')
TEMPLATE_LIBRARIES = {
    'heatmap_tags': 'icdcoder.explain.templatetags.heatmap_tags',
}

_engine = None


def get_engine():
    """
    A standalone template engine for the heatmap page; settings are
    configured with defaults when the caller has not done so.
    """
    global _engine
    if _engine is None:
        if not settings.configured:
            settings.configure()
        _engine = Engine(dirs=[TEMPLATE_DIR], libraries=TEMPLATE_LIBRARIES,
                         builtins=[TEMPLATE_LIBRARIES['heatmap_tags']])
    return _engine


def render_ansi(doc):
    width = max(len(code) for code in doc.classes)
    lines = []
    for code, row in doc.rows:
        cells = []
        for char, p in zip(doc.text, row):
            step = ramp_bucket(p)
            cells.append(ANSI_CELL % (step >= 5 and 97 or 30,
                                      ANSI_RAMP[step], char))
        lines.append('%-*s %s%s' % (width, code, ''.join(cells), ANSI_RESET))
    return '\n'.join(lines) + '\n'


def render_html(doc):
    rows = [(code, [(char, repr(float(p))) for char, p in zip(doc.text, row)])
            for code, row in doc.rows]
    template = get_engine().get_template('icdcoder/heatmap.html')
    return template.render(Context({
        'title': 'Heatmap: %s' % doc.text,
        'summary': doc.summary(),
        'rows': rows,
    }))


def render_csv(doc):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(['position', 'char'] + doc.classes)
    for i, char in enumerate(doc.text):
        writer.writerow([i + 1, char] +
                        ['%.6f' % row[i] for _, row in doc.rows])
    return out.getvalue()


RENDERERS = {
    'ansi': render_ansi,
    'html': render_html,
    'csv': render_csv,
}


def render(doc, format=None, path='-', stream=None):
    """
    Render ``doc`` and write it to ``path``, or to ``stream`` (standard
    output by default) for ``'-'``. Returns the rendered text.
    """
    format = format or doc.format
    if format not in FORMATS:
        raise InputError('unknown heatmap format %r' % format)
    content = RENDERERS[format](doc)
    if path == '-':
        (stream or sys.stdout).write(content)
    else:
        with open(path, 'w', encoding='utf-8', newline='') as f:
            f.write(content)
    return content
