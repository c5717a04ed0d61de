# -*- coding: utf-8 -*-
#
# icdcoder documentation build configuration file.
#
# This file is execfile()d with the current directory set to its containing
# dir.

import sys, os

# Make the package importable for the version number.
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from icdcoder import get_version

# -- General configuration ----------------------------------------------------

extensions = ['sphinx.ext.todo', 'sphinx.ext.intersphinx']

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable/', None),
    'django': ('https://docs.djangoproject.com/en/stable/',
               'https://docs.djangoproject.com/en/stable/_objects/'),
}

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = 'icdcoder'
copyright = '2026, the icdcoder authors'

# The short X.Y version.
version = get_version(number_only=True)
# The full version, including alpha/beta/rc tags.
release = get_version()

exclude_patterns = ['_build']
pygments_style = 'sphinx'

# -- Options for HTML output --------------------------------------------------

on_rtd = os.environ.get('READTHEDOCS', None) == 'True'
if on_rtd:
    # Use the default theme on Read the Docs
    html_theme = 'default'
else:
    html_theme = 'agogo'

html_static_path = []
htmlhelp_basename = 'icdcoderdoc'

# -- Options for LaTeX output -------------------------------------------------

latex_documents = [
    ('index', 'icdcoder.tex', 'icdcoder Documentation',
     'the icdcoder authors', 'manual'),
]

# -- Options for manual page output -------------------------------------------

man_pages = [
    ('index', 'icdcoder', 'icdcoder Documentation',
     ['the icdcoder authors'], 1)
]
