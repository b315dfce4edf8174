# Configuration file for the Sphinx documentation builder.
#
# This file does only contain a selection of the most common options. For a
# full list see the documentation:
# http://www.sphinx-doc.org/en/master/config

# -- Path setup --------------------------------------------------------------

import os
import sys
import sphinx_rtd_theme
sys.path.insert(0, os.path.abspath('..'))

import draftiv

# -- Project information -----------------------------------------------------

project = 'draftiv'
copyright = '2025, The draftiv developers'
author = 'The draftiv developers'

# The short X.Y version
version = draftiv.__version__
# The full version, including alpha/beta/rc tags
release = draftiv.__version__


# -- General configuration ---------------------------------------------------

extensions = ['sphinx.ext.autodoc',
              'sphinx.ext.mathjax',
              'sphinx.ext.napoleon',
              'sphinx_rtd_theme',
              'sphinx_autodoc_typehints'
]

add_function_parentheses = False
set_type_checking_flag = True
napoleon_use_rtype = False
add_module_names = False

templates_path = ['_templates']
source_suffix = ['.rst', '.md']
master_doc = 'index'
language = 'en'
exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']
pygments_style = 'sphinx'


# -- Options for HTML output -------------------------------------------------

html_theme = 'sphinx_rtd_theme'
htmlhelp_basename = 'draftivdoc'


# -- Options for manual page output ------------------------------------------

man_pages = [
    (master_doc, 'draftiv', 'draftiv Documentation',
     [author], 1)
]
