from django import template

from icdcoder.explain.heatmap import ramp_bucket

register = template.Library()

# Background colours of the eight ramp steps, white to dark red. They match
# the xterm-256 colours used for terminal output.
RAMP_COLOURS = ('#eeeeee', '#ffd7d7', '#ffafaf', '#ff8787', '#ff5f5f',
                '#ff0000', '#d70000', '#af0000')
NBSP = '\u00a0'


@register.filter
def ramp_colour(p):
    return RAMP_COLOURS[ramp_bucket(p)]


@register.filter
def ramp_step(p):
    return str(ramp_bucket(p))


@register.filter
def probability(p):
    return '%.6f' % float(p)


@register.filter
def cell_char(c):
    """
    Keep blank cells visible in the grid.
    """
    return c if c.strip() else NBSP


@register.filter
def dark(p):
    return ramp_bucket(p) >= 5
