from icdcoder.explain.heatmap import (
    FORMATS, RAMP_THRESHOLDS, HeatmapDoc, build_heatmap, ramp_bucket,
    read_csv)
from icdcoder.explain.render import render
