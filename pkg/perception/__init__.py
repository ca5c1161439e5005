# Point-cloud projection into front-view and BEV grids
from .projection import (
    LabeledPoint,
    LabeledPointCloud,
    ProjectedGrid,
    log_depth,
    project,
    project_bev,
    project_front,
    reference_rasterize,
)
from .grid_io import read_grid, read_header, write_grid
from .render import get_palette, invert_render, render_grid, render_to_file

__all__ = [
    "LabeledPoint",
    "LabeledPointCloud",
    "ProjectedGrid",
    "log_depth",
    "project",
    "project_bev",
    "project_front",
    "reference_rasterize",
    "read_grid",
    "read_header",
    "write_grid",
    "get_palette",
    "invert_render",
    "render_grid",
    "render_to_file",
]
