import re

import numpy as np
import pytest

from semidiscrete.cost import CenterSet, CostSpec
from semidiscrete.errors import DimensionError, ValidationError
from semidiscrete.measures import MapSpec, grid_uniform, pushforward_gradient_map
from semidiscrete.oracle import kmeans_pp
from semidiscrete.refinement import RefineOptions, refine_loop
from semidiscrete.svg import FigureSpec, disagreement, palette, render, render_partitions


def _fills(svg):
    return re.findall(r'<rect x="[^"]+" y="[^"]+" width="[^"]+" height="[^"]+" fill="(#[0-9a-f]{6})"',
                      svg)


def _solve(lam, m=10):
    mu = grid_uniform(2, 20)
    nu = pushforward_gradient_map(mu, MapSpec("paper_phi", lam))
    Z0 = kmeans_pp(np.vstack([mu.points, nu.points]), np.ones(2 * mu.n), m,
                   np.random.default_rng(0))
    traj = refine_loop(mu, nu, Z0, CostSpec(2.0), RefineOptions(rounds=10))
    rep = traj.reports[-1]
    return mu, nu, traj.final_centers, rep.source_partition, rep.target_partition


def test_single_cell_figure():
    mu = grid_uniform(2, 4)
    svg = render(mu.points, np.zeros(mu.n, int), CenterSet([[0.5, 0.5]]), 1)
    assert len(set(_fills(svg))) == 1 and len(_fills(svg)) == 16
    assert svg.count("<path") == 1


def test_square_grid_figure_counts():
    mu, nu, Z, A, B = _solve(0.2)
    figs = render_partitions(mu, nu, Z, A, B)
    assert set(figs) == {"source", "target", "pullback"}
    assert len(_fills(figs["source"])) == 400
    assert figs["source"].count("<path") == 10


def test_identity_target_gives_identical_pullback():
    mu, nu, Z, A, B = _solve(0.0)
    figs = render_partitions(mu, nu, Z, A, B)
    assert figs["source"] == figs["pullback"]
    assert disagreement(A, B) == 0.0


def test_render_rejects_non_planar():
    with pytest.raises(DimensionError):
        render(np.zeros((3, 1)), np.zeros(3, int), None, 1)
    with pytest.raises(ValidationError):
        FigureSpec(sides=("left",))


def test_palette_is_seeded():
    assert palette(5, 1) == palette(5, 1)
    assert len(set(palette(12, 0))) == 12
    assert palette(5, 1) != palette(5, 2)
