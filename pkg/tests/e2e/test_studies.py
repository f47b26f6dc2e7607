"""Run reduced versions of the three studies from the command line."""

from pathlib import Path
from typing import Callable

import numpy as np
import pytest

from latent_dim.config import load_config
from latent_dim.entrypoints.cli import main
from latent_dim.model import ErrorDecayReport, Table1Report

pytestmark = pytest.mark.slow

STUDIES = {
    "darcy": """\
problem.kind = darcy
mesh.n_div = 10
snapshots.count = 80
snapshots.seed = 2024
random_field.kl_modes = 40
sweep.latent_dims = 1,2,4,8
train.alpha1 = 1/5
train.alpha2 = 1/5
train.alpha3 = 1/16
train.epochs = 40
train.batch_size = 16
table1.latent_dim = 4
""",
    "burgers": """\
problem.kind = burgers
burgers.n_cells = 100
burgers.dt = 0.02
burgers.series_terms = 50
snapshots.count = 60
snapshots.seed = 7
sweep.latent_dims = 1,2,4
train.rel_first_term = true
train.alpha3 = 1/16
train.epochs = 20
train.batch_size = 16
table1.latent_dim = 4
""",
    "cookie": """\
problem.kind = cookie
mesh.n_div = 12
cookie.widths = 20,40
snapshots.count = 60
snapshots.seed = 11
sweep.latent_dims = 1,2,3
train.alpha3 = 1/16
train.epochs = 20
train.batch_size = 16
table1.latent_dim = 3
""",
}


@pytest.mark.parametrize("problem", sorted(STUDIES))
def test_study_runs_end_to_end(
    write_config: Callable[[str], Path], problem: str
) -> None:
    """
    Given: A reduced study configuration
    When: Running generate, sweep and table1 with two workers
    Then: Every command succeeds and the reports are consistent
    """
    path = write_config(STUDIES[problem])
    config = load_config(path)
    out = Path(config.output.directory)

    results = [
        main([command, "--config", str(path), "--jobs", "2"])
        for command in ("generate", "sweep", "table1")
    ]

    assert results == [0, 0, 0]
    sweep = ErrorDecayReport.parse_file(out / "sweep" / "report.json")
    assert [row.n for row in sweep.rows] == config.sweep.latent_dims
    assert all(np.isfinite(sweep.column("e_ae")))
    e_pod = sweep.column("e_pod")
    assert all(second <= first + 1e-12 for first, second in zip(e_pod, e_pod[1:]))
    table = Table1Report.parse_file(out / "table1" / "table1.json")
    assert table.problem == problem
    assert table.n == config.table1.latent_dim
    assert np.isfinite(table.dlrom_percent)


def test_darcy_spectra_decay(write_config: Callable[[str], Path]) -> None:
    """
    Given: The reduced Darcy study
    When: Running the sweep
    Then: The input and output tails decay with negative fitted slopes
    """
    path = write_config(STUDIES["darcy"])
    main(["generate", "--config", str(path)])

    result = main(["sweep", "--config", str(path)])

    assert result == 0
    report = ErrorDecayReport.parse_file(
        Path(load_config(path).output.directory) / "sweep" / "report.json"
    )
    assert report.slopes.beta_mu is not None
    assert report.slopes.beta_mu < 0
    assert report.slopes.beta_pod is not None
    assert report.slopes.beta_pod < 0
    tails = report.column("sqrt_tail_mu")
    assert all(second <= first for first, second in zip(tails, tails[1:]))
