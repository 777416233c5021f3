"""Monte-Carlo checks on desk-scale sweeps. Slow: run with ``-m slow``."""

from __future__ import annotations

from typing import TYPE_CHECKING

import pytest

from blind_tdoa.bench import Preset, ReportFormat, compare_solvers, emit_report, preset_config, run_experiment
from blind_tdoa.models import SolverId

if TYPE_CHECKING:
    from pathlib import Path

    from blind_tdoa.models import SolverComparison

pytestmark = pytest.mark.slow


def _mean_metrics(comparison: SolverComparison, solver: SolverId) -> tuple[float, float]:
    (row,) = [r for r in comparison.rows if r.solver is solver]
    assert row.metrics is not None, f'{solver} produced an invalid cell'
    return row.metrics.a_ppm, row.metrics.a_pup


def test_errors_grow_with_noise() -> None:
    cfg = preset_config(
        Preset.DESK,
        master_seed=2024,
        signals=('white',),
        s_values=(0.01, 0.1, 1.0),
        n_mics_values=(2,),
        improvements=False,
    )
    report = run_experiment(cfg, jobs=4)
    pup = []
    for s in cfg.s_values:
        cell = report.cell('white', s, 2)
        assert cell is not None
        assert cell.metrics is not None
        pup.append(cell.metrics.a_pup)

    inversions = sum(later < earlier for earlier, later in zip(pup, pup[1:], strict=False))
    assert inversions <= 1, pup


def test_desk_sweep_is_reproducible(tmp_path: Path) -> None:
    cfg = preset_config(Preset.DESK, master_seed=99, z_trials=4)
    emit_report(run_experiment(cfg), [ReportFormat.CSV], tmp_path / 'serial')
    emit_report(run_experiment(cfg, jobs=3), [ReportFormat.CSV], tmp_path / 'parallel')

    for name in ('cells.csv', 'raw_trials.csv'):
        assert (tmp_path / 'serial' / name).read_bytes() == (tmp_path / 'parallel' / name).read_bytes()


def test_ensemble_beats_joint_solving() -> None:
    cfg = preset_config(
        Preset.DESK,
        master_seed=7,
        signals=('white',),
        s_values=(0.01,),
        n_mics_values=(6,),
        z_trials=20,
        improvements=False,
    )
    (comparison,) = compare_solvers(cfg, [SolverId.IL1C, SolverId.IL1C_ENSEMBLE], jobs=4)
    assert comparison.win_fractions['il1c-ensemble/il1c'] >= 0.7


def test_incremental_does_not_beat_joint_solving() -> None:
    cfg = preset_config(
        Preset.DESK,
        master_seed=7,
        signals=('white',),
        s_values=(0.01,),
        n_mics_values=(6,),
        z_trials=20,
        improvements=False,
    )
    (comparison,) = compare_solvers(cfg, [SolverId.IL1C, SolverId.IL1C_INCREMENTAL], jobs=4)
    _, joint_pup = _mean_metrics(comparison, SolverId.IL1C)
    _, incremental_pup = _mean_metrics(comparison, SolverId.IL1C_INCREMENTAL)
    assert incremental_pup >= joint_pup
