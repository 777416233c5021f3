from .harness import (
    TrialTask,
    aggregate_cell,
    build_improvements,
    compare_solvers,
    delta_avg,
    delta_oracle,
    reference_cells,
    run_experiment,
    run_trial,
    sub_seeds,
    trial_scores,
    trial_seed,
)
from .presets import DESK_ROOM, Preset, preset_config
from .report import (
    ReportFormat,
    emit_report,
    load_report,
    render_cells_markdown,
    render_comparison,
    render_improvements,
    render_tables_markdown,
)
