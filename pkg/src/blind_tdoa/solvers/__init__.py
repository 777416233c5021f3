from .blind import (
    anchor_l1,
    cross_validate_epsilon,
    il1c,
    initial_slack,
    initializer_channels,
    nonneg_anchor_l1,
    solve_slack_qp,
    tong_l2,
    tong_vector,
)
from .projections import AnchorSet, SlackSet, project_capped_simplex, project_l1_ball, project_simplex
from .qp import largest_eigenvalue, minimize_quadratic
