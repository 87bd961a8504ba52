"""tides: differentiable 2D topology optimization with a visual judge in the loop."""

from .fem import (
    DensityField,
    DesignProblem,
    FemSolution,
    SolveError,
    assemble_and_solve,
    compliance_gradient,
    compliance_mask,
    element_stiffness,
    simp_modulus,
)
from .encode import (
    BlurKernel,
    ParameterField,
    blur,
    blur_transpose,
    encode,
    encode_gradient,
    hill,
    hill_derivative,
    init_canvas,
    init_from_image,
)
from .judge import (
    JudgeImage,
    JudgeResult,
    JudgeSpec,
    JudgeUnavailableError,
    ProtocolError,
    RemoteJudgeClient,
    build_judge_image,
    judge_image_adjoint,
    reference_judge,
    remote_judge,
)
from .opt import (
    LossBreakdown,
    LossWeights,
    OptimizerState,
    RunConfig,
    RunRecord,
    adamw_step,
    material_cost,
    run,
    total_loss,
)
from .problems import REGISTRY, cleanup_components, make_problem, problem_info

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
