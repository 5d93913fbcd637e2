"""tabsynth: desk-scale transformer tabular data synthesis and a
hyperparameter sensitivity benchmark (runtime, ML utility, similarity)."""

__version__ = "0.1.0"

from .data import (  # noqa: F401
    CATEGORICAL,
    CLASSIFICATION,
    CONTINUOUS,
    KEY,
    REGRESSION,
    ColumnSpec,
    DataTable,
    TableSchema,
    denormalize_continuous,
    drop_incomplete,
    encode_categoricals,
    load_csv,
    load_schema,
    normalize_continuous,
    preprocess,
    renormalize_continuous,
    save_schema,
    shuffle_split,
    write_csv,
)
from .codec import (  # noqa: F401
    ColumnOrder,
    ParseFailure,
    permute_order,
    quantize_numbers,
    row_to_text,
    text_to_row,
    validate_row,
)
from .tokens import Vocab, build_vocab, decode, encode  # noqa: F401
from .model import (  # noqa: F401
    ModelConfig,
    TransformerModel,
    calibrate_c,
    causal_attention,
    count_params,
    estimate_size,
    forward,
    init_model,
    load_checkpoint,
    save_checkpoint,
)
from .train import (  # noqa: F401
    TrainConfig,
    TrainTrace,
    adam_step,
    cross_entropy,
    fit_table,
    grad_check,
    train,
)
from .sample import (  # noqa: F401
    GenerationBudgetError,
    GenerationStats,
    SampleConfig,
    generate_conditional,
    generate_sentence,
    generate_table,
    sample_token,
)
from .relational import (  # noqa: F401
    EmpiricalDistribution,
    RelationalModel,
    RelationalSchema,
    children_histogram,
    fit_child,
    fit_parent,
    fit_relational,
    generate_relational,
    with_key_column,
)
from .learners import (  # noqa: F401
    Dataset2D,
    ForestConfig,
    accuracy,
    fit_forest,
    fit_linear,
    fit_logistic,
    macro_f1,
    r_squared,
)
from .evaluate import (  # noqa: F401
    RuntimeStat,
    SimilarityResult,
    UtilityResult,
    discriminator_similarity,
    evaluate_utility,
    measure_runtime,
)
from .runner import (  # noqa: F401
    ExperimentConfig,
    GridPoint,
    emit_plot,
    emit_report,
    load_config,
    run_sweep,
)
