"""utterflip: counterfactual utterance search for referent-identification models.

Given a black-box listener that picks which of two objects an utterance
describes, this package searches for minimally-edited, semantically close
variants of a misread utterance that flip the listener's decision, and
ships the evaluation harness (metrics, reports, majority-vote judging)
used to compare sampling strategies.
"""

from .errors import (
    ConfigError,
    DatasetParseError,
    DuplicateSampleIdError,
    EmptyInputError,
    EmptyPoolError,
    EmptyUtteranceError,
    InsufficientDiversityError,
    LexiconFormatError,
    MalformedResponseError,
    MissingAttributesError,
    NoMutablePositionsError,
    NoProposalsError,
    NotMisclassifiedError,
    OracleUnavailableError,
    UtterflipError,
    ZeroVectorError,
)
from .evaluate import (
    AggregateReport,
    JudgeVerdict,
    SampleMetrics,
    aggregate,
    compute_sample_metrics,
    judge_with_majority,
    majority_similarity,
    replay_judge_transcripts,
)
from .optimize import (
    CandidateScorer,
    FitnessRecord,
    GaConfig,
    GenerationStat,
    SearchResult,
    classflip_term,
    crossover,
    fitness,
    run_ga,
    run_random_search,
    similarity_term,
    tournament_select,
)
from .oracles import (
    EmbedderOracle,
    JudgeOracle,
    JudgeResponse,
    ListenerOracle,
    ListenerOutput,
    ObjectRef,
    ProposerOracle,
    ReferenceEmbedder,
    ReferenceJudge,
    ReferenceListener,
    ReferenceProposer,
    SamplePair,
    TextCompletionJudge,
    TextCompletionProposer,
    parse_judge_text,
    parse_proposer_text,
    remote_oracle_call,
)
from .sampling import (
    Lexicons,
    Strategy,
    StrategyKind,
    Substitution,
    Vocabulary,
    WordPool,
    build_pool,
    initial_population,
    sample,
    substitutions_between,
)
from .text import (
    PosLexicon,
    PosTag,
    SynonymLexicon,
    Token,
    Utterance,
    nvaa_positions,
    synonyms_of,
    token_levenshtein,
    tokenize,
)

__version__ = "0.1.0"
